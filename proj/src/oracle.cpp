#include "levelcg/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "levelcg/errors.hpp"
#include "levelcg/rng.hpp"

namespace levelcg {

SmoothOracle::SmoothOracle(int dim, EvalFn fn, double lipschitz_grad, double lipschitz_val,
                           bool constants_estimated)
    : dim_(dim),
      fn_(std::move(fn)),
      lipschitz_grad_(lipschitz_grad),
      lipschitz_val_(lipschitz_val),
      estimated_(constants_estimated) {
  if (dim < 1) throw InvalidConstant("SmoothOracle: dim must be positive");
  if (lipschitz_grad < 0.0 || lipschitz_val < 0.0)
    throw InvalidConstant("SmoothOracle: Lipschitz constants must be nonnegative");
}

Eval SmoothOracle::eval(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim_) throw DimMismatch("SmoothOracle::eval");
  require_finite(x, "x");
  return fn_(x);
}

SmoothOracle SmoothOracle::zero(int dim) {
  return SmoothOracle(
      dim, [dim](std::span<const double>) { return Eval{0.0, Vec(dim, 0.0)}; }, 0.0, 0.0);
}

SmoothOracle SmoothOracle::affine(Vec slope, double intercept) {
  const int dim = static_cast<int>(slope.size());
  const double m = norm2(slope);
  return SmoothOracle(
      dim,
      [slope = std::move(slope), intercept](std::span<const double> x) {
        return Eval{dot(slope, x) + intercept, slope};
      },
      0.0, m);
}

SmoothOracle SmoothOracle::with_estimated_constants(int dim, EvalFn fn, double lo, double hi,
                                                    std::uint64_t seed) {
  Rng rng(seed);
  double max_grad = 0.0;
  double max_ratio = 0.0;
  Vec a(dim), b(dim);
  for (int trial = 0; trial < 200; ++trial) {
    for (int i = 0; i < dim; ++i) {
      a[i] = rng.uniform(lo, hi);
      b[i] = rng.uniform(lo, hi);
    }
    const Eval ea = fn(a);
    const Eval eb = fn(b);
    max_grad = std::max({max_grad, norm2(ea.grad), norm2(eb.grad)});
    Vec diff(dim);
    for (int i = 0; i < dim; ++i) diff[i] = a[i] - b[i];
    const double dist = norm2(diff);
    if (dist > 1e-12) {
      Vec gdiff(dim);
      for (int i = 0; i < dim; ++i) gdiff[i] = ea.grad[i] - eb.grad[i];
      max_ratio = std::max(max_ratio, norm2(gdiff) / dist);
    }
  }
  return SmoothOracle(dim, std::move(fn), 2.0 * max_ratio, 2.0 * max_grad, true);
}

AffineMinorant linearize(const SmoothOracle& oracle, std::span<const double> anchor) {
  return linearize(oracle.eval(anchor), anchor);
}

AffineMinorant linearize(const Eval& at_anchor, std::span<const double> anchor) {
  if (at_anchor.grad.size() != anchor.size()) throw DimMismatch("linearize");
  AffineMinorant out;
  out.slope = at_anchor.grad;
  out.intercept = at_anchor.value - dot(at_anchor.grad, anchor);
  if (!std::isfinite(out.intercept) || !all_finite(out.slope))
    throw NonFiniteInput("linearize produced non-finite minorant");
  return out;
}

AffineMinorant combine_minorant(const AffineMinorant& prev, const AffineMinorant& next,
                                double alpha) {
  if (prev.slope.size() != next.slope.size()) throw DimMismatch("combine_minorant");
  AffineMinorant out;
  out.slope = convex_combine(prev.slope, next.slope, alpha);
  out.intercept = (1.0 - alpha) * prev.intercept + alpha * next.intercept;
  return out;
}

SmoothedHinge::SmoothedHinge(double eta) : eta(eta) {
  if (!(eta > 0.0)) throw InvalidConstant("SmoothedHinge: eta must be positive");
}

double SmoothedHinge::value(double a) const {
  if (a <= 0.0) return 0.0;
  if (a >= eta) return a - eta / 2.0;
  return a * a / (2.0 * eta);
}

double SmoothedHinge::derivative(double a) const {
  return std::clamp(a / eta, 0.0, 1.0);
}

std::pair<double, double> smoothed_hinge_eval(double eta, double a) {
  const SmoothedHinge h(eta);
  return {h.value(a), h.derivative(a)};
}

SmoothedGroupMax::SmoothedGroupMax(double eta, int group_size) : eta(eta), group_size(group_size) {
  if (!(eta > 0.0)) throw InvalidConstant("SmoothedGroupMax: eta must be positive");
  if (group_size < 1) throw InvalidConstant("SmoothedGroupMax: group_size must be positive");
}

Eval SmoothedGroupMax::eval(std::span<const double> v) const {
  if (static_cast<int>(v.size()) != group_size) throw DimMismatch("SmoothedGroupMax::eval");
  require_finite(v, "v");
  const double vmax = max_element_or(v, 0.0);
  double sum = 0.0;
  Eval out;
  out.grad.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.grad[i] = std::exp((v[i] - vmax) / eta);
    sum += out.grad[i];
  }
  out.value = vmax + eta * std::log(sum / group_size);
  for (auto& g : out.grad) g /= sum;
  return out;
}

double SmoothedGroupMax::value(std::span<const double> v) const { return eval(v).value; }

std::pair<double, Vec> smoothed_groupmax_eval(double eta, std::span<const double> v) {
  const SmoothedGroupMax g(eta, static_cast<int>(v.size()));
  Eval e = g.eval(v);
  return {e.value, std::move(e.grad)};
}

SigmoidIndicator::SigmoidIndicator(double theta) : theta(theta) {
  if (!(theta > 0.0)) throw BadTheta();
}

double SigmoidIndicator::value(double a) const { return 1.0 / (1.0 + std::exp(-a / theta)); }

double SigmoidIndicator::derivative(double a) const {
  const double s = value(a);
  return s * (1.0 - s) / theta;
}

double eta_schedule(int t, double b_norm, double d_x, double d_u) {
  if (t < 1) throw InvalidConstant("eta_schedule: t must be >= 1");
  if (!(b_norm > 0.0) || !(d_x > 0.0) || !(d_u > 0.0))
    throw InvalidConstant("eta_schedule: constants must be positive");
  return b_norm * d_x / (std::sqrt(static_cast<double>(t)) * d_u);
}

double fd_check(const SmoothOracle& oracle, const std::vector<Vec>& points) {
  constexpr double kStep = 1e-5;
  double worst = 0.0;
  for (const Vec& x : points) {
    const Eval e = oracle.eval(x);
    Vec fd(x.size());
    Vec probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
      probe[i] = x[i] + kStep;
      const double up = oracle.value(probe);
      probe[i] = x[i] - kStep;
      const double dn = oracle.value(probe);
      probe[i] = x[i];
      fd[i] = (up - dn) / (2.0 * kStep);
    }
    Vec diff(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) diff[i] = fd[i] - e.grad[i];
    worst = std::max(worst, norm2(diff) / std::max(1.0, norm2(e.grad)));
  }
  return worst;
}

SaddleRow SaddleRow::smooth(SmoothOracle oracle) {
  SaddleRow row;
  row.smoothable_ = false;
  row.dim_ = oracle.dim();
  row.lipschitz_val_ = oracle.lipschitz_val();
  row.oracle_ = std::move(oracle);
  return row;
}

SaddleRow SaddleRow::smoothable(int dim, SmoothedFn smoothed, ExactFn exact, double b_norm,
                                double d_u, double lipschitz_val) {
  if (!(b_norm > 0.0) || !(d_u > 0.0))
    throw InvalidConstant("SaddleRow: smoothable rows need positive ||B|| and D_U");
  SaddleRow row;
  row.smoothable_ = true;
  row.dim_ = dim;
  row.smoothed_ = std::move(smoothed);
  row.exact_ = std::move(exact);
  row.b_norm_ = b_norm;
  row.d_u_ = d_u;
  row.lipschitz_val_ = lipschitz_val;
  return row;
}

Eval SaddleRow::eval(std::span<const double> x, double eta) const {
  if (static_cast<int>(x.size()) != dim_) throw DimMismatch("SaddleRow::eval");
  if (!smoothable_) return oracle_.eval(x);
  return smoothed_(x, eta);
}

double SaddleRow::exact_value(std::span<const double> x) const {
  if (!smoothable_) return oracle_.value(x);
  return exact_(x);
}

double SaddleRow::lipschitz_grad(double eta) const {
  if (!smoothable_) return oracle_.lipschitz_grad();
  if (!(eta > 0.0)) throw InvalidConstant("SaddleRow: smoothable row needs eta > 0 for L");
  return b_norm_ * b_norm_ / eta;
}

SaddleRow SaddleRow::shifted(double constant) const {
  SaddleRow row = *this;
  if (!smoothable_) {
    SmoothOracle base = oracle_;
    row.oracle_ = SmoothOracle(
        base.dim(),
        [base, constant](std::span<const double> x) {
          Eval e = base.eval(x);
          e.value += constant;
          return e;
        },
        base.lipschitz_grad(), base.lipschitz_val(), base.constants_estimated());
  } else {
    auto smoothed = smoothed_;
    auto exact = exact_;
    row.smoothed_ = [smoothed, constant](std::span<const double> x, double eta) {
      Eval e = smoothed(x, eta);
      e.value += constant;
      return e;
    };
    row.exact_ = [exact, constant](std::span<const double> x) { return exact(x) + constant; };
  }
  return row;
}

HingeSumOracle::HingeSumOracle(Vec slope0, double const0, std::vector<Vec> slopes, Vec offsets)
    : slope0_(std::move(slope0)),
      const0_(const0),
      slopes_(std::move(slopes)),
      offsets_(std::move(offsets)) {
  if (slopes_.size() != offsets_.size()) throw DimMismatch("HingeSumOracle: terms");
  double b2 = 0.0;
  for (const Vec& g : slopes_) {
    if (g.size() != slope0_.size()) throw DimMismatch("HingeSumOracle: slope dims");
    const double n = norm2(g);
    b2 += n * n;
  }
  b_norm_ = std::sqrt(std::max(b2, 1e-300));
  d_u_ = std::sqrt(static_cast<double>(slopes_.size()) / 2.0);
  if (d_u_ <= 0.0) d_u_ = 1.0;
}

Eval HingeSumOracle::eval(std::span<const double> x, double eta) const {
  Eval out;
  out.value = dot(slope0_, x) + const0_;
  out.grad = slope0_;
  for (std::size_t k = 0; k < slopes_.size(); ++k) {
    const double a = dot(slopes_[k], x) + offsets_[k];
    double v, d;
    if (eta > 0.0) {
      const SmoothedHinge h(eta);
      v = h.value(a);
      d = h.derivative(a);
    } else {
      v = positive_part(a);
      d = a > 0.0 ? 1.0 : 0.0;
    }
    out.value += v;
    if (d != 0.0) axpy(d, slopes_[k], out.grad);
  }
  return out;
}

double HingeSumOracle::exact_value(std::span<const double> x) const {
  double v = dot(slope0_, x) + const0_;
  for (std::size_t k = 0; k < slopes_.size(); ++k)
    v += positive_part(dot(slopes_[k], x) + offsets_[k]);
  return v;
}

double HingeSumOracle::lipschitz_val() const {
  // Affine part plus the smoothed-family gradient bound M_{B,U} = ||B|| sqrt(2) D_U.
  return norm2(slope0_) + b_norm_ * std::sqrt(2.0) * d_u_;
}

SaddleRow HingeSumOracle::as_row(double fixed_eta) const {
  auto self = std::make_shared<const HingeSumOracle>(*this);
  auto smoothed = [self, fixed_eta](std::span<const double> x, double eta) {
    if (fixed_eta > 0.0) eta = fixed_eta;
    if (fixed_eta < 0.0) eta = 0.0;
    return self->eval(x, eta);
  };
  return SaddleRow::smoothable(
      dim(), std::move(smoothed),
      [self](std::span<const double> x) { return self->exact_value(x); }, b_norm_, d_u_,
      lipschitz_val());
}

GroupMaxSumOracle::GroupMaxSumOracle(int dim, std::vector<std::vector<int>> groups, double const0)
    : dim_(dim), groups_(std::move(groups)), const0_(const0) {
  if (groups_.empty()) throw InvalidConstant("GroupMaxSumOracle: no groups");
  double du2 = 0.0;
  for (const auto& g : groups_) {
    if (g.empty()) throw InvalidConstant("GroupMaxSumOracle: empty group");
    for (int idx : g)
      if (idx < 0 || idx >= dim) throw DimMismatch("GroupMaxSumOracle: index out of range");
    du2 += std::log(std::max<std::size_t>(g.size(), 2));
  }
  d_u_ = std::sqrt(du2);
}

Eval GroupMaxSumOracle::eval(std::span<const double> x, double eta) const {
  Eval out;
  out.value = const0_;
  out.grad.assign(dim_, 0.0);
  Vec local;
  for (const auto& g : groups_) {
    local.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) local[i] = x[g[i]];
    if (eta > 0.0) {
      const SmoothedGroupMax sm(eta, static_cast<int>(g.size()));
      const Eval e = sm.eval(local);
      out.value += e.value;
      for (std::size_t i = 0; i < g.size(); ++i) out.grad[g[i]] += e.grad[i];
    } else {
      std::size_t best = 0;
      for (std::size_t i = 1; i < g.size(); ++i)
        if (local[i] > local[best]) best = i;
      out.value += local[best];
      out.grad[g[best]] += 1.0;
    }
  }
  return out;
}

double GroupMaxSumOracle::exact_value(std::span<const double> x) const {
  double v = const0_;
  for (const auto& g : groups_) {
    double m = x[g[0]];
    for (int idx : g) m = std::max(m, x[idx]);
    v += m;
  }
  return v;
}

SaddleRow GroupMaxSumOracle::as_row() const {
  auto self = std::make_shared<const GroupMaxSumOracle>(*this);
  // M bound: each group contributes a softmax gradient of l2 norm <= 1.
  const double m = std::sqrt(static_cast<double>(groups_.size()));
  return SaddleRow::smoothable(
      dim_, [self](std::span<const double> x, double eta) { return self->eval(x, eta); },
      [self](std::span<const double> x) { return self->exact_value(x); }, b_norm(), d_u_, m);
}

}  // namespace levelcg
