#include "levelcg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "levelcg/errors.hpp"

namespace levelcg {

ScaledSimplexLeq::ScaledSimplexLeq(int dim, double radius) : dim_(dim), radius_(radius) {
  if (dim < 1) throw InvalidConstant("ScaledSimplexLeq: dim must be positive");
  if (!(radius >= 0.0)) throw InvalidConstant("ScaledSimplexLeq: radius must be nonnegative");
}

Vec ScaledSimplexLeq::lmo(std::span<const double> cost) const {
  if (static_cast<int>(cost.size()) != dim_) throw DimMismatch("ScaledSimplexLeq::lmo");
  require_finite(cost, "cost");
  Vec out(dim_, 0.0);
  int best = -1;
  double best_cost = 0.0;
  for (int i = 0; i < dim_; ++i) {
    if (cost[i] < best_cost) {
      best_cost = cost[i];
      best = i;
    }
  }
  // best == -1 means no vertex beats the origin.
  if (best >= 0) out[best] = radius_;
  return out;
}

double ScaledSimplexLeq::diameter() const {
  return dim_ >= 2 ? radius_ * std::sqrt(2.0) : radius_;
}

bool ScaledSimplexLeq::contains(std::span<const double> x, double tol) const {
  if (static_cast<int>(x.size()) != dim_) return false;
  double sum = 0.0;
  for (double v : x) {
    if (v < -tol) return false;
    sum += v;
  }
  return sum <= radius_ + tol;
}

void ScaledSimplexLeq::bounding_box(Vec& lo, Vec& hi) const {
  lo.assign(dim_, 0.0);
  hi.assign(dim_, radius_);
}

StandardSimplex::StandardSimplex(int dim) : dim_(dim) {
  if (dim < 1) throw InvalidConstant("StandardSimplex: dim must be positive");
}

Vec StandardSimplex::lmo(std::span<const double> cost) const {
  if (static_cast<int>(cost.size()) != dim_) throw DimMismatch("StandardSimplex::lmo");
  require_finite(cost, "cost");
  int best = 0;
  for (int i = 1; i < dim_; ++i)
    if (cost[i] < cost[best]) best = i;
  Vec out(dim_, 0.0);
  out[best] = 1.0;
  return out;
}

double StandardSimplex::diameter() const { return dim_ >= 2 ? std::sqrt(2.0) : 0.0; }

bool StandardSimplex::contains(std::span<const double> x, double tol) const {
  if (static_cast<int>(x.size()) != dim_) return false;
  double sum = 0.0;
  for (double v : x) {
    if (v < -tol) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

void StandardSimplex::bounding_box(Vec& lo, Vec& hi) const {
  lo.assign(dim_, 0.0);
  hi.assign(dim_, 1.0);
}

Box::Box(Vec lower, Vec upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() != upper_.size() || lower_.empty()) throw DimMismatch("Box: bad bounds");
  for (std::size_t i = 0; i < lower_.size(); ++i) {
    if (!std::isfinite(lower_[i]) || !std::isfinite(upper_[i]))
      throw NonFiniteInput("Box bounds");
    if (lower_[i] > upper_[i]) throw InvalidConstant("Box: lower > upper");
  }
}

Vec Box::lmo(std::span<const double> cost) const {
  if (cost.size() != lower_.size()) throw DimMismatch("Box::lmo");
  require_finite(cost, "cost");
  Vec out(lower_.size());
  // cost == 0 picks the lower bound so runs stay bit-reproducible.
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = cost[i] > 0.0 ? lower_[i] : upper_[i];
  for (std::size_t i = 0; i < out.size(); ++i)
    if (cost[i] == 0.0) out[i] = lower_[i];
  return out;
}

double Box::diameter() const {
  double s = 0.0;
  for (std::size_t i = 0; i < lower_.size(); ++i) {
    const double d = upper_[i] - lower_[i];
    s += d * d;
  }
  return std::sqrt(s);
}

bool Box::contains(std::span<const double> x, double tol) const {
  if (x.size() != lower_.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] < lower_[i] - tol || x[i] > upper_[i] + tol) return false;
  return true;
}

void Box::bounding_box(Vec& lo, Vec& hi) const {
  lo = lower_;
  hi = upper_;
}

ProductSet::ProductSet(std::vector<std::shared_ptr<const FeasibleSet>> factors)
    : factors_(std::move(factors)), dim_(0) {
  if (factors_.empty()) throw InvalidConstant("ProductSet: no factors");
  for (const auto& f : factors_) dim_ += f->dim();
}

Vec ProductSet::lmo(std::span<const double> cost) const {
  if (static_cast<int>(cost.size()) != dim_) throw DimMismatch("ProductSet::lmo");
  Vec out;
  out.reserve(dim_);
  std::size_t offset = 0;
  for (const auto& f : factors_) {
    const Vec part = f->lmo(cost.subspan(offset, f->dim()));
    out.insert(out.end(), part.begin(), part.end());
    offset += f->dim();
  }
  return out;
}

double ProductSet::diameter() const {
  double s = 0.0;
  for (const auto& f : factors_) {
    const double d = f->diameter();
    s += d * d;
  }
  return std::sqrt(s);
}

bool ProductSet::contains(std::span<const double> x, double tol) const {
  if (static_cast<int>(x.size()) != dim_) return false;
  std::size_t offset = 0;
  for (const auto& f : factors_) {
    if (!f->contains(x.subspan(offset, f->dim()), tol)) return false;
    offset += f->dim();
  }
  return true;
}

void ProductSet::bounding_box(Vec& lo, Vec& hi) const {
  lo.clear();
  hi.clear();
  Vec flo, fhi;
  for (const auto& f : factors_) {
    f->bounding_box(flo, fhi);
    lo.insert(lo.end(), flo.begin(), flo.end());
    hi.insert(hi.end(), fhi.begin(), fhi.end());
  }
}

Vec lmo_scaled_simplex(std::span<const double> cost, double radius) {
  return ScaledSimplexLeq(static_cast<int>(cost.size()), radius).lmo(cost);
}

Vec lmo_box(std::span<const double> cost, const Box& box) { return box.lmo(cost); }

Vec lmo_product(std::span<const double> cost, const ProductSet& set) { return set.lmo(cost); }

SimplexProx::SimplexProx(ProxKind kind, int dim) : kind_(kind), dim_(dim) {
  if (dim < 1) throw InvalidConstant("SimplexProx: dim must be positive");
}

Vec SimplexProx::uniform() const { return Vec(dim_, 1.0 / dim_); }

double SimplexProx::v_bar() const {
  return kind_ == ProxKind::Entropy ? std::log(std::max(2.0, double(dim_))) : dim_ / 2.0;
}

Vec project_simplex(std::span<const double> v) {
  const int n = static_cast<int>(v.size());
  Vec sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double cumsum = 0.0;
  double theta = 0.0;
  int rho = 0;
  for (int j = 0; j < n; ++j) {
    cumsum += sorted[j];
    const double candidate = (cumsum - 1.0) / (j + 1);
    if (sorted[j] - candidate > 0.0) {
      rho = j + 1;
      theta = candidate;
    }
  }
  (void)rho;
  Vec out(n);
  for (int i = 0; i < n; ++i) out[i] = std::max(v[i] - theta, 0.0);
  return out;
}

Vec SimplexProx::apply(std::span<const double> r_prev, std::span<const double> gain,
                       double tau) const {
  if (static_cast<int>(r_prev.size()) != dim_ || static_cast<int>(gain.size()) != dim_)
    throw DimMismatch("SimplexProx::apply");
  if (!(tau > 0.0)) throw InvalidConstant("SimplexProx: tau must be positive");
  require_finite(r_prev, "r_prev");
  require_finite(gain, "gain");
  if (dim_ == 1) return Vec{1.0};

  if (kind_ == ProxKind::Euclidean) {
    Vec shifted(dim_);
    for (int i = 0; i < dim_; ++i) shifted[i] = r_prev[i] + gain[i] / tau;
    return project_simplex(shifted);
  }

  // Entropy: r_i proportional to r_prev_i * exp(gain_i / tau), in log domain
  // with max subtraction so gains up to ~1e4 stay finite.
  Vec logw(dim_);
  double max_log = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < dim_; ++i) {
    if (r_prev[i] <= 0.0) throw DegenerateDual("entropy prox requires strictly positive r_prev");
    logw[i] = std::log(r_prev[i]) + gain[i] / tau;
    max_log = std::max(max_log, logw[i]);
  }
  Vec out(dim_);
  double sum = 0.0;
  for (int i = 0; i < dim_; ++i) {
    out[i] = std::exp(logw[i] - max_log);
    sum += out[i];
  }
  for (int i = 0; i < dim_; ++i) {
    out[i] /= sum;
    if (out[i] < 1e-300) out[i] = 1e-300;
  }
  double renorm = std::accumulate(out.begin(), out.end(), 0.0);
  for (int i = 0; i < dim_; ++i) out[i] /= renorm;
  return out;
}

Vec prox_simplex(const SimplexProx& prox, std::span<const double> r_prev,
                 std::span<const double> gain, double tau) {
  return prox.apply(r_prev, gain, tau);
}

}  // namespace levelcg
