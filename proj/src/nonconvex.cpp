#include "levelcg/nonconvex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "levelcg/errors.hpp"

namespace levelcg {

double NonconvexProblem::m_h_norm() const {
  double s = 0.0;
  for (const auto& row : h) s += row.lipschitz_val() * row.lipschitz_val();
  return std::sqrt(s);
}

ConstrainedProblem build_prox_subproblem(const NonconvexProblem& problem,
                                         std::span<const double> center) {
  if (!problem.x_set->contains(center, 1e-9))
    throw InvalidConstant("build_prox_subproblem: center not in X");
  const SmoothOracle f = problem.f;
  const double curv = problem.lower_curvature;
  const Vec c(center.begin(), center.end());
  const double d_x = problem.x_set->diameter();
  SmoothOracle prox_obj(
      problem.dim(),
      [f, curv, c](std::span<const double> x) {
        Eval e = f.eval(x);
        for (std::size_t i = 0; i < c.size(); ++i) {
          const double d = x[i] - c[i];
          e.value += curv * d * d;
          e.grad[i] += 2.0 * curv * d;
        }
        return e;
      },
      f.lipschitz_grad() + 2.0 * curv, f.lipschitz_val() + 2.0 * curv * d_x,
      f.constants_estimated());

  ConstrainedProblem sub;
  sub.f = SaddleRow::smooth(std::move(prox_obj));
  sub.h = problem.h;
  sub.x_set = problem.x_set;
  sub.prox_kind = problem.prox_kind;
  return sub;
}

SmoothedLagrangian::SmoothedLagrangian(const NonconvexProblem& problem, double c, Vec eta)
    : problem_(&problem), c_(c), eta_(std::move(eta)) {
  if (!(c > 0.0)) throw InvalidConstant("SmoothedLagrangian: c must be positive");
  if (eta_.empty()) eta_.assign(problem.h.size(), 0.0);
  if (eta_.size() != problem.h.size()) throw DimMismatch("SmoothedLagrangian: eta size");
}

Eval SmoothedLagrangian::eval(std::span<const double> x) const {
  Eval out = problem_->f.eval(x);
  for (std::size_t i = 0; i < problem_->h.size(); ++i) {
    const Eval he = problem_->h[i].eval(x, eta_[i]);
    const double y = std::max(he.value / c_, 0.0);
    if (y > 0.0) {
      out.value += y * he.value - 0.5 * c_ * y * y;
      axpy(y, he.grad, out.grad);
    }
  }
  return out;
}

Vec SmoothedLagrangian::multipliers(std::span<const double> x) const {
  Vec y(problem_->h.size());
  for (std::size_t i = 0; i < problem_->h.size(); ++i)
    y[i] = std::max(problem_->h[i].eval(x, eta_[i]).value / c_, 0.0);
  return y;
}

double SmoothedLagrangian::smoothness() const {
  const double m_h = problem_->m_h_norm();
  double l2 = 0.0;
  for (std::size_t i = 0; i < problem_->h.size(); ++i) {
    const double li = problem_->h[i].is_smoothable() ? problem_->h[i].lipschitz_grad(eta_[i])
                                                     : problem_->h[i].lipschitz_grad(0.0);
    l2 += li * li;
  }
  const double d_x = problem_->x_set->diameter();
  return problem_->f.lipschitz_grad() + m_h * std::sqrt(l2) * d_x / c_ + m_h * m_h / c_;
}

double wolfe_gap(const SmoothedLagrangian& lagrangian, std::span<const double> x) {
  const Eval e = lagrangian.eval(x);
  const Vec p = lagrangian.problem().x_set->lmo(e.grad);
  double q = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) q += e.grad[i] * (x[i] - p[i]);
  return q;
}

double wolfe_gap(const NonconvexProblem& problem, std::span<const double> x,
                 std::span<const double> y) {
  if (y.size() != problem.h.size()) throw DimMismatch("wolfe_gap: multiplier size");
  Eval e = problem.f.eval(x);
  for (std::size_t i = 0; i < problem.h.size(); ++i)
    if (y[i] != 0.0) axpy(y[i], problem.h[i].eval(x, 0.0).grad, e.grad);
  const Vec p = problem.x_set->lmo(e.grad);
  double q = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) q += e.grad[i] * (x[i] - p[i]);
  return q;
}

KktReport kkt_measures(const NonconvexProblem& problem, std::span<const double> x,
                       std::span<const double> y) {
  if (y.size() != problem.h.size()) throw DimMismatch("kkt_measures: multiplier size");
  for (double v : y)
    if (v < 0.0) throw InvalidConstant("kkt_measures: multipliers must be nonnegative");
  KktReport r;
  Vec hv(problem.h.size());
  for (std::size_t i = 0; i < problem.h.size(); ++i) {
    hv[i] = problem.h[i].exact_value(x);
    r.complementarity += std::abs(y[i] * hv[i]);
  }
  r.stationarity_wolfe = wolfe_gap(problem, x, y);
  r.infeasibility = norm2_positive_part(hv);
  return r;
}

DncgResult dncg(const NonconvexProblem& problem, int horizon, const DncgOptions& options) {
  if (horizon < 1) throw InvalidConstant("dncg: horizon must be >= 1");
  const double k_d = static_cast<double>(horizon);
  const double c_fixed = options.c.value_or(1.0 / std::pow(k_d, 0.25));
  const double alpha_fixed = options.alpha.value_or(1.0 / std::sqrt(k_d));

  // Nonsmooth rows run at eta_i = ||M_h|| D_X^3 / K^(1/8), fixed over the run.
  const double d_x = problem.x_set->diameter();
  Vec eta(problem.h.size(), 0.0);
  const double m_h = problem.m_h_norm();
  for (std::size_t i = 0; i < problem.h.size(); ++i)
    if (problem.h[i].is_smoothable())
      eta[i] = std::max(m_h, 1e-12) * std::pow(d_x, 3) / std::pow(k_d, 0.125);

  Vec x = options.x0.value_or(problem.x_set->lmo(Vec(problem.dim(), 0.0)));
  if (static_cast<int>(x.size()) != problem.dim()) throw DimMismatch("dncg: x0");
  require_finite(x, "x0");

  DncgResult result;
  result.c = c_fixed;
  result.alpha = alpha_fixed;
  double best_gap = std::numeric_limits<double>::infinity();

  for (int k = 1; k <= horizon; ++k) {
    const double c_k = options.anytime ? 1.0 / std::pow(static_cast<double>(k), 0.25) : c_fixed;
    const double alpha_k =
        options.anytime ? 1.0 / std::sqrt(static_cast<double>(k)) : alpha_fixed;
    const SmoothedLagrangian lagr(problem, c_k, eta);

    const Eval e = lagr.eval(x);
    require_finite(e.grad, "grad F");
    const Vec p = problem.x_set->lmo(e.grad);
    double q = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) q += e.grad[i] * (x[i] - p[i]);

    const Vec hv = [&] {
      Vec v(problem.h.size());
      for (std::size_t i = 0; i < problem.h.size(); ++i) v[i] = problem.h[i].exact_value(x);
      return v;
    }();
    const double viol = norm2_positive_part(hv);
    const DncgTraceRow row{k, q, viol * viol, problem.f.value(x)};
    result.trace.push_back(row);
    if (options.trace) options.trace(row);

    // x_hat = argmin of Q over the visited iterates x_0 .. x_{K-1}.
    if (q < best_gap) {
      best_gap = q;
      result.x_best = x;
      result.wolfe_gap = q;
      result.violation_sq = viol * viol;
    }

    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = (1.0 - alpha_k) * x[i] + alpha_k * p[i];
  }
  result.x_final = std::move(x);
  return result;
}

IppResult ipp_lcg(const NonconvexProblem& problem, int outer_count, double delta_f,
                  double delta_h, double mu, const IppOptions& options) {
  if (outer_count < 1) throw InvalidConstant("ipp_lcg: outer count must be >= 1");
  if (!(delta_f > 0.0) || !(delta_h > 0.0))
    throw InvalidConstant("ipp_lcg: tolerances must be positive");
  if (!(problem.lower_curvature > 0.0))
    throw InvalidConstant("ipp_lcg: lower curvature constant must be positive");

  Vec x_prev = options.x0.value_or(problem.x_set->lmo(Vec(problem.dim(), 0.0)));
  if (static_cast<int>(x_prev.size()) != problem.dim()) throw DimMismatch("ipp_lcg: x0");

  const double eps_sub = std::min(delta_f, delta_h);
  IppResult result;
  double f_prev = problem.f.value(x_prev);
  const double f_first = f_prev;
  double f_best_seen = f_prev;

  for (int j = 1; j <= outer_count; ++j) {
    // max_inner_total is a budget over the whole run, shared by the sub-solves.
    LevelBudgets budgets = options.budgets;
    if (budgets.max_inner_total >= 0) {
      budgets.max_inner_total -= result.inner_iters_total;
      if (budgets.max_inner_total < 1) break;
    }
    const ConstrainedProblem sub = build_prox_subproblem(problem, x_prev);
    LevelOptions lopt;
    lopt.x0 = x_prev;
    lopt.tau_multiplier = options.tau_multiplier;
    const EpsSolution sol = lcg_solve(sub, eps_sub, mu, budgets, lopt);

    IppStep step;
    step.j = j;
    step.x = sol.x;
    const double f_now = problem.f.value(sol.x);
    step.decrease = f_prev - f_now;
    step.status = sol.status;
    step.inner_iters = sol.inner_iters_total;
    // Multiplier surrogate from the final level-subproblem duals.
    Vec y(problem.h.size(), 0.0);
    if (!problem.h.empty() && sol.gamma > kGammaFloor)
      for (std::size_t i = 0; i < problem.h.size(); ++i) y[i] = sol.z[i + 1] / sol.gamma;
    step.kkt = kkt_measures(problem, step.x, y);
    result.steps.push_back(step);
    result.inner_iters_total += sol.inner_iters_total;
    if (options.trace) options.trace(step);

    f_best_seen = std::min(f_best_seen, f_now);
    x_prev = sol.x;
    f_prev = f_now;
  }

  if (result.steps.empty()) {
    result.j_best = 0;
    result.x_best = x_prev;
  } else {
    int j_best = 0;
    for (std::size_t j = 1; j < result.steps.size(); ++j)
      if (result.steps[j].decrease < result.steps[j_best].decrease)
        j_best = static_cast<int>(j);
    result.j_best = j_best + 1;
    result.x_best = result.steps[j_best].x;
  }

  double b = 0.0;
  if (options.slater_point.has_value()) {
    const Vec& s = *options.slater_point;
    double margin = std::numeric_limits<double>::infinity();
    for (const auto& row : problem.h) margin = std::min(margin, -row.exact_value(s));
    if (problem.h.empty()) margin = std::numeric_limits<double>::infinity();
    if (margin > 0.0 && std::isfinite(margin)) {
      const double d_x = problem.x_set->diameter();
      // f* replaced by the best objective value seen along the run.
      b = (problem.f.value(s) - f_best_seen +
           problem.lower_curvature * d_x * d_x / 2.0) /
          margin;
      result.b_available = true;
      result.b_value = b;
    }
  }
  const double combined = delta_f + b * delta_h;
  result.eps_proximity = 2.0 / problem.lower_curvature * combined;
  result.eps_stationarity =
      8.0 * problem.lower_curvature / outer_count * (f_first - f_prev) + combined;
  return result;
}

}  // namespace levelcg
