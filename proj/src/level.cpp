#include "levelcg/level.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "levelcg/errors.hpp"

namespace levelcg {

namespace {

Vec default_start(const ConstrainedProblem& problem, const LevelOptions& options) {
  if (options.x0.has_value()) {
    if (static_cast<int>(options.x0->size()) != problem.dim())
      throw DimMismatch("LevelOptions::x0");
    return *options.x0;
  }
  return problem.x_set->lmo(Vec(problem.dim(), 0.0));
}

double exact_infeasibility_inf(const ConstrainedProblem& problem, std::span<const double> x) {
  double worst = 0.0;
  for (const auto& row : problem.h) worst = std::max(worst, row.exact_value(x));
  return std::max(worst, 0.0);
}

// Exact level-set merit max(f(x) - level, max_i h_i(x)), used to rank the
// per-call candidates when the run stops on a budget.
double level_merit(const ConstrainedProblem& problem, std::span<const double> x, double level) {
  double worst = problem.f.exact_value(x) - level;
  for (const auto& row : problem.h) worst = std::max(worst, row.exact_value(x));
  return worst;
}

const CgoOutput& best_candidate(const ConstrainedProblem& problem,
                                const std::vector<CgoOutput>& candidates, double level,
                                const CgoOutput& fallback) {
  const CgoOutput* best = &fallback;
  double best_merit = std::numeric_limits<double>::infinity();
  if (!fallback.x.empty()) best_merit = level_merit(problem, fallback.x, level);
  for (const auto& cand : candidates) {
    if (cand.x.empty()) continue;
    const double m = level_merit(problem, cand.x, level);
    if (m < best_merit) {
      best_merit = m;
      best = &cand;
    }
  }
  return *best;
}

EpsSolution finish(const ConstrainedProblem& problem, const CgoOutput& out, double level,
                   SolveStatus status, int outer, long inner_total,
                   std::vector<LevelTraceRow> trace) {
  EpsSolution sol;
  sol.x = out.x;
  sol.f_gap_bound = out.upper;
  sol.infeasibility = exact_infeasibility_inf(problem, sol.x);
  sol.outer_iters = outer;
  sol.inner_iters_total = inner_total;
  sol.status = status;
  sol.level = level;
  sol.gamma = out.gamma;
  sol.z = out.z;
  sol.trace = std::move(trace);
  if (!problem.h.empty() && out.gamma > kGammaFloor) {
    const Vec hv = constraint_values(problem, sol.x);
    const std::span<const double> zc(out.z.data() + 1, out.z.size() - 1);
    sol.certificate = optimality_certificate(out.gamma, zc, norm2_positive_part(hv));
  }
  return sol;
}

}  // namespace

Vec constraint_values(const ConstrainedProblem& problem, std::span<const double> x) {
  Vec out;
  out.reserve(problem.h.size());
  for (const auto& row : problem.h) out.push_back(row.exact_value(x));
  return out;
}

double init_level(const ConstrainedProblem& problem, std::span<const double> x0) {
  // Smoothable objectives are linearized at the current schedule head; the
  // smoothed surrogate underestimates f, so the result stays below f*.
  const double eta = problem.f.is_smoothable()
                         ? eta_schedule(1, problem.f.b_norm(),
                                        problem.x_set->diameter(), problem.f.d_u())
                         : 0.0;
  const AffineMinorant lin = linearize(problem.f.eval(x0, eta), x0);
  const Vec vertex = problem.x_set->lmo(lin.slope);
  return lin.value(vertex);
}

SaddleProblem build_level_subproblem(const ConstrainedProblem& problem, double level) {
  std::vector<SaddleRow> rows;
  rows.reserve(problem.h.size() + 1);
  rows.push_back(problem.f.shifted(-level));
  for (const auto& row : problem.h) rows.push_back(row);
  return make_saddle_problem(SaddleRow::smooth(SmoothOracle::zero(problem.dim())),
                             std::move(rows), problem.x_set, problem.prox_kind);
}

double optimality_certificate(double gamma, std::span<const double> z_constraints,
                              double infeasibility_l2) {
  if (!(gamma > kGammaFloor)) throw GammaDegenerate("certificate: gamma below floor");
  return -(norm2(z_constraints) / gamma) * infeasibility_l2;
}

EpsSolution lcg_solve(const ConstrainedProblem& problem, double epsilon, double mu,
                      const LevelBudgets& budgets, const LevelOptions& options) {
  if (!(epsilon > 0.0)) throw InvalidConstant("lcg_solve: epsilon must be positive");
  if (!(mu > 0.5 && mu < 1.0)) throw InvalidConstant("lcg_solve: mu must lie in (1/2, 1)");

  Vec start = default_start(problem, options);
  double level = init_level(problem, start);

  std::vector<LevelTraceRow> trace;
  std::vector<CgoOutput> candidates;
  CgoOutput last;
  last.x = start;  // fallback when no inner call ever runs
  long inner_total = 0;
  for (int k = 1; k <= budgets.max_outer; ++k) {
    int inner_cap = budgets.max_inner;
    if (budgets.max_inner_total >= 0)
      inner_cap = static_cast<int>(
          std::min<long>(inner_cap, budgets.max_inner_total - inner_total));
    if (inner_cap < 1)
      return finish(problem, best_candidate(problem, candidates, level, last), level,
                    SolveStatus::BudgetExhausted, k - 1, inner_total, std::move(trace));

    const SaddleProblem sub = build_level_subproblem(problem, level);
    CgoOptions copt;
    copt.epsilon = epsilon;
    copt.mu = mu;
    copt.max_iter = inner_cap;
    copt.tau_multiplier = options.tau_multiplier;
    copt.trace = options.inner_trace;
    // Each CGO call warm-starts at the running iterate.
    last = cgo_solve_nonsmooth(sub, copt, start);
    inner_total += last.iterations;
    start = last.x;
    candidates.push_back(last);

    const LevelTraceRow row{k, level, last.lower, last.upper, last.gamma, last.iterations};
    trace.push_back(row);
    if (options.trace) options.trace(row);

    if (last.upper <= epsilon)
      return finish(problem, last, level, SolveStatus::Converged, k, inner_total,
                    std::move(trace));
    if (last.truncated && last.lower <= 0.0)
      return finish(problem, best_candidate(problem, candidates, level, last), level,
                    SolveStatus::BudgetExhausted, k, inner_total, std::move(trace));
    if (last.gamma <= kGammaFloor)
      throw GammaDegenerate("lcg_solve: gamma below floor with positive lower bound");
    level += last.lower / last.gamma;
  }
  return finish(problem, best_candidate(problem, candidates, level, last), level,
                SolveStatus::BudgetExhausted, budgets.max_outer, inner_total,
                std::move(trace));
}

EpsSolution mlcg_solve(const ConstrainedProblem& problem, Vec x0_feasible, double epsilon,
                       double mu, const LevelBudgets& budgets, const LevelOptions& options) {
  if (!(epsilon > 0.0)) throw InvalidConstant("mlcg_solve: epsilon must be positive");
  if (!(mu > 0.0 && mu < 1.0)) throw InvalidConstant("mlcg_solve: mu must lie in (0, 1)");
  if (static_cast<int>(x0_feasible.size()) != problem.dim())
    throw DimMismatch("mlcg_solve: x0");
  if (exact_infeasibility_inf(problem, x0_feasible) > 0.0)
    throw InfeasibleStart("mlcg_solve: x0 violates a constraint");

  const double l1 = problem.f.exact_value(x0_feasible);
  const double f_tilde = init_level(problem, x0_feasible);
  const double denom = l1 - f_tilde;  // >= 0 since f_tilde underestimates f*

  Vec start = x0_feasible;
  double level = l1;
  double kappa = 0.0;  // fixed after the first outer iteration
  std::vector<LevelTraceRow> trace;
  std::vector<CgoOutput> candidates;
  CgoOutput last;
  last.x = start;
  long inner_total = 0;
  for (int k = 1; k <= budgets.max_outer; ++k) {
    int inner_cap = budgets.max_inner;
    if (budgets.max_inner_total >= 0)
      inner_cap = static_cast<int>(
          std::min<long>(inner_cap, budgets.max_inner_total - inner_total));
    if (inner_cap < 1)
      return finish(problem, best_candidate(problem, candidates, level, last), level,
                    SolveStatus::BudgetExhausted, k - 1, inner_total, std::move(trace));

    const SaddleProblem sub = build_level_subproblem(problem, level);
    CgoOptions copt;
    copt.max_iter = inner_cap;
    copt.tau_multiplier = options.tau_multiplier;
    copt.trace = options.inner_trace;
    if (k == 1) {
      // kappa_tilde is read off the running upper bound; the eps^2 branch
      // covers the degenerate l_1 = f* case where U stays nonnegative.
      copt.stop_override = [&](int, double lower, double upper) {
        const double gap = upper - lower;
        if (upper < 0.0 && denom > 0.0 && gap * denom <= (1.0 - mu) * epsilon * (-upper))
          return true;
        return gap <= (1.0 - mu) * epsilon * epsilon;
      };
    } else {
      const double tol = (1.0 - mu) * kappa * epsilon;
      copt.stop_override = [tol](int, double lower, double upper) {
        return upper - lower <= tol;
      };
    }
    last = cgo_solve_nonsmooth(sub, copt, start);
    inner_total += last.iterations;
    start = last.x;
    candidates.push_back(last);

    if (k == 1) kappa = (last.upper < 0.0 && denom > 0.0) ? -last.upper / denom : epsilon;

    const LevelTraceRow row{k, level, last.lower, last.upper, last.gamma, last.iterations};
    trace.push_back(row);
    if (options.trace) options.trace(row);

    if (last.lower >= -epsilon * kappa)
      return finish(problem, last, level, SolveStatus::Converged, k, inner_total,
                    std::move(trace));
    if (last.truncated)
      return finish(problem, best_candidate(problem, candidates, level, last), level,
                    SolveStatus::BudgetExhausted, k, inner_total, std::move(trace));
    level += last.upper;
  }
  return finish(problem, best_candidate(problem, candidates, level, last), level,
                SolveStatus::BudgetExhausted, budgets.max_outer, inner_total,
                std::move(trace));
}

}  // namespace levelcg
