#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "levelcg/cgo.hpp"

namespace levelcg {

// Convex functional constrained problem min f(x) s.t. h_i(x) <= 0, x in X.
// Rows may carry structured nonsmoothness (handled by the smoothing schedule
// inside CGO).
struct ConstrainedProblem {
  SaddleRow f;
  std::vector<SaddleRow> h;
  std::shared_ptr<const FeasibleSet> x_set;
  ProxKind prox_kind = ProxKind::Entropy;

  int dim() const { return x_set->dim(); }
};

// l_1 = min over X of the linearization of f at x0 (one gradient, one LMO).
double init_level(const ConstrainedProblem& problem, std::span<const double> x0);

// Saddle problem with f_bar = 0 and h_bar = (f - l, h_1, ..., h_m); the dual
// simplex has dimension m + 1 and component 0 carries the gamma weight.
SaddleProblem build_level_subproblem(const ConstrainedProblem& problem, double level);

struct LevelBudgets {
  int max_outer = 200;
  int max_inner = 100000;      // per CGO call
  long max_inner_total = -1;   // total CGO iterations across calls; -1 = unlimited
};

enum class SolveStatus { Converged, BudgetExhausted };

struct LevelTraceRow {
  int k = 0;
  double level = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double gamma = 0.0;
  int inner_iters = 0;
};

struct EpsSolution {
  Vec x;
  double f_gap_bound = 0.0;     // final U_k
  double infeasibility = 0.0;   // ||[h(x)]_+||_inf on exact constraint values
  // Heuristic lower bound on f(x) - f* built from the final inner duals.
  std::optional<double> certificate;
  int outer_iters = 0;
  long inner_iters_total = 0;
  SolveStatus status = SolveStatus::Converged;
  double level = 0.0;   // final level estimate
  double gamma = 0.0;
  Vec z;                // final dual point on the (m+1)-simplex
  std::vector<LevelTraceRow> trace;
};

struct LevelOptions {
  std::optional<Vec> x0;
  double tau_multiplier = 1.0;
  std::function<void(const LevelTraceRow&)> trace;
  std::function<void(const CgoIterate&)> inner_trace;
};

// LCG: increasing level estimates from below, terminating at U_k <= epsilon.
EpsSolution lcg_solve(const ConstrainedProblem& problem, double epsilon, double mu,
                      const LevelBudgets& budgets = {}, const LevelOptions& options = {});

// MLCG: decreasing level estimates from a feasible start, terminating at
// L_k >= -epsilon * kappa_tilde.
EpsSolution mlcg_solve(const ConstrainedProblem& problem, Vec x0_feasible, double epsilon,
                       double mu, const LevelBudgets& budgets = {},
                       const LevelOptions& options = {});

// Lower bound on f(x) - f* using the final dual pair as a surrogate for the
// optimal multipliers: -(||z|| / gamma) * ||[h(x)]_+||. Heuristic.
double optimality_certificate(double gamma, std::span<const double> z_constraints,
                              double infeasibility_l2);

// Exact constraint values at x (positive parts are violations).
Vec constraint_values(const ConstrainedProblem& problem, std::span<const double> x);

inline constexpr double kGammaFloor = 1e-12;

}  // namespace levelcg
