#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "levelcg/level.hpp"

namespace levelcg {

// min f(x) s.t. h_i(x) <= 0, x in X, with nonconvex smooth f obeying the lower
// curvature bound f(x) - f(y) - <grad f(y), x - y> >= -(lower_curvature/2) ||x-y||^2
// and convex h rows (smooth or smoothable).
struct NonconvexProblem {
  SmoothOracle f;
  double lower_curvature = 0.0;  // underline L_f
  std::vector<SaddleRow> h;
  std::shared_ptr<const FeasibleSet> x_set;
  ProxKind prox_kind = ProxKind::Entropy;

  int dim() const { return x_set->dim(); }
  // ||M_h|| over the constraint rows.
  double m_h_norm() const;
};

// Convex proximal subproblem min f(x) + lower_curvature * ||x - center||^2 s.t. h <= 0.
ConstrainedProblem build_prox_subproblem(const NonconvexProblem& problem,
                                         std::span<const double> center);

// Smoothed Lagrangian F(x) = f(x) + <y(x), h(x)> - (c/2)||y(x)||^2 with the
// closed-form multipliers y(x) = max(h(x)/c, 0). Nonsmooth rows are evaluated
// at the fixed per-row smoothing levels in `eta`.
class SmoothedLagrangian {
 public:
  SmoothedLagrangian(const NonconvexProblem& problem, double c, Vec eta = {});
  Eval eval(std::span<const double> x) const;
  Vec multipliers(std::span<const double> x) const;
  double smoothness() const;  // L_c = L_f + ||M_h|| ||L_h|| D_X / c + ||M_h||^2 / c
  double c() const { return c_; }
  const NonconvexProblem& problem() const { return *problem_; }
  const Vec& eta() const { return eta_; }

 private:
  const NonconvexProblem* problem_;
  double c_;
  Vec eta_;
};

// Q(x) = <grad F(x), x> - min over X of <grad F(x), .> via one LMO call.
double wolfe_gap(const SmoothedLagrangian& lagrangian, std::span<const double> x);
double wolfe_gap(const NonconvexProblem& problem, std::span<const double> x,
                 std::span<const double> y);

struct KktReport {
  double complementarity = 0.0;      // sum |y_i h_i(x)|
  // Wolfe gap of grad f + sum y_i grad h_i; surrogate for the squared distance
  // to -N_X(x), related through Q(x)^2 <= eps D_X^2.
  double stationarity_wolfe = 0.0;
  double infeasibility = 0.0;        // ||[h(x)]_+||_2
};

KktReport kkt_measures(const NonconvexProblem& problem, std::span<const double> x,
                       std::span<const double> y);

struct DncgTraceRow {
  int k = 0;
  double wolfe_gap = 0.0;
  double violation_sq = 0.0;  // ||[h(x)]_+||^2 on exact values
  double f_value = 0.0;
};

struct DncgOptions {
  std::optional<Vec> x0;
  std::optional<double> c;       // default K^(-1/4)
  std::optional<double> alpha;   // default K^(-1/2)
  // Anytime mode uses alpha_k = 1/sqrt(k), c_k = 1/k^(1/4); it does not match
  // the fixed-horizon schedule the rate statement assumes.
  bool anytime = false;
  std::function<void(const DncgTraceRow&)> trace;
};

struct DncgResult {
  Vec x_best;              // argmin of the Wolfe gap over visited iterates
  double wolfe_gap = 0.0;  // Q(x_best)
  double violation_sq = 0.0;
  Vec x_final;
  double c = 0.0;
  double alpha = 0.0;
  std::vector<DncgTraceRow> trace;
};

DncgResult dncg(const NonconvexProblem& problem, int horizon, const DncgOptions& options = {});

struct IppStep {
  int j = 0;
  Vec x;
  double decrease = 0.0;  // f(x_{j-1}) - f(x_j)
  KktReport kkt;
  SolveStatus status = SolveStatus::Converged;
  long inner_iters = 0;
};

struct IppOptions {
  std::optional<Vec> x0;
  // Strictly feasible point for the dual bound B of the KKT certificate.
  std::optional<Vec> slater_point;
  LevelBudgets budgets;
  double tau_multiplier = 1.0;
  std::function<void(const IppStep&)> trace;
};

struct IppResult {
  Vec x_best;
  int j_best = 0;
  std::vector<IppStep> steps;
  long inner_iters_total = 0;
  // Certificate quantities evaluated with the run's constants; B needs a
  // Slater point (and uses the best observed objective as the f* surrogate).
  bool b_available = false;
  double b_value = 0.0;
  double eps_proximity = 0.0;     // (2/lower_curvature)(delta_f + B delta_h)
  double eps_stationarity = 0.0;  // (8 lower_curvature/J)[f(x_0)-f(x_J)] + delta_f + B delta_h
};

IppResult ipp_lcg(const NonconvexProblem& problem, int outer_count, double delta_f,
                  double delta_h, double mu, const IppOptions& options = {});

}  // namespace levelcg
