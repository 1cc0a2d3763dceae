#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "levelcg/vec.hpp"

namespace levelcg {

struct Eval {
  double value = 0.0;
  Vec grad;
};

// Differentiable function handle with declared Lipschitz constants:
// lipschitz_grad (L, smoothness of the gradient) and lipschitz_val (M, bound
// on the gradient norm over the feasible set). Immutable and shareable.
class SmoothOracle {
 public:
  using EvalFn = std::function<Eval(std::span<const double>)>;

  SmoothOracle() = default;
  SmoothOracle(int dim, EvalFn fn, double lipschitz_grad, double lipschitz_val,
               bool constants_estimated = false);

  static SmoothOracle zero(int dim);
  static SmoothOracle affine(Vec slope, double intercept);
  // Constants estimated by sampling gradient ratios over random pairs inside
  // [lo, hi]^dim; results are tagged as estimated in reports.
  static SmoothOracle with_estimated_constants(int dim, EvalFn fn, double lo, double hi,
                                               std::uint64_t seed = 17);

  Eval eval(std::span<const double> x) const;
  double value(std::span<const double> x) const { return eval(x).value; }
  int dim() const { return dim_; }
  double lipschitz_grad() const { return lipschitz_grad_; }
  double lipschitz_val() const { return lipschitz_val_; }
  bool constants_estimated() const { return estimated_; }
  bool valid() const { return static_cast<bool>(fn_); }

 private:
  int dim_ = 0;
  EvalFn fn_;
  double lipschitz_grad_ = 0.0;
  double lipschitz_val_ = 0.0;
  bool estimated_ = false;
};

// Affine global under-estimator <slope, x> + intercept.
struct AffineMinorant {
  Vec slope;
  double intercept = 0.0;

  double value(std::span<const double> x) const { return dot(slope, x) + intercept; }
};

AffineMinorant linearize(const SmoothOracle& oracle, std::span<const double> anchor);
AffineMinorant linearize(const Eval& at_anchor, std::span<const double> anchor);
AffineMinorant combine_minorant(const AffineMinorant& prev, const AffineMinorant& next,
                                double alpha);

// Nesterov smoothing of [a]_+ over y in [0,1] with prox term eta*y^2/2:
//   value_eta(a) = 0 for a <= 0, a^2/(2 eta) for 0 < a < eta, a - eta/2 otherwise.
// Sandwich: value_eta(a) <= [a]_+ <= value_eta(a) + eta/2.
struct SmoothedHinge {
  double eta;
  explicit SmoothedHinge(double eta);
  double value(double a) const;
  double derivative(double a) const;
};

std::pair<double, double> smoothed_hinge_eval(double eta, double a);

// Entropy smoothing of max_i v_i over the simplex:
//   value_eta(v) = eta * log((1/n) sum exp(v_i/eta)), gradient = softmax(v/eta).
// Sandwich: value_eta(v) <= max_i v_i <= value_eta(v) + eta*log(n).
struct SmoothedGroupMax {
  double eta;
  int group_size;
  SmoothedGroupMax(double eta, int group_size);
  double value(std::span<const double> v) const;
  Eval eval(std::span<const double> v) const;
};

std::pair<double, Vec> smoothed_groupmax_eval(double eta, std::span<const double> v);

// Sigmoid step-function surrogate 1/(1 + exp(-a/theta)).
struct SigmoidIndicator {
  double theta;
  explicit SigmoidIndicator(double theta);
  double value(double a) const;
  double derivative(double a) const;
  // Bounds used when deriving oracle constants: sup |sigma'| and sup |sigma''|.
  static constexpr double kMaxSlope = 0.25;
  static constexpr double kMaxCurvature = 0.09622504486493763;  // 1/(6 sqrt(3))
};

// Adaptive smoothing schedule eta_i^t = ||B_i|| D_X / (sqrt(t) D_U).
double eta_schedule(int t, double b_norm, double d_x, double d_u);

// Max relative error between analytic gradients and central differences
// (step 1e-5) over the sample points.
double fd_check(const SmoothOracle& oracle, const std::vector<Vec>& points);

// One component of the max-structure in a saddle problem. A smooth row
// evaluates its oracle directly and ignores eta. A smoothable row evaluates an
// eta-smoothed surrogate (eta = 0 selects the exact value with a fixed
// subgradient) and carries the (||B||, D_U) constants that feed eta_schedule.
class SaddleRow {
 public:
  using SmoothedFn = std::function<Eval(std::span<const double>, double)>;
  using ExactFn = std::function<double(std::span<const double>)>;

  SaddleRow() = default;  // empty row; assign before use
  static SaddleRow smooth(SmoothOracle oracle);
  static SaddleRow smoothable(int dim, SmoothedFn smoothed, ExactFn exact, double b_norm,
                              double d_u, double lipschitz_val);

  Eval eval(std::span<const double> x, double eta) const;
  double exact_value(std::span<const double> x) const;
  bool is_smoothable() const { return smoothable_; }
  int dim() const { return dim_; }
  double b_norm() const { return b_norm_; }
  double d_u() const { return d_u_; }
  // M bound: for smoothable rows this is the M_{B,U} bound of the smoothed family.
  double lipschitz_val() const { return lipschitz_val_; }
  // L at smoothing level eta (||B||^2/eta for smoothable rows).
  double lipschitz_grad(double eta) const;
  const SmoothOracle& smooth_oracle() const { return oracle_; }
  bool constants_estimated() const { return oracle_.valid() && oracle_.constants_estimated(); }

  // Adds a constant to the row (used to shift the objective row by -l).
  SaddleRow shifted(double constant) const;

 private:
  bool smoothable_ = false;
  int dim_ = 0;
  SmoothOracle oracle_;
  SmoothedFn smoothed_;
  ExactFn exact_;
  double b_norm_ = 0.0;
  double d_u_ = 0.0;
  double lipschitz_val_ = 0.0;
};

// Sum of hinge terms with an affine carrier:
//   value(x) = <slope0, x> + const0 + sum_k [ <g_k, x> + b_k ]_+ ,
// smoothed per term through SmoothedHinge. Covers CVaR objectives and rows as
// well as the cardinality surrogate. The (||B||, D_U) constants use the
// Euclidean prox on [0,1]^K: ||B|| = sqrt(sum ||g_k||^2), D_U = sqrt(K/2).
class HingeSumOracle {
 public:
  HingeSumOracle(Vec slope0, double const0, std::vector<Vec> slopes, Vec offsets);
  Eval eval(std::span<const double> x, double eta) const;
  double exact_value(std::span<const double> x) const;
  double b_norm() const { return b_norm_; }
  double d_u() const { return d_u_; }
  double lipschitz_val() const;
  int dim() const { return static_cast<int>(slope0_.size()); }
  // fixed_eta > 0 pins the smoothing level instead of the adaptive schedule;
  // fixed_eta < 0 evaluates the exact hinges with indicator subgradients.
  SaddleRow as_row(double fixed_eta = 0.0) const;

 private:
  Vec slope0_;
  double const0_;
  std::vector<Vec> slopes_;
  Vec offsets_;
  double b_norm_;
  double d_u_;
};

// Sum over groups of coordinate maxima with a constant shift:
//   value(x) = sum_g max_{i in group g} x_i + const0,
// entropy-smoothed per group. D_U = sqrt(sum_g log |group g|), ||B|| = 1
// (block selection matrix).
class GroupMaxSumOracle {
 public:
  GroupMaxSumOracle(int dim, std::vector<std::vector<int>> groups, double const0);
  Eval eval(std::span<const double> x, double eta) const;
  double exact_value(std::span<const double> x) const;
  double b_norm() const { return 1.0; }
  double d_u() const { return d_u_; }
  int dim() const { return dim_; }
  SaddleRow as_row() const;

 private:
  int dim_;
  std::vector<std::vector<int>> groups_;
  double const0_;
  double d_u_;
};

}  // namespace levelcg
