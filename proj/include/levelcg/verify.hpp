#pragma once

#include <functional>
#include <span>
#include <vector>

#include "levelcg/cgo.hpp"
#include "levelcg/geometry.hpp"

namespace levelcg {

// Brute-force oracles used by tests and the acceptance suite. These are the
// provenance source for derived expected values and stay independent of the
// solver code paths they check.

struct GridSpec {
  struct Axis {
    double lo = 0.0;
    double hi = 1.0;
    int points = 2;
  };
  std::vector<Axis> axes;

  static GridSpec uniform(const Vec& lo, const Vec& hi, int points_per_dim);
  // Covers a set's bounding box.
  static GridSpec cover(const FeasibleSet& set, int points_per_dim);
  long total_points() const;
  // Euclidean norm of the per-axis step vector (one grid cell diagonal).
  double step_norm() const;
};

inline constexpr long kGridPointCap = 10000000;

struct GridResult {
  double value = 0.0;
  double error_bound = 0.0;
  Vec argmin;
};

// Saddle value min_x max_z of the problem on a feasible grid: the inner max
// over the simplex is exact (max component of the exact row values).
GridResult grid_saddle(const SaddleProblem& problem, const GridSpec& grid);

// Minimum of fn over the feasible grid points of the set.
GridResult grid_minimize(const std::function<double(std::span<const double>)>& fn,
                         const FeasibleSet& set, const GridSpec& grid,
                         double lipschitz_bound = 0.0);

// min_u u + (1/(alpha K)) sum [v_k - u]_+ by scanning the order statistics.
double exact_cvar(std::span<const double> values, double alpha);

}  // namespace levelcg
