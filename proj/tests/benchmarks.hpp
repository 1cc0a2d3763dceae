#pragma once

// Shared benchmark instances used by the unit tests and the acceptance suite.

#include <cmath>
#include <memory>

#include "levelcg/cgo.hpp"
#include "levelcg/level.hpp"
#include "levelcg/nonconvex.hpp"

namespace levelcg::bench_instances {

// Fixed smooth saddle benchmark on the 2-simplex:
//   f(x) = 0.5 ||x - (0.3, 0.1)||^2, rows (x0 - x1 + 0.1, 0.5 ||x||^2 - 0.15).
struct SmoothBenchmark {
  SaddleProblem problem;
  double l_f = 1.0;
  double max_l_h = 1.0;
};

inline SmoothBenchmark make_smooth_benchmark() {
  auto set = std::make_shared<ScaledSimplexLeq>(2, 1.0);
  SmoothOracle f(
      2,
      [](std::span<const double> x) {
        const double dx = x[0] - 0.3;
        const double dy = x[1] - 0.1;
        return Eval{0.5 * (dx * dx + dy * dy), Vec{dx, dy}};
      },
      1.0, 1.0);
  std::vector<SaddleRow> rows;
  rows.push_back(SaddleRow::smooth(SmoothOracle::affine(Vec{1.0, -1.0}, 0.1)));
  rows.push_back(SaddleRow::smooth(SmoothOracle(
      2,
      [](std::span<const double> x) {
        return Eval{0.5 * (x[0] * x[0] + x[1] * x[1]) - 0.15, Vec{x[0], x[1]}};
      },
      1.0, 1.0)));
  SmoothBenchmark b{make_saddle_problem(SaddleRow::smooth(std::move(f)), std::move(rows), set),
                    1.0, 1.0};
  return b;
}

// Rate bound for the smooth case evaluated with known constants.
inline double smooth_gap_bound(const SmoothBenchmark& b, int t) {
  const double d = b.problem.d_x;
  return 2.0 * (b.l_f + b.max_l_h) * d * d / (t + 1.0) +
         b.problem.m_bar * d * (18.0 * b.problem.v_bar + 7.0 / 6.0) / std::sqrt(t + 1.0);
}

// 1-D analytic constrained problem: min x s.t. 0.3 - x <= 0 on [0,1], f* = 0.3.
inline ConstrainedProblem make_one_d_toy() {
  ConstrainedProblem p;
  p.x_set = std::make_shared<Box>(Vec{0.0}, Vec{1.0});
  p.f = SaddleRow::smooth(SmoothOracle::affine(Vec{1.0}, 0.0));
  p.h.push_back(SaddleRow::smooth(SmoothOracle::affine(Vec{-1.0}, 0.3)));
  return p;
}

// 1-D nonconvex-compatible benchmark: min (x - 0.8)^2 s.t. x - 0.5 <= 0 on [0,1],
// constrained optimum at 0.5.
inline NonconvexProblem make_one_d_nonconvex() {
  NonconvexProblem p;
  p.x_set = std::make_shared<Box>(Vec{0.0}, Vec{1.0});
  p.f = SmoothOracle(
      1,
      [](std::span<const double> x) {
        return Eval{(x[0] - 0.8) * (x[0] - 0.8), Vec{2.0 * (x[0] - 0.8)}};
      },
      2.0, 1.6);
  p.lower_curvature = 2.0;
  p.h.push_back(SaddleRow::smooth(SmoothOracle::affine(Vec{1.0}, -0.5)));
  return p;
}

// Hinge-constrained 1-D saddle instance with the hinge active at the optimum:
// rows (0.45 - x, [x - 0.3]_+ - 0.05), saddle value 0.05 at x = 0.4.
inline SaddleProblem make_hinge_instance() {
  auto set = std::make_shared<Box>(Vec{0.0}, Vec{1.0});
  std::vector<SaddleRow> rows;
  rows.push_back(SaddleRow::smooth(SmoothOracle::affine(Vec{-1.0}, 0.45)));
  rows.push_back(
      HingeSumOracle(Vec{0.0}, -0.05, {Vec{1.0}}, Vec{-0.3}).as_row());
  return make_saddle_problem(SaddleRow::smooth(SmoothOracle::zero(1)), std::move(rows), set);
}

}  // namespace levelcg::bench_instances
