#include "levelcg/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "levelcg/errors.hpp"

namespace levelcg {

GridSpec GridSpec::uniform(const Vec& lo, const Vec& hi, int points_per_dim) {
  if (lo.size() != hi.size()) throw DimMismatch("GridSpec::uniform");
  if (points_per_dim < 2) throw InvalidConstant("GridSpec: points per dim must be >= 2");
  GridSpec g;
  for (std::size_t i = 0; i < lo.size(); ++i) g.axes.push_back({lo[i], hi[i], points_per_dim});
  return g;
}

GridSpec GridSpec::cover(const FeasibleSet& set, int points_per_dim) {
  Vec lo, hi;
  set.bounding_box(lo, hi);
  return uniform(lo, hi, points_per_dim);
}

long GridSpec::total_points() const {
  long total = 1;
  for (const auto& a : axes) {
    total *= a.points;
    if (total > kGridPointCap) throw GridTooLarge();
  }
  return total;
}

double GridSpec::step_norm() const {
  double s = 0.0;
  for (const auto& a : axes) {
    const double step = (a.hi - a.lo) / (a.points - 1);
    s += step * step;
  }
  return std::sqrt(s);
}

namespace {

// Visits every grid point through a mixed-radix counter.
template <typename Fn>
void for_each_grid_point(const GridSpec& grid, Fn&& fn) {
  const int d = static_cast<int>(grid.axes.size());
  std::vector<int> idx(d, 0);
  Vec x(d);
  while (true) {
    for (int i = 0; i < d; ++i) {
      const auto& a = grid.axes[i];
      x[i] = a.lo + (a.hi - a.lo) * idx[i] / (a.points - 1);
    }
    fn(std::span<const double>(x));
    int i = 0;
    for (; i < d; ++i) {
      if (++idx[i] < grid.axes[i].points) break;
      idx[i] = 0;
    }
    if (i == d) return;
  }
}

}  // namespace

GridResult grid_saddle(const SaddleProblem& problem, const GridSpec& grid) {
  if (problem.x_dim() > 3) throw GridTooLarge("grid_saddle: x dimension must be <= 3");
  if (static_cast<int>(grid.axes.size()) != problem.x_dim())
    throw DimMismatch("grid_saddle: grid dims");
  grid.total_points();

  GridResult best;
  best.value = std::numeric_limits<double>::infinity();
  for_each_grid_point(grid, [&](std::span<const double> x) {
    if (!problem.x_set->contains(x, 1e-12)) return;
    double inner = -std::numeric_limits<double>::infinity();
    for (const auto& row : problem.h_bar) inner = std::max(inner, row.exact_value(x));
    inner += problem.f_bar.exact_value(x);
    if (inner < best.value) {
      best.value = inner;
      best.argmin.assign(x.begin(), x.end());
    }
  });
  if (!std::isfinite(best.value)) throw GridTooLarge("grid_saddle: no feasible grid point");

  double lip = problem.f_bar.lipschitz_val();
  double row_lip = 0.0;
  for (const auto& row : problem.h_bar) row_lip = std::max(row_lip, row.lipschitz_val());
  best.error_bound = (lip + row_lip) * grid.step_norm();
  return best;
}

GridResult grid_minimize(const std::function<double(std::span<const double>)>& fn,
                         const FeasibleSet& set, const GridSpec& grid, double lipschitz_bound) {
  if (set.dim() > 3) throw GridTooLarge("grid_minimize: dimension must be <= 3");
  if (static_cast<int>(grid.axes.size()) != set.dim()) throw DimMismatch("grid_minimize");
  grid.total_points();

  GridResult best;
  best.value = std::numeric_limits<double>::infinity();
  for_each_grid_point(grid, [&](std::span<const double> x) {
    if (!set.contains(x, 1e-12)) return;
    const double v = fn(x);
    if (v < best.value) {
      best.value = v;
      best.argmin.assign(x.begin(), x.end());
    }
  });
  if (!std::isfinite(best.value)) throw GridTooLarge("grid_minimize: no feasible grid point");
  best.error_bound = lipschitz_bound * grid.step_norm();
  return best;
}

double exact_cvar(std::span<const double> values, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw BadAlpha();
  if (values.empty()) throw EmptyData("exact_cvar: no samples");
  require_finite(values, "values");
  const double k = static_cast<double>(values.size());
  Vec sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  // The objective is piecewise linear and convex in u with breakpoints at the
  // samples, so scanning the order statistics is exact.
  double best = std::numeric_limits<double>::infinity();
  for (double u : sorted) {
    double s = 0.0;
    for (double v : values) s += positive_part(v - u);
    best = std::min(best, u + s / (alpha * k));
  }
  return best;
}

}  // namespace levelcg
