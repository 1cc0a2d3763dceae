#include <doctest.h>

#include <cmath>

#include "levelcg/errors.hpp"
#include "levelcg/verify.hpp"

using namespace levelcg;

namespace {

SaddleProblem one_d_toy() {
  // X = [0,1], rows (x, 0.3 - x): saddle value 0.15 at x = 0.15.
  auto box = std::make_shared<Box>(Vec{0.0}, Vec{1.0});
  std::vector<SaddleRow> rows;
  rows.push_back(SaddleRow::smooth(SmoothOracle::affine(Vec{1.0}, 0.0)));
  rows.push_back(SaddleRow::smooth(SmoothOracle::affine(Vec{-1.0}, 0.3)));
  return make_saddle_problem(SaddleRow::smooth(SmoothOracle::zero(1)), std::move(rows), box);
}

}  // namespace

TEST_CASE("grid_saddle on the analytic 1-D minimax") {
  const SaddleProblem problem = one_d_toy();
  const GridSpec grid = GridSpec::cover(*problem.x_set, 2001);
  const GridResult r = grid_saddle(problem, grid);
  CHECK(r.value == doctest::Approx(0.15).epsilon(1e-3));
  CHECK(r.argmin[0] == doctest::Approx(0.15).epsilon(1e-2));
  CHECK(r.error_bound > 0.0);
}

TEST_CASE("grid_saddle of constant rows is the max component") {
  auto box = std::make_shared<Box>(Vec{0.0}, Vec{1.0});
  std::vector<SaddleRow> rows;
  rows.push_back(SaddleRow::smooth(SmoothOracle::affine(Vec{0.0}, -0.2)));
  rows.push_back(SaddleRow::smooth(SmoothOracle::affine(Vec{0.0}, 0.7)));
  const SaddleProblem problem =
      make_saddle_problem(SaddleRow::smooth(SmoothOracle::zero(1)), std::move(rows), box);
  const GridResult r = grid_saddle(problem, GridSpec::cover(*problem.x_set, 11));
  CHECK(r.value == doctest::Approx(0.7));
}

TEST_CASE("grid_saddle refinement never lifts the envelope beyond its bound") {
  const SaddleProblem problem = one_d_toy();
  const GridResult coarse = grid_saddle(problem, GridSpec::cover(*problem.x_set, 51));
  const GridResult fine = grid_saddle(problem, GridSpec::cover(*problem.x_set, 101));
  CHECK(fine.value <= coarse.value + coarse.error_bound);
  CHECK(coarse.value <= fine.value + coarse.error_bound);
}

TEST_CASE("grid_minimize") {
  const Box box(Vec{0.0}, Vec{1.0});
  const GridSpec grid = GridSpec::cover(box, 2001);
  const GridResult quad = grid_minimize(
      [](std::span<const double> x) { return (x[0] - 0.8) * (x[0] - 0.8); }, box, grid);
  CHECK(quad.argmin[0] == doctest::Approx(0.8).epsilon(1e-3));

  const ScaledSimplexLeq simplex(2, 1.0);
  const GridResult lin = grid_minimize(
      [](std::span<const double> x) { return -2.0 * x[0] + x[1]; }, simplex,
      GridSpec::cover(simplex, 201));
  CHECK(lin.argmin[0] == doctest::Approx(1.0));
  CHECK(lin.argmin[1] == doctest::Approx(0.0));

  CHECK_THROWS_AS(
      grid_minimize([](std::span<const double>) { return 0.0; }, ScaledSimplexLeq(4, 1.0),
                    GridSpec{{{0, 1, 3}, {0, 1, 3}, {0, 1, 3}, {0, 1, 3}}}),
      GridTooLarge);
}

TEST_CASE("exact_cvar") {
  CHECK(exact_cvar(Vec{0.4, 0.4, 0.4}, 0.3) == doctest::Approx(0.4));
  // Order-statistic scan on {0,1} at alpha = 1/2.
  CHECK(exact_cvar(Vec{0.0, 1.0}, 0.5) == doctest::Approx(1.0));
  // alpha near 1 approaches the sample mean.
  const Vec samples{0.1, 0.5, -0.2, 0.3, 0.9, -0.4};
  double mean = 0.0;
  for (double v : samples) mean += v / samples.size();
  CHECK(exact_cvar(samples, 0.999) == doctest::Approx(mean).epsilon(1e-2));
  CHECK_THROWS_AS(exact_cvar(samples, 1.0), BadAlpha);
  CHECK_THROWS_AS(exact_cvar(Vec{}, 0.5), EmptyData);
}

TEST_CASE("exact_cvar agrees with the smoothed objective minimized over u") {
  // The hinge-smoothed CVaR objective is within eta-slack of the exact scan.
  const Vec samples{0.15, -0.3, 0.6, 0.05, 0.4, -0.1, 0.2};
  const double alpha = 0.25;
  const double exact = exact_cvar(samples, alpha);
  const double eta = 1e-3;
  const SmoothedHinge hinge(eta);
  double smoothed_min = 1e300;
  for (int i = -2000; i <= 2000; ++i) {
    const double u = i / 1000.0;
    double total = u;
    for (double v : samples) total += hinge.value(v - u) / (alpha * samples.size());
    smoothed_min = std::min(smoothed_min, total);
  }
  CHECK(smoothed_min <= exact + 1e-9);
  CHECK(exact - smoothed_min <= eta / 2.0 * samples.size() / (alpha * samples.size()) + 1e-3);
}
