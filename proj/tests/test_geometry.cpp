#include <doctest.h>

#include <cmath>

#include "levelcg/errors.hpp"
#include "levelcg/geometry.hpp"
#include "levelcg/rng.hpp"

using namespace levelcg;

namespace {

// Random feasible points for the LMO optimality property.
Vec sample_point(const FeasibleSet& set, Rng& rng) {
  if (const auto* simplex = dynamic_cast<const ScaledSimplexLeq*>(&set)) {
    Vec x(simplex->dim());
    double total = 0.0;
    for (auto& v : x) {
      v = -std::log(1.0 - rng.uniform());
      total += v;
    }
    const double scale = simplex->radius() * rng.uniform();
    for (auto& v : x) v = scale * v / total;
    return x;
  }
  if (const auto* box = dynamic_cast<const Box*>(&set)) {
    Vec x(box->dim());
    for (int i = 0; i < box->dim(); ++i) x[i] = rng.uniform(box->lower()[i], box->upper()[i]);
    return x;
  }
  const auto& product = dynamic_cast<const ProductSet&>(set);
  Vec x;
  for (const auto& f : product.factors()) {
    const Vec part = sample_point(*f, rng);
    x.insert(x.end(), part.begin(), part.end());
  }
  return x;
}

double entropy_prox_objective(std::span<const double> z, std::span<const double> r,
                              std::span<const double> gain, double tau) {
  double v = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    v -= gain[i] * z[i];
    if (z[i] > 0.0) v += tau * z[i] * std::log(z[i] / r[i]);
  }
  return v;
}

}  // namespace

TEST_CASE("scaled simplex lmo picks the cheapest vertex or the origin") {
  CHECK(lmo_scaled_simplex(Vec{3.0, 5.0}, 1.0) == Vec{0.0, 0.0});
  CHECK(lmo_scaled_simplex(Vec{-1.0, 2.0}, 1.0) == Vec{1.0, 0.0});
  // Tie broken toward the lowest index.
  CHECK(lmo_scaled_simplex(Vec{-1.0, -1.0}, 2.0) == Vec{2.0, 0.0});
  CHECK_THROWS_AS(lmo_scaled_simplex(Vec{std::nan(""), 0.0}, 1.0), NonFiniteInput);
}

TEST_CASE("box lmo uses the lower bound on zero cost") {
  const Box box(Vec{-2.0}, Vec{3.0});
  CHECK(lmo_box(Vec{1.0}, box) == Vec{-2.0});
  CHECK(lmo_box(Vec{-1.0}, box) == Vec{3.0});
  CHECK(lmo_box(Vec{0.0}, box) == Vec{-2.0});
}

TEST_CASE("product lmo concatenates the factor lmos") {
  const ProductSet set({std::make_shared<ScaledSimplexLeq>(2, 1.0),
                        std::make_shared<Box>(Vec{0.0}, Vec{1.0})});
  CHECK(lmo_product(Vec{-1.0, 0.0, 1.0}, set) == Vec{1.0, 0.0, 0.0});
  CHECK(lmo_product(Vec{1.0, 1.0, -1.0}, set) == Vec{0.0, 0.0, 1.0});
  CHECK(lmo_product(Vec{0.0, 0.0, 0.0}, set) == Vec{0.0, 0.0, 0.0});
  CHECK_THROWS_AS(lmo_product(Vec{1.0, 1.0}, set), DimMismatch);
}

TEST_CASE("diameters of the built-in sets") {
  CHECK(ScaledSimplexLeq(3, 1.0).diameter() == doctest::Approx(std::sqrt(2.0)));
  CHECK(ScaledSimplexLeq(1, 0.7).diameter() == doctest::Approx(0.7));
  CHECK(Box(Vec{0.0, 0.0}, Vec{1.0, 1.0}).diameter() == doctest::Approx(std::sqrt(2.0)));
  const ProductSet set({std::make_shared<ScaledSimplexLeq>(2, 1.0),
                        std::make_shared<Box>(Vec{0.0}, Vec{1.0})});
  CHECK(set.diameter() == doctest::Approx(std::sqrt(3.0)));
}

TEST_CASE("lmo output is feasible and beats random feasible points") {
  Rng rng(42);
  std::vector<std::shared_ptr<const FeasibleSet>> sets = {
      std::make_shared<ScaledSimplexLeq>(4, 2.5),
      std::make_shared<Box>(Vec{-1.0, 0.5, -3.0}, Vec{1.0, 2.0, -1.0}),
      std::make_shared<ProductSet>(std::vector<std::shared_ptr<const FeasibleSet>>{
          std::make_shared<ScaledSimplexLeq>(2, 1.0),
          std::make_shared<Box>(Vec{-1.0}, Vec{1.0})}),
  };
  for (const auto& set : sets) {
    for (int trial = 0; trial < 25; ++trial) {
      Vec cost(set->dim());
      for (auto& c : cost) c = rng.uniform(-2.0, 2.0);
      const Vec vertex = set->lmo(cost);
      CHECK(set->contains(vertex, 0.0));
      const double best = dot(cost, vertex);
      for (int s = 0; s < 400; ++s) {
        const Vec x = sample_point(*set, rng);
        REQUIRE(set->contains(x, 1e-12));
        CHECK(best <= dot(cost, x) + 1e-12);
      }
    }
  }
}

TEST_CASE("prox with zero gain returns the previous point") {
  const Vec r{0.3, 0.7};
  const Vec zero{0.0, 0.0};
  for (auto kind : {ProxKind::Entropy, ProxKind::Euclidean}) {
    const SimplexProx prox(kind, 2);
    const Vec out = prox.apply(r, zero, 2.0);
    CHECK(out[0] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(out[1] == doctest::Approx(0.7).epsilon(1e-12));
  }
}

TEST_CASE("entropy prox closed form") {
  const SimplexProx prox(ProxKind::Entropy, 2);
  const Vec out = prox.apply(Vec{0.5, 0.5}, Vec{std::log(4.0), 0.0}, 1.0);
  CHECK(out[0] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(out[1] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK_THROWS_AS(prox.apply(Vec{0.0, 1.0}, Vec{0.0, 0.0}, 1.0), DegenerateDual);
}

TEST_CASE("euclidean prox saturates on large gains") {
  // Expected value derived by grid minimization of <-g,z> + tau ||z-r||^2/2.
  const SimplexProx prox(ProxKind::Euclidean, 2);
  const Vec out = prox.apply(Vec{0.5, 0.5}, Vec{10.0, 0.0}, 1.0);
  CHECK(out[0] == doctest::Approx(1.0));
  CHECK(out[1] == doctest::Approx(0.0));

  double best = 1e300;
  double best_z = 0.0;
  for (int i = 0; i <= 20000; ++i) {
    const double z0 = static_cast<double>(i) / 20000.0;
    const double obj = -(10.0 * z0) - 0.0 * (1 - z0) +
                       0.5 * ((z0 - 0.5) * (z0 - 0.5) + (0.5 - z0) * (0.5 - z0));
    if (obj < best) {
      best = obj;
      best_z = z0;
    }
  }
  CHECK(best_z == doctest::Approx(1.0));
}

TEST_CASE("prox output stays on the simplex and is scale consistent") {
  Rng rng(7);
  for (auto kind : {ProxKind::Entropy, ProxKind::Euclidean}) {
    for (int dim : {2, 3, 6}) {
      const SimplexProx prox(kind, dim);
      for (int trial = 0; trial < 200; ++trial) {
        Vec r(dim);
        double total = 0.0;
        for (auto& v : r) {
          v = rng.uniform(0.05, 1.0);
          total += v;
        }
        for (auto& v : r) v /= total;
        Vec gain(dim);
        for (auto& g : gain) g = rng.uniform(-3.0, 3.0);
        const double tau = rng.uniform(0.2, 8.0);
        const Vec out = prox.apply(r, gain, tau);
        double sum = 0.0;
        for (double v : out) {
          CHECK(v >= 0.0);
          sum += v;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);

        Vec scaled(dim);
        for (int i = 0; i < dim; ++i) scaled[i] = gain[i] / tau;
        const Vec out2 = prox.apply(r, scaled, 1.0);
        for (int i = 0; i < dim; ++i) CHECK(out[i] == doctest::Approx(out2[i]).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("entropy prox matches brute-force grid minimization") {
  const SimplexProx prox2(ProxKind::Entropy, 2);
  const Vec r2{0.4, 0.6};
  const Vec g2{1.3, -0.4};
  const double tau = 2.0;
  const Vec out = prox2.apply(r2, g2, tau);
  double best = 1e300;
  Vec best_z{0.0, 0.0};
  const int n = 200000;
  for (int i = 1; i < n; ++i) {
    const Vec z{static_cast<double>(i) / n, 1.0 - static_cast<double>(i) / n};
    const double obj = entropy_prox_objective(z, r2, g2, tau);
    if (obj < best) {
      best = obj;
      best_z = z;
    }
  }
  CHECK(std::abs(out[0] - best_z[0]) <= 1e-4);
  CHECK(entropy_prox_objective(out, r2, g2, tau) <= best + 1e-9);

  const SimplexProx prox3(ProxKind::Entropy, 3);
  const Vec r3{0.2, 0.5, 0.3};
  const Vec g3{0.7, -1.1, 0.2};
  const Vec out3 = prox3.apply(r3, g3, tau);
  double best3 = 1e300;
  const int m = 800;
  for (int i = 1; i < m; ++i)
    for (int j = 1; i + j < m; ++j) {
      const Vec z{static_cast<double>(i) / m, static_cast<double>(j) / m,
                  1.0 - static_cast<double>(i + j) / m};
      best3 = std::min(best3, entropy_prox_objective(z, r3, g3, tau));
    }
  // The closed form must beat every grid point.
  CHECK(entropy_prox_objective(out3, r3, g3, tau) <= best3 + 1e-9);
}

TEST_CASE("entropy prox survives gains of magnitude 1e4") {
  const SimplexProx prox(ProxKind::Entropy, 3);
  const Vec out = prox.apply(Vec{1.0 / 3, 1.0 / 3, 1.0 / 3}, Vec{1e4, -1e4, 0.0}, 1.0);
  CHECK(all_finite(out));
  CHECK(out[0] == doctest::Approx(1.0));
  double sum = 0.0;
  for (double v : out) sum += v;
  CHECK(std::abs(sum - 1.0) <= 1e-12);
}
