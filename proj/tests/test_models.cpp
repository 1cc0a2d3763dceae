#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "levelcg/errors.hpp"
#include "levelcg/models.hpp"
#include "levelcg/rng.hpp"
#include "levelcg/verify.hpp"

using namespace levelcg;

namespace {

ReturnsData tiny_data() {
  ReturnsData d;
  d.asset_returns = {Vec{0.1}};
  d.index_returns = Vec{0.05};
  d.asset_names = {"A0"};
  return d;
}

// SmoothOracle view of a saddle row at fixed eta, for finite-difference checks.
SmoothOracle row_view(const SaddleRow& row, double eta) {
  return SmoothOracle(
      row.dim(), [row, eta](std::span<const double> x) { return row.eval(x, eta); }, 0.0, 0.0,
      true);
}

ImrtInstance four_voxel_instance() {
  ImrtInstance inst;
  inst.n_angles = 1;
  inst.n_beamlets = 2;
  inst.n_voxels = 4;
  // Voxel-major rows: dose[v * 2 + b].
  inst.dose = {Vec{1.0, 0.5, 2.0, 0.0, 0.0, 1.5, 0.5, 0.5}};
  inst.structures = {{0, 1}, {2, 3}};
  inst.apertures = {{{0, 2}, {1, 2}}};  // both beamlets, then just the second
  inst.criteria.push_back({0, true, 1.0, 0.5, 0.2, 3.0, 1.0});
  inst.criteria.push_back({1, false, 1.2, 0.5, 0.2, 3.0, 1.0});
  inst.t_under = Vec{1.0, 1.0, 0.0, 0.0};
  inst.t_over = Vec{3.0, 3.0, 1.2, 1.2};
  inst.w_under = Vec{1.0, 1.0, 0.0, 0.0};
  inst.w_over = Vec{0.0, 0.0, 1.0, 1.0};
  inst.phi = 0.5;
  return inst;
}

}  // namespace

TEST_CASE("risk counts strictly positive margins") {
  ReturnsData d;
  d.asset_returns = {Vec{0.1}, Vec{0.0}};
  d.index_returns = Vec{0.05, 0.02};
  d.asset_names = {"A0"};
  CHECK(risk(d, Vec{1.0}) == doctest::Approx(0.5));
  // x = 0 with every index return positive.
  CHECK(risk(d, Vec{0.0}) == doctest::Approx(1.0));
  // Margins all negative.
  ReturnsData neg;
  neg.asset_returns = {Vec{0.5}, Vec{0.4}};
  neg.index_returns = Vec{0.0, 0.0};
  neg.asset_names = {"A0"};
  CHECK(risk(neg, Vec{1.0}) == doctest::Approx(0.0));
}

TEST_CASE("risk is invariant under sample permutation") {
  const ReturnsData d = gen_synthetic_returns(5, 40, 3);
  ReturnsData shuffled = d;
  Rng rng(1);
  for (int i = 39; i > 0; --i) {
    const int j = static_cast<int>(rng.below(i + 1));
    std::swap(shuffled.asset_returns[i], shuffled.asset_returns[j]);
    std::swap(shuffled.index_returns[i], shuffled.index_returns[j]);
  }
  const Vec x{0.2, 0.1, 0.0, 0.3, 0.05};
  CHECK(risk(d, x) == doctest::Approx(risk(shuffled, x)));
}

TEST_CASE("count_assets / card_violation / psi_rule") {
  CHECK(count_assets(Vec{0.5, 1e-9, 0.2}, 1e-6) == 2);
  CHECK(count_assets(Vec{0.0, 0.0}, 1e-6) == 0);
  CHECK(card_violation(Vec{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7}, 5) == 2);
  CHECK(psi_rule(28) == 5);
  CHECK(psi_rule(49) == 9);
  CHECK(psi_rule(442) == 22);
}

TEST_CASE("card-free convex objective values") {
  const PortfolioModel model = build_card_free_convex(tiny_data(), 0.5);
  REQUIRE(model.is_convex());
  // Hinge inactive: objective equals u.
  CHECK(model.convex().f.exact_value(Vec{1.0, -0.05}) == doctest::Approx(-0.05));
  // x = 0, u = 0: (1/(alpha K)) sum [R_k]_+.
  CHECK(model.convex().f.exact_value(Vec{0.0, 0.0}) == doctest::Approx(2.0 * 0.05));
  CHECK_THROWS_AS(build_card_free_convex(tiny_data(), 1.5), BadAlpha);
}

TEST_CASE("card-free convex toy matches a dense grid optimum") {
  ReturnsData d;
  d.asset_returns = {Vec{0.04}, Vec{-0.02}, Vec{0.01}, Vec{0.06}};
  d.index_returns = Vec{0.02, 0.01, -0.01, 0.03};
  d.asset_names = {"A0"};
  const PortfolioModel model = build_card_free_convex(d, 0.25);
  const double eps = 5e-3;
  LevelBudgets budgets;
  budgets.max_inner = 2000000;
  const EpsSolution sol = lcg_solve(model.convex(), eps, 0.9, budgets);

  const auto objective = [&](std::span<const double> w) {
    return model.convex().f.exact_value(w);
  };
  const GridResult grid =
      grid_minimize(objective, *model.convex().x_set,
                    GridSpec::cover(*model.convex().x_set, 601), 3.0);
  CHECK(objective(sol.x) <= grid.value + eps + 1e-9);
  CHECK(objective(sol.x) >= grid.value - grid.error_bound - eps);
}

TEST_CASE("card-free nonconvex sigmoid objective") {
  const ReturnsData d = gen_synthetic_returns(4, 30, 11);
  const double theta = 0.01;
  const PortfolioModel model = build_card_free_nonconvex(d, theta);
  REQUIRE_FALSE(model.is_convex());
  // Value at x = 0 is the average sigmoid of index returns.
  double expect = 0.0;
  const SigmoidIndicator sig(theta);
  for (double r : d.index_returns) expect += sig.value(r) / d.n_weeks();
  CHECK(model.nonconvex().f.value(Vec(4, 0.0)) == doctest::Approx(expect));

  // Small theta approaches the indicator average when margins are bounded away from 0.
  const Vec x{0.3, 0.1, 0.2, 0.05};
  const PortfolioModel sharp = build_card_free_nonconvex(d, 1e-9);
  CHECK(sharp.nonconvex().f.value(x) == doctest::Approx(risk(d, x)).epsilon(1e-6));

  // Gradient check at random interior points.
  Rng rng(4);
  std::vector<Vec> points;
  for (int i = 0; i < 20; ++i) {
    Vec p(4);
    double total = 0.0;
    for (auto& v : p) {
      v = rng.uniform(0.01, 0.4);
      total += v;
    }
    if (total > 0.95)
      for (auto& v : p) v *= 0.9 / total;
    points.push_back(p);
  }
  CHECK(fd_check(model.nonconvex().f, points) <= 1e-4);
  CHECK_THROWS_AS(build_card_free_nonconvex(d, 0.0), BadTheta);
}

TEST_CASE("cardinality surrogate row") {
  const ReturnsData d = gen_synthetic_returns(4, 20, 5);
  const PortfolioModel model = build_card_convex(d, 0.1, 2);
  const auto& row = model.convex().h.at(0);
  const int n = 4;
  const int u = model.layout.u_index;
  const int v = model.layout.v_index;
  REQUIRE(u == 4);
  REQUIRE(v == 5);

  Vec w(model.layout.total_dim, 0.0);
  // x = 0, v = 0 sits on the boundary.
  CHECK(row.exact_value(w) == doctest::Approx(0.0));
  // psi = N with uniform weights and v = 0 evaluates to 1/psi * sum x = 1/N.
  const PortfolioModel psi_n = build_card_convex(d, 0.1, n);
  Vec uniform(psi_n.layout.total_dim, 0.0);
  for (int i = 0; i < n; ++i) uniform[i] = 1.0 / n;
  CHECK(psi_n.convex().h.at(0).exact_value(uniform) == doctest::Approx(1.0 / n));

  // Brute-force 1-D minimization over v in [-1, 1] for fixed x: feasibility is
  // reached with v < 0, as the surrogate requires.
  Vec point(model.layout.total_dim, 0.0);
  point[0] = 0.5;
  point[1] = 0.3;
  point[2] = 0.2;
  double best = 1e300;
  double best_v = 0.0;
  for (int i = -1000; i <= 1000; ++i) {
    const double vv = i / 1000.0;
    double val = n * vv;
    for (int j = 0; j < n; ++j) val += positive_part(point[j] - vv) / 2.0;
    if (val < best) {
      best = val;
      best_v = vv;
    }
  }
  CHECK(best_v < 0.0);
  CHECK(best < 0.0);
  point[v] = best_v;
  CHECK(row.exact_value(point) == doctest::Approx(best).epsilon(1e-6));

  // Smoothing sandwich: smoothed <= exact <= smoothed + eta * term count / 2.
  const double eta = 0.05;
  const Eval sm = row.eval(point, eta);
  CHECK(sm.value <= row.exact_value(point) + 1e-12);
  CHECK(row.exact_value(point) - sm.value <= eta * n / 2.0 + 1e-12);
  CHECK_THROWS_AS(build_card_convex(d, 0.1, 0), BadPsi);
}

TEST_CASE("card-nonconvex-2 selection penalty") {
  const ReturnsData d = gen_synthetic_returns(6, 25, 9);
  const int psi = 2;
  const double theta = 0.01;
  const PortfolioModel model = build_card_nonconvex_2(d, theta, psi);
  const double at_zero = model.nonconvex().f.value(Vec(6, 0.0));
  double risk_zero = 0.0;
  const SigmoidIndicator sig(theta);
  for (double r : d.index_returns) risk_zero += sig.value(r) / d.n_weeks();
  // Penalty at zero: N/(2 psi).
  CHECK(at_zero == doctest::Approx(risk_zero + 6.0 / (2.0 * psi)));

  // One saturated coordinate contributes ~1/psi on top of the risk part.
  Vec x(6, 0.0);
  x[2] = 0.5;
  const PortfolioModel risk_only = build_card_free_nonconvex(d, theta);
  const double penalty = model.nonconvex().f.value(x) - risk_only.nonconvex().f.value(x);
  CHECK(penalty == doctest::Approx(1.0 / psi + 5.0 / (2.0 * psi)).epsilon(1e-6));

  Rng rng(8);
  std::vector<Vec> points;
  for (int i = 0; i < 10; ++i) {
    Vec p(6);
    for (auto& v : p) v = rng.uniform(0.01, 0.15);
    points.push_back(p);
  }
  CHECK(fd_check(model.nonconvex().f, points) <= 1e-4);
}

TEST_CASE("card-nonconvex-1 shares the constraint row with the convex builder") {
  const ReturnsData d = gen_synthetic_returns(5, 20, 2);
  const PortfolioModel nc = build_card_nonconvex_1(d, 0.01, 2);
  const PortfolioModel cv = build_card_convex(d, 0.1, 2);
  // Same surrogate evaluated at matching (x, v) points.
  Vec w_nc(nc.layout.total_dim, 0.0);
  Vec w_cv(cv.layout.total_dim, 0.0);
  w_nc[0] = w_cv[0] = 0.4;
  w_nc[1] = w_cv[1] = 0.25;
  w_nc[nc.layout.v_index] = 0.1;
  w_cv[cv.layout.v_index] = 0.1;
  CHECK(nc.nonconvex().h.at(0).exact_value(w_nc) ==
        doctest::Approx(cv.convex().h.at(0).exact_value(w_cv)));
}

TEST_CASE("synthetic returns generator is deterministic") {
  const ReturnsData a = gen_synthetic_returns(10, 50, 123);
  const ReturnsData b = gen_synthetic_returns(10, 50, 123);
  CHECK(a.index_returns == b.index_returns);
  CHECK(a.asset_returns == b.asset_returns);
  const ReturnsData c = gen_synthetic_returns(10, 50, 124);
  CHECK(a.index_returns != c.index_returns);
}

TEST_CASE("synthetic imrt instance shape and determinism") {
  const ImrtInstance a = gen_synthetic_imrt(8, 512, 16, 2, 7, 4);
  CHECK(a.n_angles == 8);
  CHECK(a.total_apertures() == 32);
  CHECK(a.criteria.size() == 3);  // two underdose + one overdose
  int under = 0, over = 0;
  for (const auto& c : a.criteria) (c.underdose ? under : over)++;
  CHECK(under == 2);
  CHECK(over == 1);
  for (const auto& d : a.dose)
    for (double v : d) CHECK(v >= 0.0);

  const ImrtInstance b = gen_synthetic_imrt(8, 512, 16, 2, 7, 4);
  CHECK(a.dose == b.dose);
  CHECK(a.structures == b.structures);
}

TEST_CASE("imrt save/load round trip is byte-stable") {
  namespace fs = std::filesystem;
  const ImrtInstance inst = gen_synthetic_imrt(3, 32, 8, 2, 21, 2);
  const std::string dir1 = (fs::temp_directory_path() / "levelcg_imrt_a").string();
  const std::string dir2 = (fs::temp_directory_path() / "levelcg_imrt_b").string();
  imrt_save(inst, dir1);
  const ImrtInstance loaded = imrt_load(dir1);
  CHECK(loaded.dose == inst.dose);
  CHECK(loaded.structures == inst.structures);
  CHECK(loaded.t_under == inst.t_under);
  CHECK(loaded.criteria.size() == inst.criteria.size());
  imrt_save(loaded, dir2);
  for (const auto& name : {"manifest.json", "dose_000.csv", "voxel_params.csv"}) {
    std::ifstream f1(fs::path(dir1) / name), f2(fs::path(dir2) / name);
    const std::string s1((std::istreambuf_iterator<char>(f1)), {});
    const std::string s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(s1 == s2);
  }
}

TEST_CASE("imrt convex model rows match hand-computed CVaR forms") {
  const ImrtInstance inst = four_voxel_instance();
  const ImrtModel model = build_imrt_convex(inst, 0.5);
  REQUIRE(model.is_convex());
  REQUIRE(model.n_apertures == 2);
  const int n_ap = 2;

  // y = (0.4, 0.2), tau = (1.1, 0.9).
  const Vec w{0.4, 0.2, 1.1, 0.9};
  const Vec z = imrt_doses(inst, w);
  // Aperture columns: full (1.5, 2.0, 1.5, 1.0) and second beamlet (0.5, 0.0, 1.5, 0.5).
  CHECK(z[0] == doctest::Approx(0.4 * 1.5 + 0.2 * 0.5));
  // Underdose row on structure {0,1}: -tau + b + (1/(p N)) sum [tau - z]_+.
  const double expected_under =
      -1.1 + 1.0 +
      (positive_part(1.1 - z[0]) + positive_part(1.1 - z[1])) / (0.5 * 2);
  CHECK(model.convex().h.at(0).exact_value(w) == doctest::Approx(expected_under));
  // Overdose row on structure {2,3}: tau - b + (1/(p N)) sum [z - tau]_+.
  const double expected_over =
      0.9 - 1.2 + (positive_part(z[2] - 0.9) + positive_part(z[3] - 0.9)) / (0.5 * 2);
  CHECK(model.convex().h.at(1).exact_value(w) == doctest::Approx(expected_over));
  // Group sparsity row: max over the single angle minus phi.
  CHECK(model.convex().h.at(2).exact_value(w) == doctest::Approx(0.4 - 0.5));
  CHECK(group_sparsity_value(inst, w) == doctest::Approx(0.4));

  // y = 0: zero dose, underdose rows maximally violated at high tau, overdose satisfied.
  const Vec zero{0.0, 0.0, 3.0, 0.2};
  CHECK(model.convex().h.at(0).exact_value(zero) > 0.0);
  CHECK(model.convex().h.at(1).exact_value(zero) < 0.0);
  CHECK(group_sparsity_value(inst, zero) == doctest::Approx(0.0));
  CHECK_THROWS_AS(build_imrt_convex(inst, 0.0), BadPhi);

  // Gradient checks on the convex rows at a generic point.
  std::vector<Vec> pts{w, Vec{0.1, 0.3, 0.8, 1.4}};
  CHECK(fd_check(row_view(model.convex().f, 0.0), pts) <= 1e-4);
  CHECK(fd_check(row_view(model.convex().h.at(0), 0.02), pts) <= 1e-4);
  CHECK(fd_check(row_view(model.convex().h.at(2), 0.02), pts) <= 1e-4);
  (void)n_ap;
}

TEST_CASE("imrt nonconvex objective limits and gradients") {
  const ImrtInstance inst = four_voxel_instance();
  // Large theta: every sigmoid sits near 1/2.
  const ImrtModel flat = build_imrt_nonconvex(inst, 0.5, 1e5);
  double w_total = 0.0;
  for (const auto& c : inst.criteria) w_total += c.weight;
  CHECK(flat.nonconvex().f.value(Vec{0.3, 0.1}) == doctest::Approx(w_total / 2.0).epsilon(1e-3));

  // Doses far above an underdose threshold kill its contribution.
  const ImrtModel sharp = build_imrt_nonconvex(inst, 0.5, 1e-3);
  const Vec strong{1.0, 0.0};  // z = (1.5, 2.0, 1.5, 1.0), all above tau = 1.0
  double val = sharp.nonconvex().f.value(strong);
  // Underdose term ~ 0; overdose on voxels {2,3}: z = (1.5, 1.0) vs tau = 1.2 -> one over.
  CHECK(val == doctest::Approx(0.5).epsilon(1e-2));

  const ImrtModel model = build_imrt_nonconvex(inst, 0.5, 0.05);
  CHECK(fd_check(model.nonconvex().f, {Vec{0.2, 0.3}, Vec{0.5, 0.1}}) <= 1e-4);
  CHECK_THROWS_AS(build_imrt_nonconvex(inst, 0.5, 0.0), BadTheta);
  CHECK_THROWS_AS(build_imrt_nonconvex(inst, -1.0, 0.1), BadPhi);
}

TEST_CASE("imrt criteria table") {
  const ImrtInstance inst = four_voxel_instance();
  const Vec y{1.0, 0.0};  // z = (1.5, 2.0, 1.5, 1.0)
  const auto table = imrt_criteria_table(inst, y);
  REQUIRE(table.size() == 2);
  // Underdose V_{1.0} on {0,1}: both voxels >= 1.0 -> fraction 1, required 0.5.
  CHECK(table[0].fraction == doctest::Approx(1.0));
  CHECK(table[0].satisfied);
  // Overdose V_{1.2} on {2,3}: one voxel above 1.2 -> fraction 0.5, cap 0.5.
  CHECK(table[1].fraction == doctest::Approx(0.5));
  CHECK(table[1].satisfied);
}
