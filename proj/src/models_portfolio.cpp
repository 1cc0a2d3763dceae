#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "levelcg/errors.hpp"
#include "levelcg/models.hpp"
#include "levelcg/rng.hpp"

namespace levelcg {

namespace {

void check_data(const ReturnsData& data) {
  if (data.n_weeks() < 1 || data.n_assets() < 1) throw EmptyData("returns data is empty");
  for (const Vec& row : data.asset_returns) {
    if (static_cast<int>(row.size()) != data.n_assets())
      throw DimMismatch("returns data: ragged rows");
    require_finite(row, "asset returns");
  }
  require_finite(data.index_returns, "index returns");
  if (static_cast<int>(data.asset_returns.size()) != data.n_weeks())
    throw DimMismatch("returns data: week count");
}

std::pair<double, double> default_u_bounds(const ReturnsData& data) {
  // u_lo = min_k (R_k - max_i r_ik), u_hi = max_k R_k (VaR quantile bounds).
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < data.n_weeks(); ++k) {
    const double rmax =
        *std::max_element(data.asset_returns[k].begin(), data.asset_returns[k].end());
    lo = std::min(lo, data.index_returns[k] - rmax);
    hi = std::max(hi, data.index_returns[k]);
  }
  if (lo > hi) std::swap(lo, hi);
  return {lo, hi};
}

// CVaR objective u + (1/(alpha K)) sum_k [R_k - <r_k, x> - u]_+ over (x, u).
HingeSumOracle cvar_objective(const ReturnsData& data, double alpha, int dim, int u_index) {
  const int k_count = data.n_weeks();
  const int n = data.n_assets();
  const double coeff = 1.0 / (alpha * k_count);
  Vec slope0(dim, 0.0);
  slope0[u_index] = 1.0;
  std::vector<Vec> slopes(k_count, Vec(dim, 0.0));
  Vec offsets(k_count);
  for (int k = 0; k < k_count; ++k) {
    for (int i = 0; i < n; ++i) slopes[k][i] = -coeff * data.asset_returns[k][i];
    slopes[k][u_index] = -coeff;
    offsets[k] = coeff * data.index_returns[k];
  }
  return HingeSumOracle(std::move(slope0), 0.0, std::move(slopes), std::move(offsets));
}

// Cardinality surrogate sum_i (v + (1/psi) [x_i - v]_+) <= 0, i.e.
// N v + (1/psi) sum_i [x_i - v]_+ <= 0 with v free to go negative.
HingeSumOracle cardinality_row(int dim, int n_assets, int v_index, int psi) {
  Vec slope0(dim, 0.0);
  slope0[v_index] = static_cast<double>(n_assets);
  std::vector<Vec> slopes(n_assets, Vec(dim, 0.0));
  Vec offsets(n_assets, 0.0);
  const double inv_psi = 1.0 / psi;
  for (int i = 0; i < n_assets; ++i) {
    slopes[i][i] = inv_psi;
    slopes[i][v_index] = -inv_psi;
  }
  return HingeSumOracle(std::move(slope0), 0.0, std::move(slopes), std::move(offsets));
}

// Empirical (1 - alpha) quantile of the index returns: the CVaR-minimizing u
// at x = 0, used as the suggested start for the VaR variable.
double index_quantile(const ReturnsData& data, double alpha) {
  Vec sorted = data.index_returns;
  std::sort(sorted.begin(), sorted.end());
  const int k = data.n_weeks();
  int idx = static_cast<int>(std::ceil((1.0 - alpha) * k)) - 1;
  idx = std::clamp(idx, 0, k - 1);
  return sorted[idx];
}

SaddleRow trivial_row(int dim) {
  return SaddleRow::smooth(SmoothOracle::affine(Vec(dim, 0.0), -1.0));
}

// Sample-average sigmoid risk over the asset block of a dim-sized vector,
// with an optional per-coordinate selection penalty (1/psi) sum sigmoid(x_i/theta).
SmoothOracle sigmoid_risk_oracle(const ReturnsData& data, double theta, int dim,
                                 double penalty_psi) {
  const int k_count = data.n_weeks();
  const int n = data.n_assets();
  auto rows = std::make_shared<const std::vector<Vec>>(data.asset_returns);
  auto index = std::make_shared<const Vec>(data.index_returns);
  const SigmoidIndicator sig(theta);

  double mean_norm = 0.0;
  double mean_norm_sq = 0.0;
  for (const Vec& r : *rows) {
    const double nr = norm2(r);
    mean_norm += nr / k_count;
    mean_norm_sq += nr * nr / k_count;
  }
  double m_const = mean_norm / (4.0 * theta);
  double l_const = SigmoidIndicator::kMaxCurvature * mean_norm_sq / (theta * theta);
  if (penalty_psi > 0.0) {
    m_const += std::sqrt(static_cast<double>(n)) / (4.0 * theta * penalty_psi);
    l_const += SigmoidIndicator::kMaxCurvature / (theta * theta * penalty_psi);
  }

  auto fn = [rows, index, sig, dim, n, k_count, penalty_psi](std::span<const double> x) {
    Eval out;
    out.grad.assign(dim, 0.0);
    for (int k = 0; k < k_count; ++k) {
      const Vec& r = (*rows)[k];
      double margin = (*index)[k];
      for (int i = 0; i < n; ++i) margin -= r[i] * x[i];
      const double s = sig.value(margin);
      const double ds = sig.derivative(margin);
      out.value += s / k_count;
      for (int i = 0; i < n; ++i) out.grad[i] -= ds * r[i] / k_count;
    }
    if (penalty_psi > 0.0) {
      for (int i = 0; i < n; ++i) {
        out.value += sig.value(x[i]) / penalty_psi;
        out.grad[i] += sig.derivative(x[i]) / penalty_psi;
      }
    }
    return out;
  };
  return SmoothOracle(dim, std::move(fn), l_const, m_const);
}

}  // namespace

ReturnsData gen_synthetic_returns(int n_assets, int n_weeks, std::uint64_t seed) {
  if (n_assets < 1 || n_weeks < 1) throw EmptyData("synthetic returns: counts must be >= 1");
  Rng rng(seed);
  // Multi-factor market: each asset loads on one sector factor plus a signed
  // secondary exposure, so tail weeks differ across assets and hedging pays.
  const int n_factors = 4;
  std::vector<int> sector(n_assets);
  std::vector<int> secondary(n_assets);
  Vec load_primary(n_assets), load_secondary(n_assets), idio(n_assets), drift(n_assets);
  for (int i = 0; i < n_assets; ++i) {
    sector[i] = static_cast<int>(rng.below(n_factors));
    secondary[i] = static_cast<int>(rng.below(n_factors));
    load_primary[i] = rng.uniform(0.8, 1.3);
    load_secondary[i] = rng.uniform(-0.6, 0.6);
    idio[i] = rng.uniform(0.008, 0.030);
    drift[i] = rng.normal(0.0008, 0.0020);
  }
  ReturnsData data;
  data.asset_returns.assign(n_weeks, Vec(n_assets));
  data.index_returns.resize(n_weeks);
  data.asset_names.reserve(n_assets);
  for (int i = 0; i < n_assets; ++i) data.asset_names.push_back("A" + std::to_string(i));
  Vec factors(n_factors);
  for (int k = 0; k < n_weeks; ++k) {
    double market = 0.0;
    for (int j = 0; j < n_factors; ++j) {
      factors[j] = rng.normal(0.001, 0.02);
      market += factors[j] / n_factors;
    }
    data.index_returns[k] = market + rng.normal(0.0, 0.003);
    for (int i = 0; i < n_assets; ++i)
      data.asset_returns[k][i] = drift[i] + load_primary[i] * factors[sector[i]] +
                                 load_secondary[i] * factors[secondary[i]] +
                                 rng.normal(0.0, idio[i]);
  }
  return data;
}

PortfolioModel build_card_free_convex(const ReturnsData& data, double alpha,
                                      std::optional<std::pair<double, double>> u_bounds) {
  check_data(data);
  if (!(alpha > 0.0 && alpha < 1.0)) throw BadAlpha();
  const int n = data.n_assets();
  const auto [u_lo, u_hi] = u_bounds.value_or(default_u_bounds(data));

  PortfolioModel model;
  model.kind = PortfolioKind::CardFreeConvex;
  model.alpha = alpha;
  model.u_bounds = {u_lo, u_hi};
  model.layout = PortfolioLayout{n, n, -1, n + 1};

  ConstrainedProblem problem;
  problem.x_set = std::make_shared<ProductSet>(std::vector<std::shared_ptr<const FeasibleSet>>{
      std::make_shared<ScaledSimplexLeq>(n, 1.0),
      std::make_shared<Box>(Vec{u_lo}, Vec{u_hi})});
  problem.f = cvar_objective(data, alpha, n + 1, n).as_row();
  // Pure minimization; one trivially satisfied row keeps the level machinery uniform.
  problem.h.push_back(trivial_row(n + 1));
  model.start.assign(n + 1, 0.0);
  model.start[n] = std::clamp(index_quantile(data, alpha), u_lo, u_hi);
  model.problem = std::move(problem);
  return model;
}

PortfolioModel build_card_free_nonconvex(const ReturnsData& data, double theta) {
  check_data(data);
  if (!(theta > 0.0)) throw BadTheta();
  const int n = data.n_assets();

  PortfolioModel model;
  model.kind = PortfolioKind::CardFreeNonconvex;
  model.theta = theta;
  model.layout = PortfolioLayout{n, -1, -1, n};

  NonconvexProblem problem;
  problem.x_set = std::make_shared<ScaledSimplexLeq>(n, 1.0);
  problem.f = sigmoid_risk_oracle(data, theta, n, 0.0);
  problem.lower_curvature = problem.f.lipschitz_grad();
  model.start.assign(n, 0.0);
  model.problem = std::move(problem);
  return model;
}

PortfolioModel build_card_convex(const ReturnsData& data, double alpha, int psi,
                                 std::optional<std::pair<double, double>> u_bounds,
                                 std::optional<std::pair<double, double>> v_bounds) {
  check_data(data);
  if (!(alpha > 0.0 && alpha < 1.0)) throw BadAlpha();
  if (psi < 1) throw BadPsi();
  const int n = data.n_assets();
  const auto [u_lo, u_hi] = u_bounds.value_or(default_u_bounds(data));
  // v must be allowed below zero for the surrogate to bind.
  const auto [v_lo, v_hi] = v_bounds.value_or(std::pair<double, double>{-1.0, 1.0});

  PortfolioModel model;
  model.kind = PortfolioKind::CardConvex;
  model.alpha = alpha;
  model.psi = psi;
  model.u_bounds = {u_lo, u_hi};
  model.v_bounds = {v_lo, v_hi};
  const int dim = n + 2;
  model.layout = PortfolioLayout{n, n, n + 1, dim};

  ConstrainedProblem problem;
  problem.x_set = std::make_shared<ProductSet>(std::vector<std::shared_ptr<const FeasibleSet>>{
      std::make_shared<ScaledSimplexLeq>(n, 1.0),
      std::make_shared<Box>(Vec{u_lo}, Vec{u_hi}),
      std::make_shared<Box>(Vec{v_lo}, Vec{v_hi})});
  problem.f = cvar_objective(data, alpha, dim, n).as_row();
  problem.h.push_back(cardinality_row(dim, n, n + 1, psi).as_row());
  model.start.assign(dim, 0.0);
  model.start[n] = std::clamp(index_quantile(data, alpha), u_lo, u_hi);
  model.start[n + 1] = std::clamp(0.0, v_lo, v_hi);
  model.problem = std::move(problem);
  return model;
}

PortfolioModel build_card_nonconvex_1(const ReturnsData& data, double theta, int psi,
                                      std::optional<std::pair<double, double>> v_bounds) {
  check_data(data);
  if (!(theta > 0.0)) throw BadTheta();
  if (psi < 1) throw BadPsi();
  const int n = data.n_assets();
  const auto [v_lo, v_hi] = v_bounds.value_or(std::pair<double, double>{-1.0, 1.0});

  PortfolioModel model;
  model.kind = PortfolioKind::CardNonconvex1;
  model.theta = theta;
  model.psi = psi;
  model.v_bounds = {v_lo, v_hi};
  const int dim = n + 1;
  model.layout = PortfolioLayout{n, -1, n, dim};

  NonconvexProblem problem;
  problem.x_set = std::make_shared<ProductSet>(std::vector<std::shared_ptr<const FeasibleSet>>{
      std::make_shared<ScaledSimplexLeq>(n, 1.0),
      std::make_shared<Box>(Vec{v_lo}, Vec{v_hi})});
  problem.f = sigmoid_risk_oracle(data, theta, dim, 0.0);
  problem.lower_curvature = problem.f.lipschitz_grad();
  problem.h.push_back(cardinality_row(dim, n, n, psi).as_row());
  model.start.assign(dim, 0.0);
  model.start[n] = std::clamp(0.0, v_lo, v_hi);
  model.problem = std::move(problem);
  return model;
}

PortfolioModel build_card_nonconvex_2(const ReturnsData& data, double theta, int psi) {
  check_data(data);
  if (!(theta > 0.0)) throw BadTheta();
  if (psi < 1) throw BadPsi();
  const int n = data.n_assets();

  PortfolioModel model;
  model.kind = PortfolioKind::CardNonconvex2;
  model.theta = theta;
  model.psi = psi;
  model.layout = PortfolioLayout{n, -1, -1, n};

  NonconvexProblem problem;
  problem.x_set = std::make_shared<ScaledSimplexLeq>(n, 1.0);
  problem.f = sigmoid_risk_oracle(data, theta, n, static_cast<double>(psi));
  problem.lower_curvature = problem.f.lipschitz_grad();
  model.start.assign(n, 0.0);
  model.problem = std::move(problem);
  return model;
}

double risk(const ReturnsData& data, std::span<const double> weights) {
  if (static_cast<int>(weights.size()) < data.n_assets()) throw DimMismatch("risk: weights");
  int bad = 0;
  for (int k = 0; k < data.n_weeks(); ++k) {
    double margin = data.index_returns[k];
    for (int i = 0; i < data.n_assets(); ++i) margin -= data.asset_returns[k][i] * weights[i];
    if (margin > 0.0) ++bad;
  }
  return static_cast<double>(bad) / data.n_weeks();
}

int count_assets(std::span<const double> weights, double tol) {
  if (tol < 0.0) throw InvalidConstant("count_assets: tol must be nonnegative");
  int count = 0;
  for (double w : weights)
    if (w > tol) ++count;
  return count;
}

int card_violation(std::span<const double> weights, int psi, double tol) {
  return std::max(count_assets(weights, tol) - psi, 0);
}

int psi_rule(int n_assets) {
  if (n_assets < 1) throw InvalidConstant("psi_rule: n must be >= 1");
  const double frac = n_assets <= 100 ? 0.2 : 0.05;
  return static_cast<int>(std::floor(frac * n_assets));
}

}  // namespace levelcg
