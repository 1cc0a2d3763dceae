#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "levelcg/nonconvex.hpp"

namespace levelcg {

// ---------------------------------------------------------------------------
// Portfolio selection
// ---------------------------------------------------------------------------

struct ReturnsData {
  std::vector<Vec> asset_returns;  // K rows, each of length N (weekly simple returns)
  Vec index_returns;               // length K
  std::vector<std::string> asset_names;

  int n_weeks() const { return static_cast<int>(index_returns.size()); }
  int n_assets() const {
    return asset_returns.empty() ? 0 : static_cast<int>(asset_returns.front().size());
  }
};

// Deterministic one-factor market model; fixed seed gives identical data.
ReturnsData gen_synthetic_returns(int n_assets, int n_weeks, std::uint64_t seed);

enum class PortfolioKind {
  CardFreeConvex,
  CardFreeNonconvex,
  CardConvex,
  CardNonconvex1,
  CardNonconvex2,
};

// Coordinate layout of the decision vector: asset weights first, then the
// optional VaR variable u and cardinality variable v.
struct PortfolioLayout {
  int n_assets = 0;
  int u_index = -1;
  int v_index = -1;
  int total_dim = 0;
};

struct PortfolioModel {
  PortfolioKind kind;
  std::variant<ConstrainedProblem, NonconvexProblem> problem;
  PortfolioLayout layout;
  double alpha = 0.0;
  double theta = 0.0;
  int psi = 0;
  std::pair<double, double> u_bounds{0.0, 0.0};
  std::pair<double, double> v_bounds{0.0, 0.0};
  // Suggested start: zero weights, u at the empirical (1-alpha) index quantile.
  Vec start;

  const ConstrainedProblem& convex() const { return std::get<ConstrainedProblem>(problem); }
  const NonconvexProblem& nonconvex() const { return std::get<NonconvexProblem>(problem); }
  bool is_convex() const { return std::holds_alternative<ConstrainedProblem>(problem); }
};

PortfolioModel build_card_free_convex(
    const ReturnsData& data, double alpha,
    std::optional<std::pair<double, double>> u_bounds = std::nullopt);

PortfolioModel build_card_free_nonconvex(const ReturnsData& data, double theta);

PortfolioModel build_card_convex(
    const ReturnsData& data, double alpha, int psi,
    std::optional<std::pair<double, double>> u_bounds = std::nullopt,
    std::optional<std::pair<double, double>> v_bounds = std::nullopt);

PortfolioModel build_card_nonconvex_1(
    const ReturnsData& data, double theta, int psi,
    std::optional<std::pair<double, double>> v_bounds = std::nullopt);

PortfolioModel build_card_nonconvex_2(const ReturnsData& data, double theta, int psi);

// Sample average of 1{R_k - <r_k, x> > 0} (strict inequality).
double risk(const ReturnsData& data, std::span<const double> weights);

int count_assets(std::span<const double> weights, double tol = 1e-6);
int card_violation(std::span<const double> weights, int psi, double tol = 1e-6);

// Psi = floor(0.2 N) for N <= 100, floor(0.05 N) otherwise.
int psi_rule(int n_assets);

// ---------------------------------------------------------------------------
// Synthetic IMRT
// ---------------------------------------------------------------------------

struct ImrtCriterion {
  int structure = 0;
  bool underdose = true;
  double dose = 0.0;      // clinical dose threshold b_k
  double quantile = 0.0;  // p_k
  double tau_lo = 0.0;
  double tau_hi = 0.0;
  double weight = 1.0;    // w_k in the nonconvex objective
};

struct ImrtInstance {
  int n_angles = 0;
  int n_beamlets = 0;  // per angle
  int n_voxels = 0;
  // Per angle, row-major n_voxels x n_beamlets unit-intensity dose matrix.
  std::vector<Vec> dose;
  std::vector<std::vector<int>> structures;  // voxel index sets
  std::vector<ImrtCriterion> criteria;
  // Per angle, apertures as [lo, hi) beamlet intervals.
  std::vector<std::vector<std::pair<int, int>>> apertures;
  double phi = 0.0;
  // Voxelwise objective parameters (underdose/overdose thresholds and weights).
  Vec t_under, t_over, w_under, w_over;

  int total_apertures() const;
  // Dose to every voxel from aperture `e` of angle `a` at unit intensity.
  Vec aperture_column(int angle, int aperture) const;
};

ImrtInstance gen_synthetic_imrt(int n_angles = 8, int n_voxels = 512, int n_beamlets = 16,
                                int n_structures = 2, std::uint64_t seed = 1,
                                int apertures_per_angle = 4);

// Directory of CSV dose matrices plus a JSON manifest; see README for the schema.
void imrt_save(const ImrtInstance& instance, const std::string& dir);
ImrtInstance imrt_load(const std::string& dir);

struct ImrtModel {
  std::variant<ConstrainedProblem, NonconvexProblem> problem;
  int n_apertures = 0;  // decision vector: y block, then tau block (convex only)
  int n_criteria = 0;
  std::vector<std::vector<int>> groups;  // aperture indices per angle
  double phi = 0.0;

  const ConstrainedProblem& convex() const { return std::get<ConstrainedProblem>(problem); }
  const NonconvexProblem& nonconvex() const { return std::get<NonconvexProblem>(problem); }
  bool is_convex() const { return std::holds_alternative<ConstrainedProblem>(problem); }
};

ImrtModel build_imrt_convex(const ImrtInstance& instance, double phi);
ImrtModel build_imrt_nonconvex(const ImrtInstance& instance, double phi, double theta,
                               Vec weights = {});

// z_v for all voxels at intensities y.
Vec imrt_doses(const ImrtInstance& instance, std::span<const double> y);
// sum over angles of the maximal aperture intensity.
double group_sparsity_value(const ImrtInstance& instance, std::span<const double> y);

struct CriterionOutcome {
  int index = 0;
  bool underdose = true;
  double dose = 0.0;
  double fraction = 0.0;  // achieved voxel fraction at the dose threshold
  double required = 0.0;  // 1 - p_k for underdose, p_k for overdose
  bool satisfied = false;
};

std::vector<CriterionOutcome> imrt_criteria_table(const ImrtInstance& instance,
                                                  std::span<const double> y);

}  // namespace levelcg
