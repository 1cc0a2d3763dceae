#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "levelcg/models.hpp"

namespace levelcg {

// Where a run's data comes from: a returns CSV, the seeded synthetic returns
// generator, a serialized IMRT directory, or the synthetic IMRT generator.
struct DataSpec {
  enum class Kind { Csv, SyntheticReturns, ImrtDir, ImrtSynthetic };
  Kind kind = Kind::SyntheticReturns;
  std::string path;
  int assets = 50;
  int weeks = 500;
  std::uint64_t seed = 1;
  int angles = 8;
  int voxels = 512;
  int beamlets = 16;
  int structures = 2;
  int apertures_per_angle = 4;
};

struct RunConfig {
  std::string model = "card-free-convex";
  std::string algo = "lcg";
  double eps = 1e-3;
  double mu = 0.9;
  double delta_f = 0.0;  // 0 -> eps
  double delta_h = 0.0;  // 0 -> eps
  int max_outer = 200;
  int max_inner = 100000;
  long total_cgo = -1;  // total CGO iterations across outer loops; -1 = unlimited
  int horizon = 1024;   // DNCG iteration count K
  int j_count = 0;      // IPP outer count; 0 -> ceil(1/eps)
  long warm_budget = 200;  // stage-1 CGO budget for lcg-then-dncg
  double alpha = 0.05;
  double theta = 0.01;
  double phi = 0.005;
  int psi = -1;  // -1 = psi_rule(N)
  double tau_multiplier = 1.0;
  DataSpec data;
  std::string out;
  bool trace = false;
  bool force = false;

  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct RunReport {
  // Canonical report; identical configs and seeds reproduce it byte-for-byte,
  // so wall time stays outside of it.
  nlohmann::json body;
  double wall_seconds = 0.0;
  int exit_code = 0;  // 0 ok, 2 solver failure, 3 config error
};

// CSV with a header row: first column `index_return`, one column per asset,
// one row per week. Tolerates a blank trailing line.
ReturnsData load_returns_csv(const std::string& path);

RunReport run(const RunConfig& config);

// Runs every member, writes <out_dir>/sweep.csv and <out_dir>/sweep.md, and
// returns the consolidated rows. Member failures keep their row.
nlohmann::json sweep(const std::vector<RunConfig>& configs, const std::string& out_dir);

}  // namespace levelcg
