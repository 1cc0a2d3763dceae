#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "levelcg/bench.hpp"
#include "levelcg/errors.hpp"

namespace {

int cmd_solve(const std::string& config_path, const nlohmann::json& overrides) {
  nlohmann::json raw = nlohmann::json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "cannot open config " << config_path << "\n";
      return 3;
    }
    try {
      raw = nlohmann::json::parse(in);
    } catch (const std::exception& e) {
      std::cerr << "config parse error: " << e.what() << "\n";
      return 3;
    }
  }
  // Flags override the JSON config, recursively for the nested sections.
  raw.merge_patch(overrides);
  levelcg::RunConfig cfg;
  try {
    cfg = levelcg::RunConfig::from_json(raw);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  }
  const levelcg::RunReport report = levelcg::run(cfg);
  std::cout << report.body.dump(2) << "\n";
  std::fprintf(stdout, "wall_time_s: %.3f\n", report.wall_seconds);
  if (!cfg.out.empty()) std::cout << "report written to " << cfg.out << "\n";
  return report.exit_code;
}

int cmd_sweep(const std::vector<std::string>& config_paths, const std::string& out_dir) {
  std::vector<levelcg::RunConfig> configs;
  for (const auto& path : config_paths) {
    std::ifstream in(path);
    if (!in) {
      std::cerr << "cannot open config " << path << "\n";
      return 3;
    }
    try {
      configs.push_back(levelcg::RunConfig::from_json(nlohmann::json::parse(in)));
    } catch (const std::exception& e) {
      std::cerr << "config error in " << path << ": " << e.what() << "\n";
      return 3;
    }
  }
  try {
    const nlohmann::json rows = levelcg::sweep(configs, out_dir);
    std::cout << rows.dump(2) << "\n";
    std::cout << "sweep table written to " << out_dir << "/sweep.csv and sweep.md\n";
  } catch (const std::exception& e) {
    std::cerr << "sweep error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Projection-free level conditional gradient solver toolkit"};
  app.require_subcommand(1);

  // solve
  auto* solve = app.add_subcommand("solve", "run one configured solve and write a JSON report");
  std::string config_path;
  solve->add_option("--config", config_path, "JSON run configuration");
  nlohmann::json overrides = nlohmann::json::object();
  std::string model, algo, data_csv, psi, out;
  double eps = 0, mu = 0, phi = 0, theta = 0;
  int max_outer = 0, max_inner = 0, horizon = 0;
  long total_cgo = 0;
  std::uint64_t seed = 0;
  bool trace = false, force = false;
  solve->add_option("--model", model, "model kind");
  solve->add_option("--algo", algo, "lcg | mlcg | ipp-lcg | dncg | lcg-then-dncg");
  solve->add_option("--data", data_csv, "returns CSV path");
  solve->add_option("--eps", eps, "target tolerance");
  solve->add_option("--mu", mu, "level parameter in (1/2,1)");
  solve->add_option("--psi", psi, "cardinality cap or 'auto'");
  solve->add_option("--phi", phi, "group sparsity budget");
  solve->add_option("--theta", theta, "sigmoid temperature");
  solve->add_option("--max-outer", max_outer, "outer iteration budget");
  solve->add_option("--max-inner", max_inner, "per-call CGO iteration budget");
  solve->add_option("--total-cgo", total_cgo, "total CGO iteration budget");
  solve->add_option("--k", horizon, "DNCG iteration count");
  solve->add_option("--seed", seed, "synthetic data seed");
  solve->add_option("--out", out, "report output path");
  solve->add_flag("--trace", trace, "emit level/gap traces");
  solve->add_flag("--force", force, "override the model/algorithm compatibility check");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "run several configs and emit one table");
  std::vector<std::string> sweep_configs;
  std::string sweep_out = "sweep_out";
  sweep_cmd->add_option("--configs", sweep_configs, "JSON config files")->required();
  sweep_cmd->add_option("--out-dir", sweep_out, "output directory");

  // gen-imrt
  auto* gen = app.add_subcommand("gen-imrt", "generate and serialize a synthetic IMRT instance");
  std::string gen_out = "imrt_instance";
  int g_angles = 8, g_voxels = 512, g_beamlets = 16, g_structures = 2, g_apertures = 4;
  std::uint64_t g_seed = 1;
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--angles", g_angles, "number of angles");
  gen->add_option("--voxels", g_voxels, "number of voxels");
  gen->add_option("--beamlets", g_beamlets, "beamlets per angle");
  gen->add_option("--structures", g_structures, "tumor structures");
  gen->add_option("--apertures", g_apertures, "apertures per angle");
  gen->add_option("--seed", g_seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  if (solve->parsed()) {
    if (!model.empty()) overrides["model"] = model;
    if (!algo.empty()) overrides["algo"] = algo;
    if (!data_csv.empty()) overrides["data"] = {{"csv", data_csv}};
    if (solve->count("--eps")) overrides["eps"] = eps;
    if (solve->count("--mu")) overrides["mu"] = mu;
    if (solve->count("--phi")) overrides["params"]["phi"] = phi;
    if (solve->count("--theta")) overrides["params"]["theta"] = theta;
    if (!psi.empty()) {
      if (psi == "auto")
        overrides["params"]["psi"] = "auto";
      else
        overrides["params"]["psi"] = std::stoi(psi);
    }
    if (solve->count("--max-outer")) overrides["budgets"]["max_outer"] = max_outer;
    if (solve->count("--max-inner")) overrides["budgets"]["max_inner"] = max_inner;
    if (solve->count("--total-cgo")) overrides["budgets"]["total_cgo"] = total_cgo;
    if (solve->count("--k")) overrides["budgets"]["k"] = horizon;
    if (!out.empty()) overrides["out"] = out;
    if (trace) overrides["trace"] = true;
    if (force) overrides["force"] = true;
    if (solve->count("--seed")) {
      if (overrides.contains("data") && overrides["data"].contains("csv"))
        std::cerr << "--seed has no effect with --data csv\n";
      else
        overrides["data"]["synthetic"]["seed"] = seed;
    }
    return cmd_solve(config_path, overrides);
  }
  if (sweep_cmd->parsed()) return cmd_sweep(sweep_configs, sweep_out);
  if (gen->parsed()) {
    try {
      const levelcg::ImrtInstance inst = levelcg::gen_synthetic_imrt(
          g_angles, g_voxels, g_beamlets, g_structures, g_seed, g_apertures);
      levelcg::imrt_save(inst, gen_out);
      std::cout << "instance written to " << gen_out << " (" << inst.total_apertures()
                << " apertures, " << inst.criteria.size() << " criteria)\n";
    } catch (const std::exception& e) {
      std::cerr << "gen-imrt error: " << e.what() << "\n";
      return 2;
    }
    return 0;
  }
  return 0;
}
