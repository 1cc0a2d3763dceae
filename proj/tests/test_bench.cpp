#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "levelcg/bench.hpp"
#include "levelcg/errors.hpp"

using namespace levelcg;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = (fs::temp_directory_path() / name).string();
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

RunConfig synthetic_config(const std::string& model, const std::string& algo) {
  RunConfig cfg;
  cfg.model = model;
  cfg.algo = algo;
  cfg.data.kind = DataSpec::Kind::SyntheticReturns;
  cfg.data.assets = 20;
  cfg.data.weeks = 120;
  cfg.data.seed = 7;
  cfg.total_cgo = 100;
  cfg.horizon = 400;
  return cfg;
}

}  // namespace

TEST_CASE("load_returns_csv parses the documented schema") {
  const std::string path = write_temp("levelcg_returns.csv",
                                      "index_return,AAA,BBB\n"
                                      "0.01,0.02,-0.005\n"
                                      "-0.002,0.001,0.003\n"
                                      "0.004,-0.01,0.02\n"
                                      "\n");
  const ReturnsData data = load_returns_csv(path);
  CHECK(data.n_weeks() == 3);
  CHECK(data.n_assets() == 2);
  CHECK(data.asset_names == std::vector<std::string>{"AAA", "BBB"});
  CHECK(data.asset_returns[2][1] == doctest::Approx(0.02));
}

TEST_CASE("load_returns_csv rejects bad input with locations") {
  const std::string missing_header =
      write_temp("levelcg_bad1.csv", "0.01,0.02\n0.02,0.03\n");
  CHECK_THROWS_AS(load_returns_csv(missing_header), ParseError);

  const std::string bad_cell = write_temp("levelcg_bad2.csv",
                                          "index_return,AAA\n"
                                          "0.01,0.02\n"
                                          "0.02,oops\n");
  try {
    load_returns_csv(bad_cell);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.row == 3);
    CHECK(e.col == 2);
  }

  const std::string empty = write_temp("levelcg_bad3.csv", "index_return,AAA\n");
  CHECK_THROWS_AS(load_returns_csv(empty), EmptyData);
}

TEST_CASE("run config json round trip") {
  RunConfig cfg = synthetic_config("card-convex", "lcg");
  cfg.psi = 4;
  cfg.trace = true;
  const RunConfig back = RunConfig::from_json(cfg.to_json());
  CHECK(back.model == cfg.model);
  CHECK(back.algo == cfg.algo);
  CHECK(back.psi == 4);
  CHECK(back.total_cgo == 100);
  CHECK(back.data.seed == 7);
  CHECK(back.trace);
  CHECK_THROWS(RunConfig::from_json(nlohmann::json{{"data", {{"bogus", 1}}}}));
}

TEST_CASE("bench run produces in-range metrics and deterministic reports") {
  RunConfig cfg = synthetic_config("card-free-convex", "lcg");
  cfg.out = (fs::temp_directory_path() / "levelcg_report_a.json").string();
  const RunReport a = run(cfg);
  CHECK(a.exit_code == 0);
  const double risk_val = a.body.at("metrics").at("risk").get<double>();
  CHECK(risk_val >= 0.0);
  CHECK(risk_val <= 1.0);
  CHECK(a.body.at("metrics").at("n_assets").get<int>() <= 20);
  CHECK(a.body.at("status").get<std::string>() != "error");

  RunConfig cfg2 = cfg;
  cfg2.out = (fs::temp_directory_path() / "levelcg_report_b.json").string();
  const RunReport b = run(cfg2);
  // Same seed, same config: byte-identical bodies (paths aside).
  nlohmann::json body_a = a.body;
  nlohmann::json body_b = b.body;
  body_a["config"].erase("out");
  body_b["config"].erase("out");
  CHECK(body_a.dump() == body_b.dump());
  CHECK(slurp(cfg.out).find("wall") == std::string::npos);
}

TEST_CASE("cardinality-constrained run selects no more assets than the free run") {
  const RunReport free_run = run(synthetic_config("card-free-convex", "lcg"));
  const RunReport card_run = run(synthetic_config("card-convex", "lcg"));
  REQUIRE(free_run.exit_code == 0);
  REQUIRE(card_run.exit_code == 0);
  const int n_free = free_run.body.at("metrics").at("n_assets").get<int>();
  const int n_card = card_run.body.at("metrics").at("n_assets").get<int>();
  CHECK(n_card <= n_free);
}

TEST_CASE("dncg on card-nonconvex-2 meets the cardinality cap") {
  RunConfig cfg = synthetic_config("card-nonconvex-2", "dncg");
  cfg.horizon = 1024;
  const RunReport rep = run(cfg);
  REQUIRE(rep.exit_code == 0);
  CHECK(rep.body.at("metrics").at("card_violation").get<int>() == 0);
}

TEST_CASE("incompatible algorithm and model is a config error unless forced") {
  RunConfig cfg = synthetic_config("card-free-convex", "dncg");
  const RunReport rep = run(cfg);
  CHECK(rep.exit_code == 3);
  CHECK(rep.body.at("status").get<std::string>() == "error");
  cfg.force = true;
  cfg.horizon = 64;
  const RunReport forced = run(cfg);
  CHECK(forced.exit_code == 0);
}

TEST_CASE("sweep preserves order and keeps partial results") {
  const std::string dir = (fs::temp_directory_path() / "levelcg_sweep").string();
  std::vector<RunConfig> configs;
  configs.push_back(synthetic_config("card-free-convex", "lcg"));
  configs.push_back(synthetic_config("card-free-convex", "dncg"));  // rejected: no force
  configs.push_back(synthetic_config("card-convex", "lcg"));
  const nlohmann::json rows = sweep(configs, dir);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].at("model") == "card-free-convex");
  CHECK(rows[1].at("status") == "error");
  CHECK(rows[2].at("model") == "card-convex");
  CHECK(fs::exists(fs::path(dir) / "sweep.csv"));
  CHECK(fs::exists(fs::path(dir) / "sweep.md"));
  CHECK_THROWS(sweep({}, dir));
}

TEST_CASE("imrt synthetic run emits a criteria table") {
  RunConfig cfg;
  cfg.model = "imrt-convex";
  cfg.algo = "lcg";
  cfg.data.kind = DataSpec::Kind::ImrtSynthetic;
  cfg.data.angles = 3;
  cfg.data.voxels = 64;
  cfg.data.beamlets = 8;
  cfg.data.structures = 2;
  cfg.data.apertures_per_angle = 2;
  cfg.data.seed = 5;
  cfg.phi = 0.4;
  cfg.total_cgo = 60;
  const RunReport rep = run(cfg);
  REQUIRE(rep.exit_code == 0);
  CHECK(rep.body.contains("criteria_table"));
  CHECK(rep.body.at("criteria_table").size() == 3);
  CHECK(rep.body.at("metrics").contains("h_s_l2"));
  CHECK(rep.body.at("metrics").contains("h_c_l2"));
}

TEST_CASE("mlcg through bench on a feasible portfolio start") {
  RunConfig cfg = synthetic_config("card-free-convex", "mlcg");
  cfg.eps = 5e-2;
  cfg.max_inner = 200000;
  const RunReport rep = run(cfg);
  CHECK(rep.exit_code == 0);
  CHECK(rep.body.at("metrics").contains("risk"));
}

TEST_CASE("ipp-lcg through bench on card-nonconvex-1") {
  RunConfig cfg = synthetic_config("card-nonconvex-1", "ipp-lcg");
  cfg.data.assets = 10;
  cfg.data.weeks = 80;
  cfg.eps = 5e-2;
  cfg.j_count = 3;
  cfg.total_cgo = 600;
  const RunReport rep = run(cfg);
  CHECK(rep.exit_code == 0);
  CHECK(rep.body.at("extra").contains("j_best"));
  CHECK(rep.body.at("extra").contains("kkt"));
  CHECK(rep.body.at("metrics").at("n_assets").get<int>() <= 10);
}

TEST_CASE("solver failures surface as structured reports with exit code 2") {
  // MLCG needs a feasible start; the zero-dose IMRT start violates the
  // underdose rows.
  RunConfig cfg;
  cfg.model = "imrt-convex";
  cfg.algo = "mlcg";
  cfg.data.kind = DataSpec::Kind::ImrtSynthetic;
  cfg.data.angles = 2;
  cfg.data.voxels = 32;
  cfg.data.beamlets = 4;
  cfg.data.seed = 3;
  cfg.total_cgo = 10;
  const RunReport rep = run(cfg);
  CHECK(rep.exit_code == 2);
  CHECK(rep.body.at("status").get<std::string>() == "error");
  CHECK(rep.body.contains("error"));
}
