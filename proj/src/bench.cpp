#include "levelcg/bench.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "levelcg/errors.hpp"
#include "levelcg/verify.hpp"

namespace levelcg {

namespace {

using nlohmann::json;

DataSpec data_from_json(const json& j) {
  DataSpec d;
  if (j.contains("csv")) {
    d.kind = DataSpec::Kind::Csv;
    d.path = j.at("csv").get<std::string>();
  } else if (j.contains("synthetic")) {
    d.kind = DataSpec::Kind::SyntheticReturns;
    const json& s = j.at("synthetic");
    d.assets = s.value("assets", d.assets);
    d.weeks = s.value("weeks", d.weeks);
    d.seed = s.value("seed", d.seed);
  } else if (j.contains("imrt_dir")) {
    d.kind = DataSpec::Kind::ImrtDir;
    d.path = j.at("imrt_dir").get<std::string>();
  } else if (j.contains("imrt_synthetic")) {
    d.kind = DataSpec::Kind::ImrtSynthetic;
    const json& s = j.at("imrt_synthetic");
    d.angles = s.value("angles", d.angles);
    d.voxels = s.value("voxels", d.voxels);
    d.beamlets = s.value("beamlets", d.beamlets);
    d.structures = s.value("structures", d.structures);
    d.apertures_per_angle = s.value("apertures_per_angle", d.apertures_per_angle);
    d.seed = s.value("seed", d.seed);
  } else {
    throw Error("config: data must be one of csv / synthetic / imrt_dir / imrt_synthetic");
  }
  return d;
}

json data_to_json(const DataSpec& d) {
  switch (d.kind) {
    case DataSpec::Kind::Csv:
      return {{"csv", d.path}};
    case DataSpec::Kind::SyntheticReturns:
      return {{"synthetic", {{"assets", d.assets}, {"weeks", d.weeks}, {"seed", d.seed}}}};
    case DataSpec::Kind::ImrtDir:
      return {{"imrt_dir", d.path}};
    case DataSpec::Kind::ImrtSynthetic:
      return {{"imrt_synthetic",
               {{"angles", d.angles},
                {"voxels", d.voxels},
                {"beamlets", d.beamlets},
                {"structures", d.structures},
                {"apertures_per_angle", d.apertures_per_angle},
                {"seed", d.seed}}}};
  }
  return {};
}

bool is_imrt_model(const std::string& model) {
  return model == "imrt-convex" || model == "imrt-nonconvex";
}

bool is_convex_model(const std::string& model) {
  return model == "card-free-convex" || model == "card-convex" || model == "imrt-convex";
}

// Fixed-eta smooth view of a convex problem so DNCG can be forced onto it.
NonconvexProblem nonconvex_view(const ConstrainedProblem& problem, double eta) {
  NonconvexProblem out;
  const SaddleRow f = problem.f;
  const int dim = problem.dim();
  out.f = SmoothOracle(
      dim, [f, eta](std::span<const double> x) { return f.eval(x, f.is_smoothable() ? eta : 0.0); },
      f.is_smoothable() ? f.lipschitz_grad(eta) : f.lipschitz_grad(0.0), f.lipschitz_val());
  out.lower_curvature = 0.0;
  out.h = problem.h;
  out.x_set = problem.x_set;
  out.prox_kind = problem.prox_kind;
  return out;
}

struct BuiltModel {
  std::optional<PortfolioModel> portfolio;
  std::optional<ImrtModel> imrt;
  std::optional<ReturnsData> returns;
  std::optional<ImrtInstance> instance;
  int psi = 0;
};

BuiltModel build_model(const RunConfig& cfg) {
  BuiltModel built;
  if (is_imrt_model(cfg.model)) {
    switch (cfg.data.kind) {
      case DataSpec::Kind::ImrtDir:
        built.instance = imrt_load(cfg.data.path);
        break;
      case DataSpec::Kind::ImrtSynthetic:
        built.instance =
            gen_synthetic_imrt(cfg.data.angles, cfg.data.voxels, cfg.data.beamlets,
                               cfg.data.structures, cfg.data.seed, cfg.data.apertures_per_angle);
        break;
      default:
        throw Error("config: IMRT models need imrt_dir or imrt_synthetic data");
    }
    if (cfg.model == "imrt-convex")
      built.imrt = build_imrt_convex(*built.instance, cfg.phi);
    else
      built.imrt = build_imrt_nonconvex(*built.instance, cfg.phi, cfg.theta);
    return built;
  }

  switch (cfg.data.kind) {
    case DataSpec::Kind::Csv:
      built.returns = load_returns_csv(cfg.data.path);
      break;
    case DataSpec::Kind::SyntheticReturns:
      built.returns = gen_synthetic_returns(cfg.data.assets, cfg.data.weeks, cfg.data.seed);
      break;
    default:
      throw Error("config: portfolio models need csv or synthetic data");
  }
  built.psi = cfg.psi > 0 ? cfg.psi : psi_rule(built.returns->n_assets());

  if (cfg.model == "card-free-convex")
    built.portfolio = build_card_free_convex(*built.returns, cfg.alpha);
  else if (cfg.model == "card-free-nonconvex")
    built.portfolio = build_card_free_nonconvex(*built.returns, cfg.theta);
  else if (cfg.model == "card-convex")
    built.portfolio = build_card_convex(*built.returns, cfg.alpha, built.psi);
  else if (cfg.model == "card-nonconvex-1")
    built.portfolio = build_card_nonconvex_1(*built.returns, cfg.theta, built.psi);
  else if (cfg.model == "card-nonconvex-2")
    built.portfolio = build_card_nonconvex_2(*built.returns, cfg.theta, built.psi);
  else
    throw Error("config: unknown model '" + cfg.model + "'");
  return built;
}

json trace_to_json(const std::vector<LevelTraceRow>& trace) {
  json rows = json::array();
  for (const auto& r : trace)
    rows.push_back({{"k", r.k},
                    {"level", r.level},
                    {"lower", r.lower},
                    {"upper", r.upper},
                    {"gamma", r.gamma},
                    {"inner_iters", r.inner_iters}});
  return rows;
}

void write_level_trace_csv(const std::string& path, const std::vector<LevelTraceRow>& trace) {
  std::ofstream out(path, std::ios::binary);
  out << "k,level,lower,upper,gamma,inner_iters\n";
  char buf[160];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%d\n", r.k, r.level, r.lower,
                  r.upper, r.gamma, r.inner_iters);
    out << buf;
  }
}

void write_dncg_trace_csv(const std::string& path, const std::vector<DncgTraceRow>& trace) {
  std::ofstream out(path, std::ios::binary);
  out << "k,wolfe_gap,violation_sq,f_value\n";
  char buf[160];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", r.k, r.wolfe_gap, r.violation_sq,
                  r.f_value);
    out << buf;
  }
}

std::string status_name(SolveStatus s) {
  return s == SolveStatus::Converged ? "converged" : "budget_exhausted";
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  RunConfig cfg;
  cfg.model = j.value("model", cfg.model);
  cfg.algo = j.value("algo", cfg.algo);
  cfg.eps = j.value("eps", cfg.eps);
  cfg.mu = j.value("mu", cfg.mu);
  cfg.delta_f = j.value("delta_f", cfg.delta_f);
  cfg.delta_h = j.value("delta_h", cfg.delta_h);
  if (j.contains("budgets")) {
    const json& b = j.at("budgets");
    cfg.max_outer = b.value("max_outer", cfg.max_outer);
    cfg.max_inner = b.value("max_inner", cfg.max_inner);
    cfg.total_cgo = b.value("total_cgo", cfg.total_cgo);
    cfg.horizon = b.value("k", cfg.horizon);
    cfg.j_count = b.value("j", cfg.j_count);
    cfg.warm_budget = b.value("warm_budget", cfg.warm_budget);
  }
  if (j.contains("params")) {
    const json& p = j.at("params");
    cfg.alpha = p.value("alpha", cfg.alpha);
    cfg.theta = p.value("theta", cfg.theta);
    cfg.phi = p.value("phi", cfg.phi);
    cfg.tau_multiplier = p.value("tau_multiplier", cfg.tau_multiplier);
    if (p.contains("psi")) {
      if (p.at("psi").is_string()) {
        if (p.at("psi").get<std::string>() != "auto")
          throw Error("config: psi must be an integer or \"auto\"");
        cfg.psi = -1;
      } else {
        cfg.psi = p.at("psi").get<int>();
      }
    }
  }
  if (j.contains("data")) cfg.data = data_from_json(j.at("data"));
  cfg.out = j.value("out", cfg.out);
  cfg.trace = j.value("trace", cfg.trace);
  cfg.force = j.value("force", cfg.force);
  return cfg;
}

json RunConfig::to_json() const {
  json j;
  j["model"] = model;
  j["algo"] = algo;
  j["eps"] = eps;
  j["mu"] = mu;
  j["delta_f"] = delta_f;
  j["delta_h"] = delta_h;
  j["budgets"] = {{"max_outer", max_outer}, {"max_inner", max_inner},
                  {"total_cgo", total_cgo}, {"k", horizon},
                  {"j", j_count},           {"warm_budget", warm_budget}};
  j["params"] = {{"alpha", alpha},
                 {"theta", theta},
                 {"phi", phi},
                 {"psi", psi},
                 {"tau_multiplier", tau_multiplier}};
  j["data"] = data_to_json(data);
  j["out"] = out;
  j["trace"] = trace;
  j["force"] = force;
  return j;
}

ReturnsData load_returns_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EmptyData("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, 1, "missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  ReturnsData data;
  {
    std::stringstream ss(line);
    std::string cell;
    int col = 0;
    while (std::getline(ss, cell, ',')) {
      ++col;
      if (col == 1) {
        if (cell != "index_return")
          throw ParseError(1, 1, "header must start with index_return, got '" + cell + "'");
      } else {
        data.asset_names.push_back(cell);
      }
    }
    if (col < 2) throw ParseError(1, 1, "header needs at least one asset column");
  }
  int row = 1;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;  // tolerant of a blank trailing line
    ++row;
    std::stringstream ss(line);
    std::string cell;
    int col = 0;
    Vec values;
    while (std::getline(ss, cell, ',')) {
      ++col;
      try {
        std::size_t pos = 0;
        const double v = std::stod(cell, &pos);
        if (pos != cell.size() || std::isnan(v) || std::isinf(v))
          throw std::invalid_argument(cell);
        values.push_back(v);
      } catch (const std::exception&) {
        throw ParseError(row, col, "expected a finite number, got '" + cell + "'");
      }
    }
    if (values.size() != data.asset_names.size() + 1)
      throw ParseError(row, col, "expected " + std::to_string(data.asset_names.size() + 1) +
                                     " cells");
    data.index_returns.push_back(values[0]);
    data.asset_returns.emplace_back(values.begin() + 1, values.end());
  }
  if (data.index_returns.empty()) throw EmptyData(path + " has no data rows");
  return data;
}

RunReport run(const RunConfig& cfg) {
  RunReport report;
  json& body = report.body;
  body["config"] = cfg.to_json();
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const BuiltModel built = build_model(cfg);
    const bool convex_model = is_convex_model(cfg.model);
    if (convex_model && cfg.algo == "dncg" && !cfg.force)
      throw Error("config: dncg on a convex model needs force=true");
    if (!convex_model && (cfg.algo == "lcg" || cfg.algo == "mlcg") && !cfg.force)
      throw Error("config: " + cfg.algo + " needs a convex model (or force=true)");
    if (cfg.algo == "lcg-then-dncg" && cfg.model != "imrt-nonconvex")
      throw Error("config: lcg-then-dncg is defined for imrt-nonconvex");

    const double delta_f = cfg.delta_f > 0.0 ? cfg.delta_f : cfg.eps;
    const double delta_h = cfg.delta_h > 0.0 ? cfg.delta_h : cfg.eps;
    LevelBudgets budgets{cfg.max_outer, cfg.max_inner, cfg.total_cgo};

    Vec x;
    std::string status = "converged";
    long inner_total = 0;
    int outer_iters = 0;
    json extra;
    std::vector<LevelTraceRow> level_trace;
    std::vector<DncgTraceRow> dncg_trace;
    std::vector<CgoIterate> cgo_trace;

    auto run_level = [&](const ConstrainedProblem& problem, const Vec& start) {
      LevelOptions lopt;
      if (!start.empty()) lopt.x0 = start;
      if (cfg.trace)
        lopt.inner_trace = [&](const CgoIterate& it) { cgo_trace.push_back(it); };
      for (const auto& row : problem.h)
        if (row.constants_estimated()) extra["constants_estimated"] = true;
      if (cfg.algo == "mlcg") {
        const Vec x0 = start.empty() ? problem.x_set->lmo(Vec(problem.dim(), 0.0)) : start;
        const EpsSolution sol = mlcg_solve(problem, x0, cfg.eps, cfg.mu, budgets, lopt);
        x = sol.x;
        status = status_name(sol.status);
        inner_total = sol.inner_iters_total;
        outer_iters = sol.outer_iters;
        level_trace = sol.trace;
        extra["f_gap_bound"] = sol.f_gap_bound;
        extra["level"] = sol.level;
        extra["gamma"] = sol.gamma;
        if (sol.certificate) extra["certificate"] = *sol.certificate;
      } else {
        const EpsSolution sol = lcg_solve(problem, cfg.eps, cfg.mu, budgets, lopt);
        x = sol.x;
        status = status_name(sol.status);
        inner_total = sol.inner_iters_total;
        outer_iters = sol.outer_iters;
        level_trace = sol.trace;
        extra["f_gap_bound"] = sol.f_gap_bound;
        extra["level"] = sol.level;
        extra["gamma"] = sol.gamma;
        if (sol.certificate) extra["certificate"] = *sol.certificate;
      }
    };

    auto run_nonconvex = [&](const NonconvexProblem& problem, const Vec& start) {
      if (cfg.algo == "dncg") {
        DncgOptions opt;
        if (!start.empty()) opt.x0 = start;
        DncgResult res = dncg(problem, cfg.horizon, opt);
        x = res.x_best;
        inner_total = cfg.horizon;
        dncg_trace = std::move(res.trace);
        extra["wolfe_gap"] = res.wolfe_gap;
        extra["violation_sq"] = res.violation_sq;
        extra["c"] = res.c;
        extra["alpha_step"] = res.alpha;
      } else if (cfg.algo == "ipp-lcg") {
        const int j_count =
            cfg.j_count > 0 ? cfg.j_count : static_cast<int>(std::ceil(1.0 / cfg.eps));
        IppOptions opt;
        if (!start.empty()) opt.x0 = start;
        opt.budgets = budgets;
        const IppResult res = ipp_lcg(problem, j_count, delta_f, delta_h, cfg.mu, opt);
        x = res.x_best;
        inner_total = res.inner_iters_total;
        outer_iters = static_cast<int>(res.steps.size());
        extra["j_best"] = res.j_best;
        extra["eps_proximity"] = res.eps_proximity;
        extra["eps_stationarity"] = res.eps_stationarity;
        if (!res.steps.empty()) {
          const KktReport& kkt = res.steps[res.j_best - 1].kkt;
          extra["kkt"] = {{"complementarity", kkt.complementarity},
                          {"stationarity_wolfe", kkt.stationarity_wolfe},
                          {"infeasibility", kkt.infeasibility}};
        }
      } else {
        throw Error("config: algo '" + cfg.algo + "' not valid for a nonconvex model");
      }
    };

    if (built.portfolio.has_value()) {
      const PortfolioModel& model = *built.portfolio;
      if (model.is_convex()) {
        if (cfg.algo == "dncg")
          run_nonconvex(nonconvex_view(model.convex(), cfg.eps), model.start);
        else
          run_level(model.convex(), model.start);
      } else {
        run_nonconvex(model.nonconvex(), model.start);
      }

      const ReturnsData& data = *built.returns;
      const int n = data.n_assets();
      const std::span<const double> weights(x.data(), n);
      json metrics;
      const auto& problem_h = model.is_convex() ? model.convex().h : model.nonconvex().h;
      Vec hv;
      for (const auto& row : problem_h) hv.push_back(row.exact_value(x));
      double objective;
      if (model.is_convex())
        objective = model.convex().f.exact_value(x);
      else
        objective = model.nonconvex().f.value(x);
      metrics["objective"] = objective;
      metrics["constraint_violation_l2"] = norm2_positive_part(hv);
      metrics["risk"] = risk(data, weights);
      metrics["n_assets"] = count_assets(weights);
      metrics["card_violation"] = card_violation(weights, built.psi);
      metrics["psi"] = built.psi;
      body["metrics"] = metrics;
    } else {
      const ImrtModel& model = *built.imrt;
      const ImrtInstance& inst = *built.instance;
      if (cfg.algo == "lcg-then-dncg") {
        const ImrtModel warm = build_imrt_convex(inst, cfg.phi);
        LevelBudgets warm_budgets{cfg.max_outer, cfg.max_inner, cfg.warm_budget};
        const EpsSolution warm_sol = lcg_solve(warm.convex(), cfg.eps, cfg.mu, warm_budgets);
        Vec y0(warm_sol.x.begin(), warm_sol.x.begin() + warm.n_apertures);
        DncgOptions opt;
        opt.x0 = y0;
        DncgResult res = dncg(model.nonconvex(), cfg.horizon, opt);
        x = res.x_best;
        inner_total = warm_sol.inner_iters_total + cfg.horizon;
        dncg_trace = std::move(res.trace);
        level_trace = warm_sol.trace;
        extra["warm_status"] = status_name(warm_sol.status);
        extra["warm_inner_iters"] = warm_sol.inner_iters_total;
        extra["wolfe_gap"] = res.wolfe_gap;
        extra["violation_sq"] = res.violation_sq;
      } else if (model.is_convex()) {
        if (cfg.algo == "dncg")
          run_nonconvex(nonconvex_view(model.convex(), cfg.eps), {});
        else
          run_level(model.convex(), {});
      } else {
        run_nonconvex(model.nonconvex(), {});
      }

      const std::span<const double> y(x.data(), model.n_apertures);
      json metrics;
      const double hs = positive_part(group_sparsity_value(inst, y) - cfg.phi);
      metrics["h_s_l2"] = hs;
      double hc = 0.0;
      if (model.is_convex()) {
        Vec hv;
        const auto& rows = model.convex().h;
        for (std::size_t i = 0; i + 1 < rows.size(); ++i)  // last row is group sparsity
          hv.push_back(rows[i].exact_value(x));
        hc = norm2_positive_part(hv);
        metrics["objective"] = model.convex().f.exact_value(x);
      } else {
        metrics["objective"] = model.nonconvex().f.value(x);
      }
      metrics["h_c_l2"] = hc;
      metrics["constraint_violation_l2"] = std::sqrt(hs * hs + hc * hc);
      json table = json::array();
      for (const auto& c : imrt_criteria_table(inst, y))
        table.push_back({{"criterion", c.index},
                         {"kind", c.underdose ? "underdose" : "overdose"},
                         {"dose", c.dose},
                         {"fraction", c.fraction},
                         {"required", c.required},
                         {"satisfied", c.satisfied}});
      body["criteria_table"] = table;
      body["metrics"] = metrics;
    }

    body["status"] = status;
    body["iterations"] = {{"outer", outer_iters}, {"inner_total", inner_total}};
    body["extra"] = extra;
    body["x"] = x;
    if (cfg.trace && !cfg.out.empty()) {
      const std::string stem = cfg.out + ".trace";
      if (!level_trace.empty()) {
        write_level_trace_csv(stem + ".level.csv", level_trace);
        body["level_trace_file"] = stem + ".level.csv";
      }
      if (!dncg_trace.empty()) {
        write_dncg_trace_csv(stem + ".dncg.csv", dncg_trace);
        body["dncg_trace_file"] = stem + ".dncg.csv";
      }
      if (!cgo_trace.empty()) {
        std::ofstream out(stem + ".cgo.csv", std::ios::binary);
        out << "t,lower,upper,gap,support\n";
        char buf[160];
        for (const auto& it : cgo_trace) {
          std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%d\n", it.t, it.lower,
                        it.upper, it.gap, it.support);
          out << buf;
        }
        body["cgo_trace_file"] = stem + ".cgo.csv";
      }
    } else if (cfg.trace) {
      body["level_trace"] = trace_to_json(level_trace);
    }
    report.exit_code = 0;
  } catch (const ParseError& e) {
    body["status"] = "error";
    body["error"] = e.what();
    report.exit_code = 3;
  } catch (const Error& e) {
    body["status"] = "error";
    body["error"] = e.what();
    const std::string what = e.what();
    report.exit_code = what.rfind("config:", 0) == 0 ? 3 : 2;
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!cfg.out.empty()) {
    std::ofstream out(cfg.out, std::ios::binary);
    out << body.dump(2) << "\n";
  }
  return report;
}

json sweep(const std::vector<RunConfig>& configs, const std::string& out_dir) {
  if (configs.empty()) throw Error("sweep: no configs");
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  json rows = json::array();
  std::vector<RunReport> reports;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    RunConfig cfg = configs[i];
    if (cfg.out.empty()) cfg.out = (fs::path(out_dir) / ("run_" + std::to_string(i) + ".json")).string();
    RunReport rep = run(cfg);
    json row;
    row["model"] = cfg.model;
    row["algo"] = cfg.algo;
    row["phi"] = cfg.phi;
    row["psi"] = cfg.psi;
    row["status"] = rep.body.value("status", "error");
    if (rep.body.contains("metrics")) {
      for (const auto& [key, value] : rep.body.at("metrics").items()) row[key] = value;
    }
    if (rep.body.contains("iterations")) {
      row["outer"] = rep.body.at("iterations").value("outer", 0);
      row["inner_total"] = rep.body.at("iterations").value("inner_total", 0L);
    }
    if (rep.body.contains("error")) row["error"] = rep.body.at("error");
    row["time_s"] = rep.wall_seconds;
    rows.push_back(row);
    reports.push_back(std::move(rep));
  }

  // Column union across rows, order-stable.
  std::vector<std::string> columns;
  for (const auto& row : rows)
    for (const auto& [key, value] : row.items())
      if (std::find(columns.begin(), columns.end(), key) == columns.end())
        columns.push_back(key);

  auto cell = [](const json& row, const std::string& col) -> std::string {
    if (!row.contains(col)) return "";
    const json& v = row.at(col);
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
  };

  {
    std::ofstream csv(fs::path(out_dir) / "sweep.csv", std::ios::binary);
    for (std::size_t c = 0; c < columns.size(); ++c)
      csv << (c ? "," : "") << columns[c];
    csv << "\n";
    for (const auto& row : rows) {
      for (std::size_t c = 0; c < columns.size(); ++c) csv << (c ? "," : "") << cell(row, columns[c]);
      csv << "\n";
    }
  }
  {
    std::ofstream md(fs::path(out_dir) / "sweep.md", std::ios::binary);
    md << "|";
    for (const auto& c : columns) md << " " << c << " |";
    md << "\n|";
    for (std::size_t c = 0; c < columns.size(); ++c) md << " --- |";
    md << "\n";
    for (const auto& row : rows) {
      md << "|";
      for (const auto& c : columns) md << " " << cell(row, c) << " |";
      md << "\n";
    }
  }
  return rows;
}

}  // namespace levelcg
