#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "levelcg/bench.hpp"
#include "levelcg/verify.hpp"

namespace py = pybind11;
using namespace levelcg;

namespace {

// Wraps a python callable returning (value, grad) as a SmoothOracle.
SmoothOracle make_oracle(int dim, py::function fn, double lipschitz_grad, double lipschitz_val) {
  auto holder = std::make_shared<py::function>(std::move(fn));
  return SmoothOracle(
      dim,
      [holder](std::span<const double> x) {
        const py::tuple out = (*holder)(Vec(x.begin(), x.end()));
        return Eval{out[0].cast<double>(), out[1].cast<Vec>()};
      },
      lipschitz_grad, lipschitz_val);
}

}  // namespace

PYBIND11_MODULE(levelcg_py, m) {
  m.doc() = "Projection-free level conditional gradient solvers";

  py::register_exception<Error>(m, "LevelcgError");

  // sets
  py::class_<FeasibleSet, std::shared_ptr<FeasibleSet>>(m, "FeasibleSet")
      .def("dim", &FeasibleSet::dim)
      .def("lmo", [](const FeasibleSet& s, const Vec& c) { return s.lmo(c); })
      .def("diameter", &FeasibleSet::diameter)
      .def("contains",
           [](const FeasibleSet& s, const Vec& x, double tol) { return s.contains(x, tol); },
           py::arg("x"), py::arg("tol") = 1e-9);
  py::class_<ScaledSimplexLeq, FeasibleSet, std::shared_ptr<ScaledSimplexLeq>>(
      m, "ScaledSimplexLeq")
      .def(py::init<int, double>(), py::arg("dim"), py::arg("radius"));
  py::class_<StandardSimplex, FeasibleSet, std::shared_ptr<StandardSimplex>>(m, "StandardSimplex")
      .def(py::init<int>());
  py::class_<Box, FeasibleSet, std::shared_ptr<Box>>(m, "Box")
      .def(py::init<Vec, Vec>(), py::arg("lower"), py::arg("upper"));
  py::class_<ProductSet, FeasibleSet, std::shared_ptr<ProductSet>>(m, "ProductSet")
      .def(py::init<std::vector<std::shared_ptr<const FeasibleSet>>>());

  m.def("lmo_scaled_simplex",
        [](const Vec& cost, double radius) { return lmo_scaled_simplex(cost, radius); });
  m.def("lmo_box", [](const Vec& cost, const Box& box) { return lmo_box(cost, box); });
  m.def("project_simplex", [](const Vec& v) { return project_simplex(v); });

  py::enum_<ProxKind>(m, "ProxKind")
      .value("Entropy", ProxKind::Entropy)
      .value("Euclidean", ProxKind::Euclidean);
  py::class_<SimplexProx>(m, "SimplexProx")
      .def(py::init<ProxKind, int>())
      .def("apply", [](const SimplexProx& p, const Vec& r, const Vec& g, double tau) {
        return p.apply(r, g, tau);
      });

  // oracles
  py::class_<SmoothOracle>(m, "SmoothOracle")
      .def(py::init(&make_oracle), py::arg("dim"), py::arg("fn"), py::arg("lipschitz_grad"),
           py::arg("lipschitz_val"))
      .def_static("affine", &SmoothOracle::affine)
      .def_static("zero", &SmoothOracle::zero)
      .def("value", [](const SmoothOracle& o, const Vec& x) { return o.value(x); })
      .def("grad", [](const SmoothOracle& o, const Vec& x) { return o.eval(x).grad; })
      .def("dim", &SmoothOracle::dim);
  py::class_<SaddleRow>(m, "SaddleRow")
      .def_static("smooth", &SaddleRow::smooth)
      .def("exact_value", [](const SaddleRow& r, const Vec& x) { return r.exact_value(x); })
      .def("value",
           [](const SaddleRow& r, const Vec& x, double eta) { return r.eval(x, eta).value; },
           py::arg("x"), py::arg("eta") = 0.0)
      .def("is_smoothable", &SaddleRow::is_smoothable);
  py::class_<HingeSumOracle>(m, "HingeSumOracle")
      .def(py::init<Vec, double, std::vector<Vec>, Vec>(), py::arg("slope0"), py::arg("const0"),
           py::arg("slopes"), py::arg("offsets"))
      .def("as_row", &HingeSumOracle::as_row);
  py::class_<GroupMaxSumOracle>(m, "GroupMaxSumOracle")
      .def(py::init<int, std::vector<std::vector<int>>, double>())
      .def("as_row", &GroupMaxSumOracle::as_row);

  m.def("smoothed_hinge_eval", &smoothed_hinge_eval);
  m.def("smoothed_groupmax_eval",
        [](double eta, const Vec& v) { return smoothed_groupmax_eval(eta, v); });
  m.def("eta_schedule", &eta_schedule);
  m.def("fd_check", &fd_check);

  // cgo
  py::class_<SaddleProblem>(m, "SaddleProblem")
      .def_readonly("m_bar", &SaddleProblem::m_bar)
      .def_readonly("d_x", &SaddleProblem::d_x)
      .def_readonly("v_bar", &SaddleProblem::v_bar);
  m.def(
      "make_saddle_problem",
      [](SaddleRow f, std::vector<SaddleRow> h, std::shared_ptr<const FeasibleSet> set,
         ProxKind kind) { return make_saddle_problem(std::move(f), std::move(h), std::move(set), kind); },
      py::arg("f_bar"), py::arg("h_bar"), py::arg("x_set"),
      py::arg("prox_kind") = ProxKind::Entropy);
  py::class_<CgoParams>(m, "CgoParams")
      .def_readonly("alpha", &CgoParams::alpha)
      .def_readonly("lam", &CgoParams::lambda)
      .def_readonly("tau", &CgoParams::tau);
  m.def("cgo_params", &cgo_params);
  py::class_<CgoOptions>(m, "CgoOptions")
      .def(py::init<>())
      .def_readwrite("epsilon", &CgoOptions::epsilon)
      .def_readwrite("mu", &CgoOptions::mu)
      .def_readwrite("max_iter", &CgoOptions::max_iter)
      .def_readwrite("tau_multiplier", &CgoOptions::tau_multiplier);
  py::class_<CgoOutput>(m, "CgoOutput")
      .def_readonly("x", &CgoOutput::x)
      .def_readonly("z", &CgoOutput::z)
      .def_readonly("gamma", &CgoOutput::gamma)
      .def_readonly("lower", &CgoOutput::lower)
      .def_readonly("upper", &CgoOutput::upper)
      .def_readonly("iterations", &CgoOutput::iterations)
      .def_readonly("truncated", &CgoOutput::truncated);
  m.def("cgo_solve",
        [](const SaddleProblem& p, const CgoOptions& o) { return cgo_solve(p, o); });
  m.def("cgo_solve_nonsmooth", [](const SaddleProblem& p, const CgoOptions& o) {
    return cgo_solve_nonsmooth(p, o);
  });

  // level
  py::class_<ConstrainedProblem>(m, "ConstrainedProblem")
      .def(py::init([](SaddleRow f, std::vector<SaddleRow> h,
                       std::shared_ptr<const FeasibleSet> set) {
             ConstrainedProblem p;
             p.f = std::move(f);
             p.h = std::move(h);
             p.x_set = std::move(set);
             return p;
           }),
           py::arg("f"), py::arg("h"), py::arg("x_set"))
      .def("dim", &ConstrainedProblem::dim);
  m.def("init_level",
        [](const ConstrainedProblem& p, const Vec& x0) { return init_level(p, x0); });
  m.def("build_level_subproblem", &build_level_subproblem);
  py::class_<LevelBudgets>(m, "LevelBudgets")
      .def(py::init<>())
      .def_readwrite("max_outer", &LevelBudgets::max_outer)
      .def_readwrite("max_inner", &LevelBudgets::max_inner)
      .def_readwrite("max_inner_total", &LevelBudgets::max_inner_total);
  py::enum_<SolveStatus>(m, "SolveStatus")
      .value("Converged", SolveStatus::Converged)
      .value("BudgetExhausted", SolveStatus::BudgetExhausted);
  py::class_<LevelTraceRow>(m, "LevelTraceRow")
      .def_readonly("k", &LevelTraceRow::k)
      .def_readonly("level", &LevelTraceRow::level)
      .def_readonly("lower", &LevelTraceRow::lower)
      .def_readonly("upper", &LevelTraceRow::upper)
      .def_readonly("gamma", &LevelTraceRow::gamma);
  py::class_<EpsSolution>(m, "EpsSolution")
      .def_readonly("x", &EpsSolution::x)
      .def_readonly("f_gap_bound", &EpsSolution::f_gap_bound)
      .def_readonly("infeasibility", &EpsSolution::infeasibility)
      .def_readonly("certificate", &EpsSolution::certificate)
      .def_readonly("outer_iters", &EpsSolution::outer_iters)
      .def_readonly("inner_iters_total", &EpsSolution::inner_iters_total)
      .def_readonly("status", &EpsSolution::status)
      .def_readonly("level", &EpsSolution::level)
      .def_readonly("trace", &EpsSolution::trace);
  m.def(
      "lcg_solve",
      [](const ConstrainedProblem& p, double eps, double mu, const LevelBudgets& b) {
        return lcg_solve(p, eps, mu, b);
      },
      py::arg("problem"), py::arg("epsilon"), py::arg("mu"),
      py::arg("budgets") = LevelBudgets{});
  m.def(
      "mlcg_solve",
      [](const ConstrainedProblem& p, Vec x0, double eps, double mu, const LevelBudgets& b) {
        return mlcg_solve(p, std::move(x0), eps, mu, b);
      },
      py::arg("problem"), py::arg("x0"), py::arg("epsilon"), py::arg("mu"),
      py::arg("budgets") = LevelBudgets{});
  m.def("optimality_certificate", [](double gamma, const Vec& z, double infeas) {
    return optimality_certificate(gamma, z, infeas);
  });

  // nonconvex
  py::class_<NonconvexProblem>(m, "NonconvexProblem")
      .def(py::init([](SmoothOracle f, double lower_curvature, std::vector<SaddleRow> h,
                       std::shared_ptr<const FeasibleSet> set) {
             NonconvexProblem p;
             p.f = std::move(f);
             p.lower_curvature = lower_curvature;
             p.h = std::move(h);
             p.x_set = std::move(set);
             return p;
           }),
           py::arg("f"), py::arg("lower_curvature"), py::arg("h"), py::arg("x_set"));
  m.def("build_prox_subproblem", [](const NonconvexProblem& p, const Vec& center) {
    return build_prox_subproblem(p, center);
  });
  py::class_<KktReport>(m, "KktReport")
      .def_readonly("complementarity", &KktReport::complementarity)
      .def_readonly("stationarity_wolfe", &KktReport::stationarity_wolfe)
      .def_readonly("infeasibility", &KktReport::infeasibility);
  m.def("kkt_measures", [](const NonconvexProblem& p, const Vec& x, const Vec& y) {
    return kkt_measures(p, x, y);
  });
  m.def("wolfe_gap", [](const NonconvexProblem& p, const Vec& x, const Vec& y) {
    return wolfe_gap(p, x, y);
  });
  py::class_<DncgResult>(m, "DncgResult")
      .def_readonly("x_best", &DncgResult::x_best)
      .def_readonly("wolfe_gap", &DncgResult::wolfe_gap)
      .def_readonly("violation_sq", &DncgResult::violation_sq)
      .def_readonly("x_final", &DncgResult::x_final)
      .def_readonly("c", &DncgResult::c)
      .def_readonly("alpha", &DncgResult::alpha);
  m.def(
      "dncg",
      [](const NonconvexProblem& p, int horizon, std::optional<Vec> x0) {
        DncgOptions opt;
        opt.x0 = std::move(x0);
        return dncg(p, horizon, opt);
      },
      py::arg("problem"), py::arg("horizon"), py::arg("x0") = std::nullopt);
  py::class_<IppResult>(m, "IppResult")
      .def_readonly("x_best", &IppResult::x_best)
      .def_readonly("j_best", &IppResult::j_best)
      .def_readonly("inner_iters_total", &IppResult::inner_iters_total)
      .def_readonly("eps_proximity", &IppResult::eps_proximity)
      .def_readonly("eps_stationarity", &IppResult::eps_stationarity);
  m.def(
      "ipp_lcg",
      [](const NonconvexProblem& p, int outer, double df, double dh, double mu,
         std::optional<Vec> x0) {
        IppOptions opt;
        opt.x0 = std::move(x0);
        return ipp_lcg(p, outer, df, dh, mu, opt);
      },
      py::arg("problem"), py::arg("outer_count"), py::arg("delta_f"), py::arg("delta_h"),
      py::arg("mu"), py::arg("x0") = std::nullopt);

  // models
  py::class_<ReturnsData>(m, "ReturnsData")
      .def(py::init<>())
      .def_readwrite("asset_returns", &ReturnsData::asset_returns)
      .def_readwrite("index_returns", &ReturnsData::index_returns)
      .def_readwrite("asset_names", &ReturnsData::asset_names)
      .def("n_weeks", &ReturnsData::n_weeks)
      .def("n_assets", &ReturnsData::n_assets);
  m.def("gen_synthetic_returns", &gen_synthetic_returns);
  py::class_<PortfolioModel>(m, "PortfolioModel")
      .def_readonly("alpha", &PortfolioModel::alpha)
      .def_readonly("theta", &PortfolioModel::theta)
      .def_readonly("psi", &PortfolioModel::psi)
      .def("is_convex", &PortfolioModel::is_convex)
      .def("convex", &PortfolioModel::convex)
      .def("nonconvex", &PortfolioModel::nonconvex);
  m.def("build_card_free_convex", &build_card_free_convex, py::arg("data"), py::arg("alpha"),
        py::arg("u_bounds") = std::nullopt);
  m.def("build_card_free_nonconvex", &build_card_free_nonconvex);
  m.def("build_card_convex", &build_card_convex, py::arg("data"), py::arg("alpha"),
        py::arg("psi"), py::arg("u_bounds") = std::nullopt, py::arg("v_bounds") = std::nullopt);
  m.def("build_card_nonconvex_1", &build_card_nonconvex_1, py::arg("data"), py::arg("theta"),
        py::arg("psi"), py::arg("v_bounds") = std::nullopt);
  m.def("build_card_nonconvex_2", &build_card_nonconvex_2);
  m.def("risk", [](const ReturnsData& d, const Vec& x) { return risk(d, x); });
  m.def(
      "count_assets", [](const Vec& x, double tol) { return count_assets(x, tol); },
      py::arg("x"), py::arg("tol") = 1e-6);
  m.def(
      "card_violation",
      [](const Vec& x, int psi, double tol) { return card_violation(x, psi, tol); },
      py::arg("x"), py::arg("psi"), py::arg("tol") = 1e-6);
  m.def("psi_rule", &psi_rule);

  py::class_<ImrtInstance>(m, "ImrtInstance")
      .def_readonly("n_angles", &ImrtInstance::n_angles)
      .def_readonly("n_voxels", &ImrtInstance::n_voxels)
      .def_readonly("phi", &ImrtInstance::phi)
      .def("total_apertures", &ImrtInstance::total_apertures);
  m.def("gen_synthetic_imrt", &gen_synthetic_imrt, py::arg("n_angles") = 8,
        py::arg("n_voxels") = 512, py::arg("n_beamlets") = 16, py::arg("n_structures") = 2,
        py::arg("seed") = 1, py::arg("apertures_per_angle") = 4);
  m.def("imrt_save", &imrt_save);
  m.def("imrt_load", &imrt_load);
  py::class_<ImrtModel>(m, "ImrtModel")
      .def_readonly("n_apertures", &ImrtModel::n_apertures)
      .def_readonly("phi", &ImrtModel::phi)
      .def("is_convex", &ImrtModel::is_convex)
      .def("convex", &ImrtModel::convex)
      .def("nonconvex", &ImrtModel::nonconvex);
  m.def("build_imrt_convex", &build_imrt_convex);
  m.def("build_imrt_nonconvex", &build_imrt_nonconvex, py::arg("instance"), py::arg("phi"),
        py::arg("theta"), py::arg("weights") = Vec{});
  m.def("imrt_doses", [](const ImrtInstance& i, const Vec& y) { return imrt_doses(i, y); });
  m.def("group_sparsity_value",
        [](const ImrtInstance& i, const Vec& y) { return group_sparsity_value(i, y); });

  // verify
  py::class_<GridResult>(m, "GridResult")
      .def_readonly("value", &GridResult::value)
      .def_readonly("error_bound", &GridResult::error_bound)
      .def_readonly("argmin", &GridResult::argmin);
  m.def("grid_saddle", [](const SaddleProblem& p, int points) {
    return grid_saddle(p, GridSpec::cover(*p.x_set, points));
  });
  m.def("exact_cvar", [](const Vec& values, double alpha) { return exact_cvar(values, alpha); });

  // bench
  m.def("load_returns_csv", &load_returns_csv);
  m.def("run_config_json", [](const std::string& text) {
    return RunConfig::from_json(nlohmann::json::parse(text)).to_json().dump();
  });
  m.def("bench_run", [](const std::string& config_json) {
    const RunConfig cfg = RunConfig::from_json(nlohmann::json::parse(config_json));
    const RunReport rep = run(cfg);
    return py::make_tuple(rep.body.dump(), rep.exit_code);
  });
}
