#include "levelcg/cgo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "levelcg/errors.hpp"

namespace levelcg {

bool SaddleProblem::has_smoothable_rows() const {
  for (const auto& row : h_bar)
    if (row.is_smoothable()) return true;
  return f_bar.is_smoothable();
}

SaddleProblem make_saddle_problem(SaddleRow f_bar, std::vector<SaddleRow> h_bar,
                                  std::shared_ptr<const FeasibleSet> x_set, ProxKind prox_kind) {
  if (h_bar.empty()) throw InvalidConstant("SaddleProblem: needs at least one h row");
  const int n = x_set->dim();
  if (f_bar.dim() != n) throw DimMismatch("SaddleProblem: f_bar dim");
  for (const auto& row : h_bar)
    if (row.dim() != n) throw DimMismatch("SaddleProblem: h row dim");

  const int m = static_cast<int>(h_bar.size());
  SaddleProblem p{std::move(f_bar),           std::move(h_bar), std::move(x_set),
                  SimplexProx(prox_kind, m),  0.0,              0.0,
                  0.0,                        false};
  double m2 = 0.0;
  for (const auto& row : p.h_bar) {
    m2 += row.lipschitz_val() * row.lipschitz_val();
    p.constants_estimated = p.constants_estimated || row.constants_estimated();
  }
  p.m_bar = std::sqrt(m2);
  p.d_x = p.x_set->diameter();
  p.v_bar = p.z_prox.v_bar();
  return p;
}

CgoParams cgo_params(int t, double m_bar, double d_x) {
  if (t < 1) throw InvalidConstant("cgo_params: t must be >= 1");
  if (!(m_bar > 0.0) || !(d_x > 0.0))
    throw InvalidConstant("cgo_params: M_bar and D_X must be positive");
  CgoParams p;
  p.alpha = 2.0 / (t + 1.0);
  p.lambda = (t - 1.0) / t;
  p.tau = 9.0 * std::sqrt(static_cast<double>(t)) * m_bar * d_x;
  return p;
}

double CgoSolver::eta_for_row(int i, int t) const {
  const SaddleRow& row = i < 0 ? problem_.f_bar : problem_.h_bar[i];
  if (!row.is_smoothable()) return 0.0;
  return eta_schedule(std::max(t, 1), row.b_norm(), problem_.d_x, row.d_u());
}

int CgoSolver::support_size() const {
  int s = 0;
  for (double v : x_)
    if (v != 0.0) ++s;
  return s;
}

CgoSolver::CgoSolver(const SaddleProblem& problem, const CgoOptions& options,
                     std::optional<Vec> x0)
    : problem_(problem), options_(options) {
  const int m = problem_.z_dim();
  if (m < 1) throw InvalidConstant("CgoSolver: empty dual");
  if (!options_.stop_override) {
    if (!(options_.epsilon > 0.0)) throw InvalidConstant("CgoSolver: epsilon must be positive");
    if (!(options_.mu > 0.5 && options_.mu < 1.0))
      throw InvalidConstant("CgoSolver: mu must lie in (1/2, 1)");
  }
  if (options_.max_iter < 1) throw InvalidConstant("CgoSolver: max_iter must be >= 1");

  // x_0 defaults to the zero-cost LMO vertex; z_0 = r_0 = uniform.
  if (x0.has_value()) {
    if (static_cast<int>(x0->size()) != problem_.x_dim()) throw DimMismatch("CgoSolver: x0");
    if (!problem_.x_set->contains(*x0, 1e-7))
      throw InvalidConstant("CgoSolver: x0 is not feasible");
    x_prev_ = std::move(*x0);
  } else {
    x_prev_ = problem_.x_set->lmo(Vec(problem_.x_dim(), 0.0));
  }
  x_ = x_prev_;
  r_ = problem_.z_prox.uniform();
  z_ = r_;

  // With x_{-2} = x_{-1} = x_0 and p_{-1} = p_0 = x_0, both extrapolation lags
  // reduce to the row values at x_0.
  lin_at_vertex_.resize(m);
  Vec h_slope(problem_.x_dim(), 0.0);
  double h_intercept = 0.0;
  for (int i = 0; i < m; ++i) {
    const Eval e = problem_.h_bar[i].eval(x_prev_, eta_for_row(i, 1));
    lin_at_vertex_[i] = e.value;
    axpy(r_[i], e.grad, h_slope);
    h_intercept += r_[i] * (e.value - dot(e.grad, x_prev_));
  }
  lin_at_vertex_prev_ = lin_at_vertex_;
  f_minorant_ = linearize(problem_.f_bar.eval(x_prev_, eta_for_row(-1, 1)), x_prev_);
  h_minorant_ = AffineMinorant{std::move(h_slope), h_intercept};
  lower_ = -std::numeric_limits<double>::infinity();
  upper_ = std::numeric_limits<double>::infinity();
}

void CgoSolver::step() {
  const int n = problem_.x_dim();
  const int m = problem_.z_dim();
  ++t_;
  CgoParams params = cgo_params(t_, problem_.m_bar, problem_.d_x);
  params.tau *= options_.tau_multiplier;

  // Extrapolated dual gain and prox step.
  Vec htilde(m);
  for (int i = 0; i < m; ++i)
    htilde[i] =
        lin_at_vertex_[i] + params.lambda * (lin_at_vertex_[i] - lin_at_vertex_prev_[i]);
  r_ = problem_.z_prox.apply(r_, htilde, params.tau);
  for (int i = 0; i < m; ++i) z_[i] = (1.0 - params.alpha) * z_[i] + params.alpha * r_[i];

  // Fresh linearizations at x_{t-1} under the current smoothing level.
  const Eval fe = problem_.f_bar.eval(x_prev_, eta_for_row(-1, t_));
  std::vector<Eval> he(m);
  Vec cost = fe.grad;
  for (int i = 0; i < m; ++i) {
    he[i] = problem_.h_bar[i].eval(x_prev_, eta_for_row(i, t_));
    axpy(r_[i], he[i].grad, cost);
  }

  // Primal LMO step and convex combination.
  const Vec p = problem_.x_set->lmo(cost);
  for (int i = 0; i < n; ++i) x_[i] = (1.0 - params.alpha) * x_prev_[i] + params.alpha * p[i];

  // Minorant recursions.
  f_minorant_ = combine_minorant(f_minorant_, linearize(fe, x_prev_), params.alpha);
  Vec h_slope(n, 0.0);
  double h_intercept = 0.0;
  for (int i = 0; i < m; ++i) {
    axpy(r_[i], he[i].grad, h_slope);
    h_intercept += r_[i] * (he[i].value - dot(he[i].grad, x_prev_));
  }
  h_minorant_ = combine_minorant(h_minorant_, AffineMinorant{std::move(h_slope), h_intercept},
                                 params.alpha);

  // L_t: one LMO call on the aggregated minorant.
  Vec total_slope(n);
  for (int i = 0; i < n; ++i) total_slope[i] = f_minorant_.slope[i] + h_minorant_.slope[i];
  const Vec xmin = problem_.x_set->lmo(total_slope);
  lower_ = dot(total_slope, xmin) + f_minorant_.intercept + h_minorant_.intercept;

  // U_t over the simplex reduces to the max component, on exact row values.
  double hmax = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < m; ++i) hmax = std::max(hmax, problem_.h_bar[i].exact_value(x_));
  upper_ = problem_.f_bar.exact_value(x_) + hmax;

  // Cache l_{h_eta^t}(x_{t-1}, p_t) for the next extrapolation.
  lin_at_vertex_prev_ = lin_at_vertex_;
  for (int i = 0; i < m; ++i) {
    double v = he[i].value;
    for (int j = 0; j < n; ++j) v += he[i].grad[j] * (p[j] - x_prev_[j]);
    lin_at_vertex_[i] = v;
  }
  x_prev_ = x_;
}

namespace {

CgoOutput run_cgo(const SaddleProblem& problem, const CgoOptions& options,
                  std::optional<Vec> x0) {
  CgoSolver solver(problem, options, std::move(x0));
  CgoOutput best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (int t = 1; t <= options.max_iter; ++t) {
    solver.step();
    if (options.trace) {
      CgoIterate it{solver.t(), solver.lower(), solver.upper(), solver.gap(),
                    solver.support_size()};
      options.trace(it);
    }
    if (solver.gap() < best_gap) {
      best_gap = solver.gap();
      best = CgoOutput{solver.x(),     solver.z(),     solver.gamma(), solver.lower(),
                       solver.upper(), solver.t(),     false};
    }
    const bool stop = options.stop_override
                          ? options.stop_override(solver.t(), solver.lower(), solver.upper())
                          : (solver.gap() <= (1.0 - options.mu) * options.epsilon);
    if (stop) {
      return CgoOutput{solver.x(),     solver.z(), solver.gamma(), solver.lower(),
                       solver.upper(), solver.t(), false};
    }
  }
  // Budget accounting needs the iterations actually performed, not the index
  // of the best-gap state.
  best.iterations = options.max_iter;
  best.truncated = true;
  return best;
}

}  // namespace

CgoOutput cgo_solve(const SaddleProblem& problem, const CgoOptions& options,
                    std::optional<Vec> x0) {
  return run_cgo(problem, options, std::move(x0));
}

CgoOutput cgo_solve_nonsmooth(const SaddleProblem& problem, const CgoOptions& options,
                              std::optional<Vec> x0) {
  return run_cgo(problem, options, std::move(x0));
}

}  // namespace levelcg
