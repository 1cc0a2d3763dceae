#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "levelcg/geometry.hpp"
#include "levelcg/oracle.hpp"

namespace levelcg {

// Saddle problem min_{x in X} max_{z in Z} f_bar(x) + <h_bar(x), z> with Z the
// standard simplex. Rows may be smooth or carry structured nonsmoothness; the
// latter are handled through the adaptive smoothing schedule.
struct SaddleProblem {
  SaddleRow f_bar;
  std::vector<SaddleRow> h_bar;
  std::shared_ptr<const FeasibleSet> x_set;
  SimplexProx z_prox;
  double m_bar = 0.0;   // sqrt(sum_i M_i^2) over the h rows
  double d_x = 0.0;     // Euclidean diameter of X
  double v_bar = 0.0;   // bound on the dual proximal function
  bool constants_estimated = false;

  int x_dim() const { return x_set->dim(); }
  int z_dim() const { return static_cast<int>(h_bar.size()); }
  bool has_smoothable_rows() const;
};

// Resolves M_bar, D_X and V_bar from the rows and set at build time.
SaddleProblem make_saddle_problem(SaddleRow f_bar, std::vector<SaddleRow> h_bar,
                                  std::shared_ptr<const FeasibleSet> x_set,
                                  ProxKind prox_kind = ProxKind::Entropy);

struct CgoParams {
  double alpha = 0.0;
  double lambda = 0.0;
  double tau = 0.0;
};

// Schedule alpha_t = 2/(t+1), lambda_t = (t-1)/t, tau_t = 9 sqrt(t) M_bar D_X.
CgoParams cgo_params(int t, double m_bar, double d_x);

struct CgoIterate {
  int t = 0;
  double lower = 0.0;
  double upper = 0.0;
  double gap = 0.0;
  int support = 0;
};

struct CgoOptions {
  double epsilon = 1e-6;
  double mu = 0.9;
  int max_iter = 100000;
  // The theoretical tau constant 9 is conservative; this scales it.
  double tau_multiplier = 1.0;
  // Replaces the default gap rule U - L <= (1 - mu) epsilon when set.
  std::function<bool(int t, double lower, double upper)> stop_override;
  std::function<void(const CgoIterate&)> trace;
};

struct CgoOutput {
  Vec x;
  Vec z;
  double gamma = 0.0;  // dual weight on component 0
  double lower = 0.0;  // L
  double upper = 0.0;  // U
  int iterations = 0;
  bool truncated = false;
};

// Stateful form of the oracle; step() performs one full iteration of the
// extrapolation / dual prox / primal LMO / minorant / bound sequence.
class CgoSolver {
 public:
  CgoSolver(const SaddleProblem& problem, const CgoOptions& options,
            std::optional<Vec> x0 = std::nullopt);

  void step();
  int t() const { return t_; }
  const Vec& x() const { return x_; }
  const Vec& z() const { return z_; }
  const Vec& r() const { return r_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  double gamma() const { return z_.empty() ? 0.0 : z_[0]; }
  double gap() const { return upper_ - lower_; }
  const AffineMinorant& f_minorant() const { return f_minorant_; }
  const AffineMinorant& h_minorant() const { return h_minorant_; }
  double eta_for_row(int i, int t) const;
  int support_size() const;

 private:
  const SaddleProblem& problem_;
  CgoOptions options_;
  int t_ = 0;
  Vec x_;        // x_t
  Vec x_prev_;   // x_{t-1}
  Vec z_;
  Vec r_;
  Vec lin_at_vertex_;       // l_{h_eta^t}(x_{t-1}, p_t), reused as the next extrapolation base
  Vec lin_at_vertex_prev_;  // one more lag
  AffineMinorant f_minorant_;
  AffineMinorant h_minorant_;
  double lower_ = 0.0;
  double upper_ = 0.0;
};

CgoOutput cgo_solve(const SaddleProblem& problem, const CgoOptions& options,
                    std::optional<Vec> x0 = std::nullopt);

// Structured nonsmooth variant (adaptive eta schedule on smoothable rows, upper
// bounds on exact values). Smooth problems follow the identical trajectory as
// cgo_solve.
CgoOutput cgo_solve_nonsmooth(const SaddleProblem& problem, const CgoOptions& options,
                              std::optional<Vec> x0 = std::nullopt);

}  // namespace levelcg
