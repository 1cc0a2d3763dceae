#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>

#include "levelcg/errors.hpp"
#include "levelcg/models.hpp"
#include "levelcg/rng.hpp"

#include <json.hpp>

namespace levelcg {

namespace {

using nlohmann::json;

// Shared precomputed aperture dose matrix: n_voxels rows x total_apertures cols.
struct ApertureMatrix {
  int n_voxels = 0;
  int n_cols = 0;
  Vec data;  // row-major

  std::span<const double> row(int v) const {
    return std::span<const double>(data.data() + static_cast<std::size_t>(v) * n_cols, n_cols);
  }
};

std::shared_ptr<const ApertureMatrix> build_aperture_matrix(const ImrtInstance& inst) {
  auto mat = std::make_shared<ApertureMatrix>();
  mat->n_voxels = inst.n_voxels;
  mat->n_cols = inst.total_apertures();
  mat->data.assign(static_cast<std::size_t>(inst.n_voxels) * mat->n_cols, 0.0);
  int col = 0;
  for (int a = 0; a < inst.n_angles; ++a) {
    for (std::size_t e = 0; e < inst.apertures[a].size(); ++e, ++col) {
      const Vec column = inst.aperture_column(a, static_cast<int>(e));
      for (int v = 0; v < inst.n_voxels; ++v) mat->data[v * mat->n_cols + col] = column[v];
    }
  }
  return mat;
}

std::vector<std::vector<int>> angle_groups(const ImrtInstance& inst) {
  std::vector<std::vector<int>> groups;
  int col = 0;
  for (int a = 0; a < inst.n_angles; ++a) {
    std::vector<int> g(inst.apertures[a].size());
    std::iota(g.begin(), g.end(), col);
    col += static_cast<int>(g.size());
    groups.push_back(std::move(g));
  }
  return groups;
}

double fmt_read(const std::string& cell, int row, int col) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(cell, &pos);
    if (pos != cell.size() || !std::isfinite(v)) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw ParseError(row, col, "expected a finite number, got '" + cell + "'");
  }
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

int ImrtInstance::total_apertures() const {
  int total = 0;
  for (const auto& a : apertures) total += static_cast<int>(a.size());
  return total;
}

Vec ImrtInstance::aperture_column(int angle, int aperture) const {
  const auto [lo, hi] = apertures.at(angle).at(aperture);
  Vec out(n_voxels, 0.0);
  const Vec& d = dose[angle];
  for (int v = 0; v < n_voxels; ++v) {
    double s = 0.0;
    for (int b = lo; b < hi; ++b) s += d[static_cast<std::size_t>(v) * n_beamlets + b];
    out[v] = s;
  }
  return out;
}

ImrtInstance gen_synthetic_imrt(int n_angles, int n_voxels, int n_beamlets, int n_structures,
                                std::uint64_t seed, int apertures_per_angle) {
  if (n_angles < 1 || n_voxels < 1 || n_beamlets < 1 || n_structures < 1 ||
      apertures_per_angle < 1)
    throw InvalidConstant("gen_synthetic_imrt: all counts must be >= 1");
  Rng rng(seed);
  ImrtInstance inst;
  inst.n_angles = n_angles;
  inst.n_voxels = n_voxels;
  inst.n_beamlets = n_beamlets;

  // Tumor structures: disjoint random voxel subsets via a Fisher-Yates shuffle.
  std::vector<int> perm(n_voxels);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n_voxels - 1; i > 0; --i)
    std::swap(perm[i], perm[rng.below(static_cast<std::uint64_t>(i + 1))]);
  const int chunk = std::max(n_voxels / (2 * n_structures + 2), 1);
  std::vector<bool> tumor(n_voxels, false);
  for (int s = 0; s < n_structures; ++s) {
    std::vector<int> voxels(perm.begin() + s * chunk,
                            perm.begin() + std::min((s + 1) * chunk, n_voxels));
    std::sort(voxels.begin(), voxels.end());
    for (int v : voxels) tumor[v] = true;
    inst.structures.push_back(std::move(voxels));
  }

  // Rectangular aperture dictionary: random beamlet intervals per angle.
  for (int a = 0; a < n_angles; ++a) {
    std::vector<std::pair<int, int>> aps;
    for (int e = 0; e < apertures_per_angle; ++e) {
      const int width = 1 + static_cast<int>(rng.below(std::max(n_beamlets / 2, 1)));
      const int lo = static_cast<int>(rng.below(std::max(n_beamlets - width + 1, 1)));
      aps.emplace_back(lo, std::min(lo + width, n_beamlets));
    }
    inst.apertures.push_back(std::move(aps));
  }

  // Dose matrices; tumor voxels sit in the beams and receive heavier dose.
  inst.dose.assign(n_angles, Vec(static_cast<std::size_t>(n_voxels) * n_beamlets));
  for (int a = 0; a < n_angles; ++a)
    for (int v = 0; v < n_voxels; ++v) {
      const double boost = tumor[v] ? 4.0 : 1.0;
      for (int b = 0; b < n_beamlets; ++b)
        inst.dose[a][static_cast<std::size_t>(v) * n_beamlets + b] =
            boost * rng.uniform(0.0, 8.0);
    }

  // Criteria: one underdose row per tumor structure plus one overdose row on
  // the first structure. Thresholds are calibrated against the dose delivered
  // at uniform intensities so the rows are tight but not hopeless.
  const auto matrix = build_aperture_matrix(inst);
  const int total_aps = matrix->n_cols;
  Vec z_ref(n_voxels, 0.0);
  for (int v = 0; v < n_voxels; ++v) {
    const auto row = matrix->row(v);
    double s = 0.0;
    for (double d : row) s += d;
    z_ref[v] = s / total_aps;
  }
  auto structure_quantile = [&](int s, double p) {
    Vec vals;
    for (int v : inst.structures[s]) vals.push_back(z_ref[v]);
    std::sort(vals.begin(), vals.end());
    const int idx = std::clamp(static_cast<int>(p * vals.size()), 0,
                               static_cast<int>(vals.size()) - 1);
    return vals[idx];
  };
  for (int s = 0; s < n_structures; ++s) {
    ImrtCriterion c;
    c.structure = s;
    c.underdose = true;
    c.dose = 0.90 * structure_quantile(s, 0.05);
    c.quantile = 0.05;
    c.tau_lo = 0.25 * c.dose;
    c.tau_hi = 2.0 * c.dose;
    c.weight = 1.0;
    inst.criteria.push_back(c);
  }
  {
    ImrtCriterion c;
    c.structure = 0;
    c.underdose = false;
    c.dose = 1.15 * structure_quantile(0, 0.90);
    c.quantile = 0.10;
    c.tau_lo = 0.25 * c.dose;
    c.tau_hi = 2.0 * c.dose;
    c.weight = 1.0;
    inst.criteria.push_back(c);
  }

  // Voxelwise penalty parameters for the quadratic objective.
  inst.t_under.assign(n_voxels, 0.0);
  inst.t_over.assign(n_voxels, 0.0);
  inst.w_under.assign(n_voxels, 0.0);
  inst.w_over.assign(n_voxels, 0.0);
  double healthy_ref = 0.0;
  int healthy_count = 0;
  for (int v = 0; v < n_voxels; ++v)
    if (!tumor[v]) {
      healthy_ref += z_ref[v];
      ++healthy_count;
    }
  healthy_ref = healthy_count > 0 ? healthy_ref / healthy_count : 1.0;
  // Tumor voxels want slightly more than the uniform-intensity dose, which
  // keeps the underdose pull alive along the whole trajectory.
  for (int s = 0; s < n_structures; ++s)
    for (int v : inst.structures[s]) {
      inst.t_under[v] = 1.10 * z_ref[v];
      inst.w_under[v] = 1.0;
      inst.t_over[v] = 1.80 * z_ref[v];
      inst.w_over[v] = 0.25;
    }
  for (int v = 0; v < n_voxels; ++v)
    if (!tumor[v]) {
      inst.t_over[v] = 1.30 * std::max(z_ref[v], 0.5 * healthy_ref);
      inst.w_over[v] = 0.5;
    }

  inst.phi = 0.5;
  return inst;
}

Vec imrt_doses(const ImrtInstance& instance, std::span<const double> y) {
  const auto matrix = build_aperture_matrix(instance);
  if (static_cast<int>(y.size()) < matrix->n_cols) throw DimMismatch("imrt_doses: y");
  Vec z(instance.n_voxels, 0.0);
  for (int v = 0; v < instance.n_voxels; ++v) {
    const auto row = matrix->row(v);
    double s = 0.0;
    for (int j = 0; j < matrix->n_cols; ++j) s += row[j] * y[j];
    z[v] = s;
  }
  return z;
}

double group_sparsity_value(const ImrtInstance& instance, std::span<const double> y) {
  double total = 0.0;
  int col = 0;
  for (int a = 0; a < instance.n_angles; ++a) {
    double m = 0.0;
    for (std::size_t e = 0; e < instance.apertures[a].size(); ++e, ++col)
      m = std::max(m, y[col]);
    total += m;
  }
  return total;
}

std::vector<CriterionOutcome> imrt_criteria_table(const ImrtInstance& instance,
                                                  std::span<const double> y) {
  const Vec z = imrt_doses(instance, y);
  std::vector<CriterionOutcome> table;
  for (std::size_t k = 0; k < instance.criteria.size(); ++k) {
    const ImrtCriterion& c = instance.criteria[k];
    const auto& voxels = instance.structures[c.structure];
    int count = 0;
    for (int v : voxels) {
      if (c.underdose ? z[v] >= c.dose : z[v] > c.dose) ++count;
    }
    CriterionOutcome out;
    out.index = static_cast<int>(k);
    out.underdose = c.underdose;
    out.dose = c.dose;
    out.fraction = static_cast<double>(count) / voxels.size();
    out.required = c.underdose ? 1.0 - c.quantile : c.quantile;
    out.satisfied = c.underdose ? out.fraction >= out.required : out.fraction <= out.required;
    table.push_back(out);
  }
  return table;
}

ImrtModel build_imrt_convex(const ImrtInstance& instance, double phi) {
  if (!(phi > 0.0)) throw BadPhi();
  const auto matrix = build_aperture_matrix(instance);
  const int n_ap = matrix->n_cols;
  const int n_cr = static_cast<int>(instance.criteria.size());
  const int dim = n_ap + n_cr;

  ImrtModel model;
  model.n_apertures = n_ap;
  model.n_criteria = n_cr;
  model.groups = angle_groups(instance);
  model.phi = phi;

  Vec tau_lo(n_cr), tau_hi(n_cr);
  for (int k = 0; k < n_cr; ++k) {
    tau_lo[k] = instance.criteria[k].tau_lo;
    tau_hi[k] = instance.criteria[k].tau_hi;
  }

  ConstrainedProblem problem;
  problem.x_set = std::make_shared<ProductSet>(std::vector<std::shared_ptr<const FeasibleSet>>{
      std::make_shared<ScaledSimplexLeq>(n_ap, 1.0),
      std::make_shared<Box>(std::move(tau_lo), std::move(tau_hi))});

  // Quadratic under/over-dose penalty. The squared hinge has a 2-Lipschitz
  // derivative, so the row is smooth as-is.
  {
    const int n_vox = instance.n_voxels;
    auto t_under = std::make_shared<const Vec>(instance.t_under);
    auto t_over = std::make_shared<const Vec>(instance.t_over);
    auto w_under = std::make_shared<const Vec>(instance.w_under);
    auto w_over = std::make_shared<const Vec>(instance.w_over);
    double l_const = 0.0;
    double m_const = 0.0;
    for (int v = 0; v < n_vox; ++v) {
      const auto row = matrix->row(v);
      const double rn = norm2(row);
      double zmax = 0.0;
      for (double d : row) zmax = std::max(zmax, d);
      const double wmax = std::max((*w_under)[v], (*w_over)[v]);
      l_const += 2.0 * wmax * rn * rn / n_vox;
      m_const += 2.0 *
                 ((*w_under)[v] * (*t_under)[v] +
                  (*w_over)[v] * positive_part(zmax - (*t_over)[v])) *
                 rn / n_vox;
    }
    auto fn = [matrix, t_under, t_over, w_under, w_over, n_vox,
               dim](std::span<const double> x) {
      Eval out;
      out.grad.assign(dim, 0.0);
      for (int v = 0; v < n_vox; ++v) {
        const auto row = matrix->row(v);
        double z = 0.0;
        for (int j = 0; j < static_cast<int>(row.size()); ++j) z += row[j] * x[j];
        const double under = positive_part((*t_under)[v] - z);
        const double over = positive_part(z - (*t_over)[v]);
        out.value += ((*w_under)[v] * under * under + (*w_over)[v] * over * over) / n_vox;
        const double dz = (-2.0 * (*w_under)[v] * under + 2.0 * (*w_over)[v] * over) / n_vox;
        if (dz != 0.0)
          for (int j = 0; j < static_cast<int>(row.size()); ++j) out.grad[j] += dz * row[j];
      }
      return out;
    };
    problem.f = SaddleRow::smooth(SmoothOracle(dim, std::move(fn), l_const, m_const));
  }

  // CVaR criterion rows, hinge sums over the structure voxels.
  for (int k = 0; k < n_cr; ++k) {
    const ImrtCriterion& c = instance.criteria[k];
    const auto& voxels = instance.structures[c.structure];
    const double coeff = 1.0 / (c.quantile * voxels.size());
    Vec slope0(dim, 0.0);
    double const0;
    std::vector<Vec> slopes;
    Vec offsets(voxels.size(), 0.0);
    if (c.underdose) {
      slope0[n_ap + k] = -1.0;
      const0 = c.dose;
    } else {
      slope0[n_ap + k] = 1.0;
      const0 = -c.dose;
    }
    for (int v : voxels) {
      Vec g(dim, 0.0);
      const auto row = matrix->row(v);
      const double sign = c.underdose ? -1.0 : 1.0;
      for (int j = 0; j < static_cast<int>(row.size()); ++j) g[j] = sign * coeff * row[j];
      g[n_ap + k] = -sign * coeff;
      slopes.push_back(std::move(g));
    }
    problem.h.push_back(
        HingeSumOracle(std::move(slope0), const0, std::move(slopes), std::move(offsets))
            .as_row());
  }

  // Group sparsity row sum_a max_e y_{a,e} - phi <= 0.
  problem.h.push_back(GroupMaxSumOracle(dim, model.groups, -phi).as_row());

  model.problem = std::move(problem);
  return model;
}

ImrtModel build_imrt_nonconvex(const ImrtInstance& instance, double phi, double theta,
                               Vec weights) {
  if (!(phi > 0.0)) throw BadPhi();
  if (!(theta > 0.0)) throw BadTheta();
  const auto matrix = build_aperture_matrix(instance);
  const int n_ap = matrix->n_cols;
  const int n_cr = static_cast<int>(instance.criteria.size());
  if (weights.empty()) {
    weights.resize(n_cr);
    for (int k = 0; k < n_cr; ++k) weights[k] = instance.criteria[k].weight;
  }
  if (static_cast<int>(weights.size()) != n_cr)
    throw DimMismatch("build_imrt_nonconvex: weights");

  ImrtModel model;
  model.n_apertures = n_ap;
  model.n_criteria = n_cr;
  model.groups = angle_groups(instance);
  model.phi = phi;

  NonconvexProblem problem;
  problem.x_set = std::make_shared<ScaledSimplexLeq>(n_ap, 1.0);

  struct Term {
    int voxel;
    double tau;
    double sign;  // +1: sigmoid((tau - z)/theta) underdose, -1: overdose
    double w;
  };
  auto terms = std::make_shared<std::vector<Term>>();
  double m_const = 0.0;
  double l_const = 0.0;
  for (int k = 0; k < n_cr; ++k) {
    const ImrtCriterion& c = instance.criteria[k];
    const auto& voxels = instance.structures[c.structure];
    const double w = weights[k] / voxels.size();
    for (int v : voxels) {
      terms->push_back(Term{v, c.dose, c.underdose ? 1.0 : -1.0, w});
      const double rn = norm2(matrix->row(v));
      m_const += w * rn / (4.0 * theta);
      l_const += w * SigmoidIndicator::kMaxCurvature * rn * rn / (theta * theta);
    }
  }
  const SigmoidIndicator sig(theta);
  auto fn = [matrix, terms, sig, n_ap](std::span<const double> y) {
    Eval out;
    out.grad.assign(n_ap, 0.0);
    for (const auto& t : *terms) {
      const auto row = matrix->row(t.voxel);
      double z = 0.0;
      for (int j = 0; j < n_ap; ++j) z += row[j] * y[j];
      const double arg = t.sign * (t.tau - z);
      out.value += t.w * sig.value(arg);
      const double d = -t.sign * t.w * sig.derivative(arg);
      for (int j = 0; j < n_ap; ++j) out.grad[j] += d * row[j];
    }
    return out;
  };
  problem.f = SmoothOracle(n_ap, std::move(fn), l_const, m_const);
  problem.lower_curvature = l_const;
  problem.h.push_back(GroupMaxSumOracle(n_ap, model.groups, -phi).as_row());
  model.problem = std::move(problem);
  return model;
}

void imrt_save(const ImrtInstance& instance, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "levelcg-imrt-v1";
  manifest["n_angles"] = instance.n_angles;
  manifest["n_beamlets"] = instance.n_beamlets;
  manifest["n_voxels"] = instance.n_voxels;
  manifest["phi"] = instance.phi;
  manifest["structures"] = instance.structures;
  json criteria = json::array();
  for (const auto& c : instance.criteria)
    criteria.push_back({{"structure", c.structure},
                        {"kind", c.underdose ? "underdose" : "overdose"},
                        {"dose", c.dose},
                        {"quantile", c.quantile},
                        {"tau_lo", c.tau_lo},
                        {"tau_hi", c.tau_hi},
                        {"weight", c.weight}});
  manifest["criteria"] = criteria;
  json apertures = json::array();
  for (const auto& angle : instance.apertures) {
    json list = json::array();
    for (const auto& [lo, hi] : angle) list.push_back({lo, hi});
    apertures.push_back(list);
  }
  manifest["apertures"] = apertures;
  json dose_files = json::array();
  for (int a = 0; a < instance.n_angles; ++a) {
    char name[32];
    std::snprintf(name, sizeof(name), "dose_%03d.csv", a);
    dose_files.push_back(name);
  }
  manifest["dose_files"] = dose_files;
  manifest["voxel_params_file"] = "voxel_params.csv";
  {
    std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << "\n";
  }
  for (int a = 0; a < instance.n_angles; ++a) {
    std::ofstream out(fs::path(dir) / dose_files[a].get<std::string>(), std::ios::binary);
    for (int v = 0; v < instance.n_voxels; ++v) {
      for (int b = 0; b < instance.n_beamlets; ++b) {
        if (b) out << ',';
        out << fmt_double(instance.dose[a][static_cast<std::size_t>(v) * instance.n_beamlets + b]);
      }
      out << '\n';
    }
  }
  {
    std::ofstream out(fs::path(dir) / "voxel_params.csv", std::ios::binary);
    out << "t_under,t_over,w_under,w_over\n";
    for (int v = 0; v < instance.n_voxels; ++v)
      out << fmt_double(instance.t_under[v]) << ',' << fmt_double(instance.t_over[v]) << ','
          << fmt_double(instance.w_under[v]) << ',' << fmt_double(instance.w_over[v]) << '\n';
  }
}

ImrtInstance imrt_load(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw EmptyData("imrt_load: missing manifest.json in " + dir);
  json manifest = json::parse(in);
  ImrtInstance inst;
  inst.n_angles = manifest.at("n_angles").get<int>();
  inst.n_beamlets = manifest.at("n_beamlets").get<int>();
  inst.n_voxels = manifest.at("n_voxels").get<int>();
  inst.phi = manifest.at("phi").get<double>();
  inst.structures = manifest.at("structures").get<std::vector<std::vector<int>>>();
  for (const auto& c : manifest.at("criteria")) {
    ImrtCriterion crit;
    crit.structure = c.at("structure").get<int>();
    crit.underdose = c.at("kind").get<std::string>() == "underdose";
    crit.dose = c.at("dose").get<double>();
    crit.quantile = c.at("quantile").get<double>();
    crit.tau_lo = c.at("tau_lo").get<double>();
    crit.tau_hi = c.at("tau_hi").get<double>();
    crit.weight = c.at("weight").get<double>();
    inst.criteria.push_back(crit);
  }
  for (const auto& angle : manifest.at("apertures")) {
    std::vector<std::pair<int, int>> aps;
    for (const auto& pair : angle) aps.emplace_back(pair.at(0).get<int>(), pair.at(1).get<int>());
    inst.apertures.push_back(std::move(aps));
  }
  const auto dose_files = manifest.at("dose_files").get<std::vector<std::string>>();
  for (int a = 0; a < inst.n_angles; ++a) {
    std::ifstream dose_in(fs::path(dir) / dose_files.at(a));
    if (!dose_in) throw EmptyData("imrt_load: missing " + dose_files.at(a));
    Vec d;
    d.reserve(static_cast<std::size_t>(inst.n_voxels) * inst.n_beamlets);
    std::string line;
    int row = 0;
    while (std::getline(dose_in, line)) {
      if (line.empty()) continue;
      ++row;
      std::stringstream ss(line);
      std::string cell;
      int col = 0;
      while (std::getline(ss, cell, ',')) d.push_back(fmt_read(cell, row, ++col));
    }
    if (static_cast<int>(d.size()) != inst.n_voxels * inst.n_beamlets)
      throw ParseError(row, 0, "dose matrix size mismatch");
    inst.dose.push_back(std::move(d));
  }
  {
    std::ifstream pin(fs::path(dir) / manifest.at("voxel_params_file").get<std::string>());
    if (!pin) throw EmptyData("imrt_load: missing voxel_params.csv");
    std::string line;
    std::getline(pin, line);  // header
    int row = 1;
    while (std::getline(pin, line)) {
      if (line.empty()) continue;
      ++row;
      std::stringstream ss(line);
      std::string cell;
      Vec vals;
      int col = 0;
      while (std::getline(ss, cell, ',')) vals.push_back(fmt_read(cell, row, ++col));
      if (vals.size() != 4) throw ParseError(row, 0, "expected 4 voxel parameters");
      inst.t_under.push_back(vals[0]);
      inst.t_over.push_back(vals[1]);
      inst.w_under.push_back(vals[2]);
      inst.w_over.push_back(vals[3]);
    }
  }
  return inst;
}

}  // namespace levelcg
