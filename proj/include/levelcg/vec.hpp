#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "levelcg/errors.hpp"

namespace levelcg {

using Vec = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimMismatch("dot: sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

inline double norm_inf(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s = std::max(s, std::abs(v));
  return s;
}

// y += c * x
inline void axpy(double c, std::span<const double> x, Vec& y) {
  if (x.size() != y.size()) throw DimMismatch("axpy: sizes differ");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += c * x[i];
}

// out = (1 - w) * a + w * b
inline Vec convex_combine(std::span<const double> a, std::span<const double> b, double w) {
  if (a.size() != b.size()) throw DimMismatch("convex_combine: sizes differ");
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (1.0 - w) * a[i] + w * b[i];
  return out;
}

inline bool all_finite(std::span<const double> a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

inline void require_finite(std::span<const double> a, const char* what) {
  if (!all_finite(a)) throw NonFiniteInput(std::string(what) + " contains NaN or infinity");
}

inline double positive_part(double a) { return a > 0.0 ? a : 0.0; }

// Euclidean norm of the elementwise positive part.
inline double norm2_positive_part(std::span<const double> a) {
  double s = 0.0;
  for (double v : a)
    if (v > 0.0) s += v * v;
  return std::sqrt(s);
}

inline double max_element_or(std::span<const double> a, double fallback) {
  double m = fallback;
  bool first = true;
  for (double v : a) {
    if (first || v > m) m = v;
    first = false;
  }
  return m;
}

}  // namespace levelcg
