#pragma once

#include <memory>
#include <span>
#include <vector>

#include "levelcg/vec.hpp"

namespace levelcg {

// Compact convex set accessed through a linear minimization oracle.
// Instances are immutable after construction and safe to share across threads.
class FeasibleSet {
 public:
  virtual ~FeasibleSet() = default;
  virtual int dim() const = 0;
  // argmin over the set of <cost, x>. Ties broken toward the lowest index.
  virtual Vec lmo(std::span<const double> cost) const = 0;
  // Exact Euclidean diameter for the built-in sets.
  virtual double diameter() const = 0;
  virtual bool contains(std::span<const double> x, double tol) const = 0;
  // Axis-aligned bounds enclosing the set (exact for the built-ins).
  virtual void bounding_box(Vec& lo, Vec& hi) const = 0;
};

// {x >= 0 : sum x_i <= radius}
class ScaledSimplexLeq final : public FeasibleSet {
 public:
  ScaledSimplexLeq(int dim, double radius);
  int dim() const override { return dim_; }
  Vec lmo(std::span<const double> cost) const override;
  double diameter() const override;
  bool contains(std::span<const double> x, double tol) const override;
  void bounding_box(Vec& lo, Vec& hi) const override;
  double radius() const { return radius_; }

 private:
  int dim_;
  double radius_;
};

// {z >= 0 : sum z_i = 1}
class StandardSimplex final : public FeasibleSet {
 public:
  explicit StandardSimplex(int dim);
  int dim() const override { return dim_; }
  Vec lmo(std::span<const double> cost) const override;
  double diameter() const override;
  bool contains(std::span<const double> x, double tol) const override;
  void bounding_box(Vec& lo, Vec& hi) const override;

 private:
  int dim_;
};

// Axis-aligned box [lower, upper].
class Box final : public FeasibleSet {
 public:
  Box(Vec lower, Vec upper);
  int dim() const override { return static_cast<int>(lower_.size()); }
  Vec lmo(std::span<const double> cost) const override;
  double diameter() const override;
  bool contains(std::span<const double> x, double tol) const override;
  void bounding_box(Vec& lo, Vec& hi) const override;
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }

 private:
  Vec lower_;
  Vec upper_;
};

// Cartesian product of component sets; the LMO factorizes per block.
class ProductSet final : public FeasibleSet {
 public:
  explicit ProductSet(std::vector<std::shared_ptr<const FeasibleSet>> factors);
  int dim() const override { return dim_; }
  Vec lmo(std::span<const double> cost) const override;
  double diameter() const override;
  bool contains(std::span<const double> x, double tol) const override;
  void bounding_box(Vec& lo, Vec& hi) const override;
  const std::vector<std::shared_ptr<const FeasibleSet>>& factors() const { return factors_; }

 private:
  std::vector<std::shared_ptr<const FeasibleSet>> factors_;
  int dim_;
};

// Free-function forms of the built-in LMOs.
Vec lmo_scaled_simplex(std::span<const double> cost, double radius);
Vec lmo_box(std::span<const double> cost, const Box& box);
Vec lmo_product(std::span<const double> cost, const ProductSet& set);

enum class ProxKind { Entropy, Euclidean };

// Prox machinery for the dual simplex step r_t = argmin <-g, z> + tau V(r_prev, z).
// Entropy uses V(z', z) = KL(z || z'); Euclidean uses V(z', z) = ||z - z'||^2 / 2.
class SimplexProx {
 public:
  SimplexProx(ProxKind kind, int dim);
  int dim() const { return dim_; }
  ProxKind kind() const { return kind_; }
  Vec apply(std::span<const double> r_prev, std::span<const double> gain, double tau) const;
  Vec uniform() const;
  // Bound on V from a uniform start; feeds tau schedules only.
  double v_bar() const;

 private:
  ProxKind kind_;
  int dim_;
};

Vec prox_simplex(const SimplexProx& prox, std::span<const double> r_prev,
                 std::span<const double> gain, double tau);

// Euclidean projection onto {z >= 0 : sum z = 1} (sort-and-threshold).
Vec project_simplex(std::span<const double> v);

}  // namespace levelcg
