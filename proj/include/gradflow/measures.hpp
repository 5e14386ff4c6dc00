#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gradflow/errors.hpp"
#include "gradflow/numerics.hpp"

namespace gradflow {

using Point = std::vector<double>;

/// Uniform partition of [a, b] into `cells` cells of width h = (b − a)/cells.
struct UniformGrid {
  double a = 0.0;
  double b = 1.0;
  std::size_t cells = 2;

  UniformGrid() = default;
  UniformGrid(double lo, double hi, std::size_t n) : a(lo), b(hi), cells(n) {
    detail::require(std::isfinite(a) && std::isfinite(b) && b > a, "UniformGrid: need finite a < b");
    detail::require(cells >= 2, "UniformGrid: need at least 2 cells");
  }

  double h() const { return (b - a) / static_cast<double>(cells); }
  double center(std::size_t i) const { return a + (static_cast<double>(i) + 0.5) * h(); }
  /// Position of interior interface k, between cells k and k+1.
  double interface(std::size_t k) const { return a + static_cast<double>(k + 1) * h(); }

  std::vector<double> centers() const {
    std::vector<double> x(cells);
    for (std::size_t i = 0; i < cells; ++i) x[i] = center(i);
    return x;
  }

  bool operator==(const UniformGrid&) const = default;
};

/// Nonnegative finite measure carried by weighted atoms in R^d.
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;

  DiscreteMeasure(std::vector<Point> atoms, std::vector<double> weights)
      : atoms_(std::move(atoms)), weights_(std::move(weights)) {
    detail::require(atoms_.size() == weights_.size(), "DiscreteMeasure: atoms and weights differ in length");
    dim_ = atoms_.empty() ? 0 : atoms_.front().size();
    for (const auto& x : atoms_) {
      detail::require(x.size() == dim_, "DiscreteMeasure: atoms of different dimension");
      for (double c : x) detail::require(std::isfinite(c), "DiscreteMeasure: non-finite coordinate");
    }
    for (double w : weights_) detail::require(w >= 0.0 && std::isfinite(w), "DiscreteMeasure: weights must be finite and ≥ 0");
  }

  /// Measure on the one-dimensional atoms 0, 1, ..., n−1 (finite alphabets).
  static DiscreteMeasure on_alphabet(std::vector<double> weights) {
    std::vector<Point> atoms(weights.size());
    for (std::size_t i = 0; i < atoms.size(); ++i) atoms[i] = {static_cast<double>(i)};
    return DiscreteMeasure(std::move(atoms), std::move(weights));
  }

  const std::vector<Point>& atoms() const { return atoms_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return atoms_.size(); }
  std::size_t dim() const { return dim_; }

  double mass() const {
    double m = 0.0;
    for (double w : weights_) m += w;
    return m;
  }

  bool operator==(const DiscreteMeasure&) const = default;

 private:
  std::vector<Point> atoms_;
  std::vector<double> weights_;
  std::size_t dim_ = 0;
};

/// Nonnegative density, constant on the cells of a uniform 1D grid.
class GridDensity1D {
 public:
  GridDensity1D() = default;

  GridDensity1D(UniformGrid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    detail::require(values_.size() == grid_.cells, "GridDensity1D: value count must equal cell count");
    for (double v : values_) detail::require(v >= 0.0 && std::isfinite(v), "GridDensity1D: values must be finite and ≥ 0");
  }

  /// Samples `f` at cell centres.
  template <typename F>
  static GridDensity1D sample(const UniformGrid& grid, F&& f) {
    std::vector<double> v(grid.cells);
    for (std::size_t i = 0; i < grid.cells; ++i) v[i] = f(grid.center(i));
    return GridDensity1D(grid, std::move(v));
  }

  const UniformGrid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t cells() const { return values_.size(); }
  double h() const { return grid_.h(); }
  double operator[](std::size_t i) const { return values_[i]; }

  double mass() const {
    double m = 0.0;
    for (double v : values_) m += v;
    return grid_.h() * m;
  }

  bool strictly_positive() const {
    for (double v : values_)
      if (!(v > 0.0)) return false;
    return true;
  }

  /// Copy rescaled to the given total mass.
  GridDensity1D normalized(double target_mass = 1.0) const {
    const double m = mass();
    detail::require(m > 0.0, "GridDensity1D::normalized: zero mass");
    std::vector<double> v(values_);
    for (double& x : v) x *= target_mass / m;
    return GridDensity1D(grid_, std::move(v));
  }

  bool operator==(const GridDensity1D&) const = default;

 private:
  UniformGrid grid_;
  std::vector<double> values_;
};

/// Physical constants in a consistent unit system (SI by default).
struct PhysicalConstants {
  double R = 8.314462618;      // J K⁻¹ mol⁻¹
  double k = 1.380649e-23;     // J/K
  double N_A = 6.02214076e23;  // 1/mol
  double T = 298.15;           // K
  double eta = 1.0;            // friction
  double g = 9.81;             // m/s²
  double c0 = 1.0;             // mol/m³

  double rt() const { return R * T; }
  double kt() const { return k * T; }

  /// Units in which R = k = N_A = T = η = g = c₀ = 1.
  static PhysicalConstants dimensionless() { return {1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0}; }

  /// Dimensionless constants with prescribed RT and friction.
  static PhysicalConstants with_rt(double rt, double eta = 1.0) {
    PhysicalConstants c = dimensionless();
    c.T = rt;
    c.eta = eta;
    return c;
  }

  void validate() const {
    for (double v : {R, k, N_A, T, eta, g, c0})
      detail::require(v > 0.0 && std::isfinite(v), "PhysicalConstants: all constants must be finite and > 0");
    detail::require(std::abs(R - k * N_A) <= 1e-6 * R, "PhysicalConstants: R must equal k·N_A to 1e-6");
  }
};

// ---------------------------------------------------------------------------
// Entropies and distances

/// H(μ|ν) = Σ μ_i log(μ_i/ν_i); +∞ unless μ ≪ ν. 0 log 0 = 0.
inline double relative_entropy(std::span<const double> mu, std::span<const double> nu) {
  detail::require(mu.size() == nu.size(), "relative_entropy: supports differ in length");
  double sum = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    detail::require(mu[i] >= 0.0 && nu[i] >= 0.0, "relative_entropy: negative weight");
    if (mu[i] == 0.0) continue;
    if (nu[i] == 0.0) return kInfinity;
    sum += mu[i] * std::log(mu[i] / nu[i]);
  }
  return sum;
}

inline double relative_entropy(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  detail::require(mu.size() == nu.size(), "relative_entropy: supports differ in length");
  detail::require(mu.atoms() == nu.atoms(), "relative_entropy: measures must share the atom list");
  return relative_entropy(std::span<const double>(mu.weights()), std::span<const double>(nu.weights()));
}

/// Cellwise relative entropy h·Σ μ_i log(μ_i/ν_i) of two densities on one grid.
inline double relative_entropy(const GridDensity1D& mu, const GridDensity1D& nu) {
  detail::require(mu.grid() == nu.grid(), "relative_entropy: densities live on different grids");
  const double value = relative_entropy(std::span<const double>(mu.values()), std::span<const double>(nu.values()));
  return value == kInfinity ? value : mu.h() * value;
}

/// Midpoint quadrature of ∫ρ log ρ.
inline double ent_grid(const GridDensity1D& rho) {
  double sum = 0.0;
  for (double v : rho.values()) sum += xlogx(v);
  return rho.h() * sum;
}

/// ½ Σ |μ_i − ν_i| for equal-mass weight vectors.
inline double total_variation(std::span<const double> mu, std::span<const double> nu) {
  detail::require(mu.size() == nu.size(), "total_variation: supports differ in length");
  double m_mu = 0.0, m_nu = 0.0, l1 = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    m_mu += mu[i];
    m_nu += nu[i];
    l1 += std::abs(mu[i] - nu[i]);
  }
  detail::require(std::abs(m_mu - m_nu) <= 1e-12, "total_variation: measures have different mass");
  return 0.5 * l1;
}

inline double total_variation(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  detail::require(mu.atoms() == nu.atoms(), "total_variation: measures must share the atom list");
  return total_variation(std::span<const double>(mu.weights()), std::span<const double>(nu.weights()));
}

/// φ#μ. Atoms keep their order of first appearance; images that coincide
/// exactly merge their weights. Zero-weight atoms are kept so that two
/// measures on one support stay on one support.
template <typename Map>
DiscreteMeasure push_forward(const DiscreteMeasure& mu, Map&& map) {
  std::vector<Point> atoms;
  std::vector<double> weights;
  std::map<Point, std::size_t> index;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    Point y = map(mu.atoms()[i]);
    auto [it, inserted] = index.try_emplace(y, atoms.size());
    if (inserted) {
      atoms.push_back(std::move(y));
      weights.push_back(mu.weights()[i]);
    } else {
      weights[it->second] += mu.weights()[i];
    }
  }
  return DiscreteMeasure(std::move(atoms), std::move(weights));
}

/// (1/n)Σδ_{x_i}, with repeated points merged.
inline DiscreteMeasure empirical_from_samples(const std::vector<Point>& points) {
  detail::require(!points.empty(), "empirical_from_samples: empty sample");
  const double w = 1.0 / static_cast<double>(points.size());
  DiscreteMeasure raw(points, std::vector<double>(points.size(), w));
  return push_forward(raw, [](const Point& x) { return x; });
}

inline double second_moment(const DiscreteMeasure& m) {
  double sum = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    double r2 = 0.0;
    for (double c : m.atoms()[i]) r2 += c * c;
    sum += m.weights()[i] * r2;
  }
  return sum;
}

inline double second_moment(const GridDensity1D& rho) {
  double sum = 0.0;
  for (std::size_t i = 0; i < rho.cells(); ++i) {
    const double x = rho.grid().center(i);
    sum += rho[i] * x * x;
  }
  return rho.h() * sum;
}

inline double mean(const GridDensity1D& rho) {
  double m = 0.0;
  for (std::size_t i = 0; i < rho.cells(); ++i) m += rho[i] * rho.grid().center(i);
  return rho.h() * m / rho.mass();
}

inline double variance(const GridDensity1D& rho) {
  const double mu = mean(rho);
  double v = 0.0;
  for (std::size_t i = 0; i < rho.cells(); ++i) {
    const double d = rho.grid().center(i) - mu;
    v += rho[i] * d * d;
  }
  return rho.h() * v / rho.mass();
}

/// Σ_i h |ρ_i − σ_i| on a shared grid.
inline double l1_distance(const GridDensity1D& rho, const GridDensity1D& sigma) {
  detail::require(rho.grid() == sigma.grid(), "l1_distance: densities live on different grids");
  double sum = 0.0;
  for (std::size_t i = 0; i < rho.cells(); ++i) sum += std::abs(rho[i] - sigma[i]);
  return rho.h() * sum;
}

}  // namespace gradflow
