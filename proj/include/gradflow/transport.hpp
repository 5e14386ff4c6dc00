#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "gradflow/errors.hpp"
#include "gradflow/measures.hpp"
#include "gradflow/numerics.hpp"

namespace gradflow {

/// Optimal matching between two equal-size, equal-weight atomic measures.
struct TransportPlan {
  std::vector<std::size_t> permutation;  // x_i is sent to y_{permutation[i]}
  double cost = 0.0;                     // (1/n) Σ |x_i − y_σ(i)|² = W2²

  double distance() const { return std::sqrt(cost); }
};

inline nlohmann::json to_json(const TransportPlan& plan) {
  return {{"n", plan.permutation.size()}, {"cost", plan.cost}, {"permutation", plan.permutation}};
}

inline double squared_distance(const Point& x, const Point& y) {
  detail::require(x.size() == y.size(), "squared_distance: dimension mismatch");
  double d2 = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - y[k];
    d2 += d * d;
  }
  return d2;
}

/// (1/n) Σ |x_i − y_σ(i)|², summed in index order.
inline double matching_cost(const std::vector<Point>& x, const std::vector<Point>& y,
                            std::span<const std::size_t> permutation) {
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += squared_distance(x[i], y[permutation[i]]);
  return sum / static_cast<double>(x.size());
}

/// Exhaustive minimum over all n! permutations; n ≤ 9.
inline TransportPlan w2_atomic_bruteforce(const std::vector<Point>& x, const std::vector<Point>& y) {
  detail::require(x.size() == y.size(), "w2_atomic_bruteforce: point sets differ in size");
  detail::require(!x.empty(), "w2_atomic_bruteforce: empty point sets");
  detail::require<SizeError>(x.size() <= 9, "w2_atomic_bruteforce: n > 9 (factorial guard)");
  std::vector<std::size_t> perm(x.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  TransportPlan best{perm, matching_cost(x, y, perm)};
  while (std::next_permutation(perm.begin(), perm.end())) {
    const double c = matching_cost(x, y, perm);
    if (c < best.cost) best = {perm, c};
  }
  return best;
}

/// Exact assignment by the O(n³) shortest-augmenting-path Hungarian method.
inline TransportPlan w2_atomic(const std::vector<Point>& x, const std::vector<Point>& y) {
  detail::require(x.size() == y.size(), "w2_atomic: point sets differ in size");
  detail::require(!x.empty(), "w2_atomic: empty point sets");
  const std::size_t n = x.size();
  constexpr double inf = std::numeric_limits<double>::infinity();

  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = squared_distance(x[i], y[j]);

  // Potentials u (rows), v (columns); match[j] is the row assigned to
  // column j, with index 0 reserved as the virtual root.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t row = 1; row <= n; ++row) {
    match[0] = row;
    std::size_t col0 = 0;
    std::vector<double> slack(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[col0] = 1;
      const std::size_t i0 = match[col0];
      double delta = inf;
      std::size_t col1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double reduced = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (reduced < slack[j]) {
          slack[j] = reduced;
          way[j] = col0;
        }
        if (slack[j] < delta) {
          delta = slack[j];
          col1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          slack[j] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }

  std::vector<std::size_t> perm(n);
  for (std::size_t j = 1; j <= n; ++j) perm[match[j] - 1] = j - 1;
  return {perm, matching_cost(x, y, perm)};
}

namespace detail {

/// Quantile function of a piecewise-constant probability density, evaluated at m ∈ (0,1).
class CellQuantile {
 public:
  explicit CellQuantile(const GridDensity1D& rho) : grid_(rho.grid()), cdf_(rho.cells() + 1, 0.0) {
    const double m = rho.mass();
    for (std::size_t i = 0; i < rho.cells(); ++i) cdf_[i + 1] = cdf_[i] + rho.h() * rho[i] / m;
    cdf_.back() = 1.0;
  }

  double operator()(double m) const {
    // First cell whose upper cumulative mass reaches m; empty cells are skipped.
    auto it = std::lower_bound(cdf_.begin() + 1, cdf_.end(), m);
    if (it == cdf_.end()) it = cdf_.end() - 1;
    const std::size_t i = static_cast<std::size_t>(it - cdf_.begin()) - 1;
    const double lo = cdf_[i], hi = cdf_[i + 1];
    const double frac = hi > lo ? std::clamp((m - lo) / (hi - lo), 0.0, 1.0) : 0.0;
    return grid_.a + (static_cast<double>(i) + frac) * grid_.h();
  }

 private:
  UniformGrid grid_;
  std::vector<double> cdf_;
};

}  // namespace detail

/// W2 between two equal-mass grid densities via the 1D quantile formula.
///
/// Both densities are normalized to probability, the quantile functions are
/// compared at 4n midpoint mass nodes (n the larger cell count), and the
/// squared distance is rescaled by the common mass.
inline double w2_grid_1d(const GridDensity1D& rho0, const GridDensity1D& rho1) {
  const double m0 = rho0.mass(), m1 = rho1.mass();
  detail::require(m0 > 0.0 && m1 > 0.0, "w2_grid_1d: densities must have positive mass");
  detail::require(std::abs(m0 - m1) <= 1e-10 * std::max(1.0, m0),
                  "w2_grid_1d: distance between measures of different mass is not defined");
  const detail::CellQuantile q0(rho0), q1(rho1);
  const std::size_t nodes = 4 * std::max(rho0.cells(), rho1.cells());
  double sum = 0.0;
  for (std::size_t j = 0; j < nodes; ++j) {
    const double m = (static_cast<double>(j) + 0.5) / static_cast<double>(nodes);
    const double d = q0(m) - q1(m);
    sum += d * d;
  }
  return std::sqrt(m0 * sum / static_cast<double>(nodes));
}

// ---------------------------------------------------------------------------
// Local (−1,ρ) and (1,ρ) norms

/// Interior interface densities (log mean of the adjacent cells).
inline std::vector<double> interface_densities(const GridDensity1D& rho) {
  std::vector<double> w(rho.cells() - 1);
  for (std::size_t k = 0; k + 1 < rho.cells(); ++k) w[k] = log_mean(rho[k], rho[k + 1]);
  return w;
}

/// Result of a primal norm computation: ‖s‖² together with its potential ξ.
struct LocalNorm {
  double norm_sq = 0.0;
  std::vector<double> xi;  // zero-mean cell potential with −(ρξ′)′ = s

  double norm() const { return std::sqrt(norm_sq); }
};

/// Σ_k w_k |ξ_{k+1} − ξ_k|²/h over interior interfaces.
inline double weighted_dirichlet(std::span<const double> weights, std::span<const double> xi, double h) {
  detail::require(weights.size() + 1 == xi.size(), "weighted_dirichlet: need n−1 weights for n cells");
  double sum = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const double g = (xi[k + 1] - xi[k]) / h;
    sum += weights[k] * g * g;
  }
  return h * sum;
}

/// ‖s‖²_{−1,w} for interface weights w: solves −(wξ′)′ = s with no-flux ends.
inline LocalNorm weighted_primal_norm(std::span<const double> weights, std::span<const double> s, double h) {
  detail::require(weights.size() + 1 == s.size(), "weighted_primal_norm: need n−1 weights for n cells");
  double total = 0.0, scale = 0.0;
  for (double v : s) {
    total += v;
    scale += std::abs(v);
  }
  detail::require(std::abs(total) <= 1e-9 * scale, "local_w_norm: rate field must have zero total mass");
  if (scale == 0.0) return {0.0, std::vector<double>(s.size(), 0.0)};
  for (double w : weights)
    detail::require<SingularWeightError>(w > 0.0, "local_w_norm: vacuum interface (density must be strictly positive)");
  LocalNorm out;
  out.xi = solve_weighted_neumann(weights, s, h);
  out.norm_sq = weighted_dirichlet(weights, out.xi, h);
  return out;
}

/// Primal Wasserstein norm ‖s‖²_{−1,ρ} of a zero-mass rate field.
inline LocalNorm local_w_norm(const GridDensity1D& rho, std::span<const double> s) {
  detail::require(s.size() == rho.cells(), "local_w_norm: rate field size must equal cell count");
  detail::require<SingularWeightError>(rho.strictly_positive(), "local_w_norm: density has a vacuum cell");
  const auto w = interface_densities(rho);
  return weighted_primal_norm(w, s, rho.h());
}

/// Dual norm ‖ξ‖²_{1,ρ} = ∫|ξ′|² dρ.
inline double dual_w_norm(const GridDensity1D& rho, std::span<const double> xi) {
  detail::require(xi.size() == rho.cells(), "dual_w_norm: potential size must equal cell count");
  const auto w = interface_densities(rho);
  return weighted_dirichlet(w, xi, rho.h());
}

/// h·Σ a_i b_i, the L² pairing of two cell fields.
inline double grid_pairing(std::span<const double> a, std::span<const double> b, double h) {
  detail::require(a.size() == b.size(), "grid_pairing: size mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return h * sum;
}

/// Tangent pair (s, v) at ρ: cell rates s and interface velocities v with s + (ρ̄v)′ = 0.
struct TangentField1D {
  UniformGrid grid;
  std::vector<double> s;  // per cell
  std::vector<double> v;  // per interior interface; v = 0 at the ends

  /// s = −(ρ̄v)′ for a given velocity.
  static TangentField1D from_velocity(const GridDensity1D& rho, std::vector<double> v) {
    detail::require(v.size() + 1 == rho.cells(), "TangentField1D: need one velocity per interior interface");
    const auto w = interface_densities(rho);
    std::vector<double> s(rho.cells(), 0.0);
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double flux = w[k] * v[k];
      s[k] -= flux / rho.h();
      s[k + 1] += flux / rho.h();
    }
    return {rho.grid(), std::move(s), std::move(v)};
  }

  /// The gradient representative v = ξ′ of a zero-mass rate s.
  static TangentField1D from_rate(const GridDensity1D& rho, std::vector<double> s) {
    const auto norm = local_w_norm(rho, s);
    std::vector<double> v(rho.cells() - 1);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = (norm.xi[k + 1] - norm.xi[k]) / rho.h();
    return {rho.grid(), std::move(s), std::move(v)};
  }

  /// h·Σ s_i.
  double mass_rate() const {
    double sum = 0.0;
    for (double x : s) sum += x;
    return grid.h() * sum;
  }

  /// max_i |s_i + (ρ̄v)′_i|.
  double continuity_residual(const GridDensity1D& rho) const {
    detail::require(rho.grid() == grid && s.size() == grid.cells && v.size() + 1 == grid.cells,
                    "TangentField1D: field does not match the density");
    const auto exact = from_velocity(rho, v).s;
    double worst = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) worst = std::max(worst, std::abs(s[i] - exact[i]));
    return worst;
  }

  /// Zero mass rate to 1e−12 and the continuity equation to `tolerance`, both relative to max|s|.
  void validate(const GridDensity1D& rho, double tolerance = 1e-9) const {
    double scale = 1.0;
    for (double x : s) scale = std::max(scale, std::abs(x));
    detail::require(std::abs(mass_rate()) <= 1e-12 * scale, "TangentField1D: nonzero total mass rate");
    detail::require(continuity_residual(rho) <= tolerance * scale, "TangentField1D: continuity equation violated");
  }
};

// ---------------------------------------------------------------------------
// Path actions

struct PathActionStep {
  std::size_t step = 0;
  double time = 0.0;
  double local_norm_sq = 0.0;
};

/// Per-step squared local norms of a density path, evaluated at the midpoints ½(ρ_k + ρ_{k+1}).
inline std::vector<PathActionStep> path_action_steps(const std::vector<GridDensity1D>& path, double dt) {
  detail::require(dt > 0.0, "path_action: dt must be positive");
  std::vector<PathActionStep> steps;
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    const auto& a = path[k];
    const auto& b = path[k + 1];
    detail::require(a.grid() == b.grid(), "path_action: densities on different grids");
    std::vector<double> mid(a.cells()), rate(a.cells());
    for (std::size_t i = 0; i < a.cells(); ++i) {
      mid[i] = 0.5 * (a[i] + b[i]);
      rate[i] = (b[i] - a[i]) / dt;
    }
    const GridDensity1D rho_mid(a.grid(), std::move(mid));
    steps.push_back({k, static_cast<double>(k) * dt, local_w_norm(rho_mid, rate).norm_sq});
  }
  return steps;
}

/// Σ_k ‖(ρ_{k+1} − ρ_k)/dt‖²_{−1,ρ_mid} dt, the discrete Benamou–Brenier action.
inline double path_action(const std::vector<GridDensity1D>& path, double dt) {
  double sum = 0.0;
  for (const auto& s : path_action_steps(path, dt)) sum += s.local_norm_sq;
  return sum * dt;
}

/// (1/n) Σ_i Σ_k |Δx_{i,k}|²/dt for n particle paths sampled at spacing dt.
inline double atomic_path_action(const std::vector<std::vector<Point>>& trajectories, double dt) {
  detail::require(dt > 0.0, "atomic_path_action: dt must be positive");
  detail::require(!trajectories.empty(), "atomic_path_action: no trajectories");
  const std::size_t len = trajectories.front().size();
  double sum = 0.0;
  for (const auto& path : trajectories) {
    detail::require(path.size() == len, "atomic_path_action: trajectories of different length");
    for (std::size_t k = 0; k + 1 < path.size(); ++k) sum += squared_distance(path[k + 1], path[k]);
  }
  return sum / (dt * static_cast<double>(trajectories.size()));
}

}  // namespace gradflow
