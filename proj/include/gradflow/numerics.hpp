#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "gradflow/errors.hpp"

namespace gradflow {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// x log x with the convention 0 log 0 = 0.
inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

/// Logarithmic mean (a − b)/(log a − log b); zero if either argument is nonpositive.
///
/// This is the interface density used by every conservative transport
/// operator in the library: with it, ρ̄ (log ρ_{k+1} − log ρ_k) = ρ_{k+1} − ρ_k
/// holds exactly, so the Wasserstein gradient of the entropy is the discrete
/// Laplacian and Boltzmann profiles are exact discrete equilibria.
inline double log_mean(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) return 0.0;
  const double r = b / a - 1.0;
  if (std::abs(r) < 1e-4) {
    // series of r / log(1 + r)
    return a * (1.0 + r / 2.0 - r * r / 12.0 + r * r * r / 24.0);
  }
  return (b - a) / std::log(b / a);
}

/// Stable log Σ exp(v_i); −∞ for an empty range.
inline double log_sum_exp(std::span<const double> values) {
  double peak = -kInfinity;
  for (double v : values) peak = std::max(peak, v);
  if (peak == -kInfinity) return -kInfinity;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - peak);
  return peak + std::log(sum);
}

/// Solves a tridiagonal system by the Thomas algorithm.
///
/// `lower[i]` multiplies x[i−1] in row i (lower[0] unused), `upper[i]`
/// multiplies x[i+1] (upper[n−1] unused). No pivoting: intended for the
/// diagonally dominant M-matrices produced by the elliptic operators here.
inline std::vector<double> solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                                             std::span<const double> upper, std::span<const double> rhs) {
  const std::size_t n = diag.size();
  detail::require(lower.size() == n && upper.size() == n && rhs.size() == n,
                  "solve_tridiagonal: inconsistent sizes");
  std::vector<double> c(n), d(n), x(n);
  if (n == 0) return x;
  double pivot = diag[0];
  detail::require<SingularWeightError>(pivot != 0.0, "solve_tridiagonal: zero pivot");
  c[0] = upper[0] / pivot;
  d[0] = rhs[0] / pivot;
  for (std::size_t i = 1; i < n; ++i) {
    pivot = diag[i] - lower[i] * c[i - 1];
    detail::require<SingularWeightError>(pivot != 0.0 && std::isfinite(pivot), "solve_tridiagonal: zero pivot");
    c[i] = upper[i] / pivot;
    d[i] = (rhs[i] - lower[i] * d[i - 1]) / pivot;
  }
  x[n - 1] = d[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
  return x;
}

/// Solves −(w ξ′)′ = s on n cells of width h with no-flux ends.
///
/// `weights` holds the n−1 interior interface coefficients (all > 0) and
/// `rhs` the n cell values. The pure-Neumann operator has the constants in
/// its kernel, so the caller must supply h·Σ s = 0; the gauge is fixed by
/// returning the zero-mean solution.
inline std::vector<double> solve_weighted_neumann(std::span<const double> weights, std::span<const double> rhs,
                                                  double h) {
  const std::size_t n = rhs.size();
  detail::require(n >= 2 && weights.size() == n - 1, "solve_weighted_neumann: need n ≥ 2 cells and n−1 weights");
  for (double w : weights)
    detail::require<SingularWeightError>(w > 0.0 && std::isfinite(w), "solve_weighted_neumann: nonpositive weight");

  // Pin ξ_0 = 0 and drop row 0; the remaining rows are nonsingular and
  // row 0 follows from the compatibility condition.
  const std::size_t m = n - 1;
  std::vector<double> lower(m, 0.0), diag(m, 0.0), upper(m, 0.0), b(m, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t i = r + 1;
    const double left = weights[i - 1];
    const double right = i + 1 < n ? weights[i] : 0.0;
    diag[r] = left + right;
    if (r > 0) lower[r] = -left;
    if (i + 1 < n) upper[r] = -right;
    b[r] = h * h * rhs[i];
  }
  const std::vector<double> tail = solve_tridiagonal(lower, diag, upper, b);

  std::vector<double> xi(n, 0.0);
  std::copy(tail.begin(), tail.end(), xi.begin() + 1);
  const double mean = std::accumulate(xi.begin(), xi.end(), 0.0) / static_cast<double>(n);
  for (double& v : xi) v -= mean;
  return xi;
}

/// Symmetric positive definite banded solve (no pivoting).
///
/// `band[i][k]` stores A(i, i+k) for k = 0..p. Used for the ladder-graph
/// Laplacians of coupled 1D fields, where the half bandwidth is 2.
inline std::vector<double> solve_banded_spd(std::vector<std::vector<double>> band, std::vector<double> rhs) {
  const std::size_t n = rhs.size();
  detail::require(band.size() == n, "solve_banded_spd: size mismatch");
  const std::size_t p = n == 0 ? 0 : band[0].size() - 1;
  // In-place LDLᵀ on the band.
  for (std::size_t i = 0; i < n; ++i) {
    const double pivot = band[i][0];
    detail::require<SingularWeightError>(pivot > 0.0 && std::isfinite(pivot), "solve_banded_spd: matrix not SPD");
    for (std::size_t k = 1; k <= p && i + k < n; ++k) {
      const double factor = band[i][k] / pivot;
      if (factor == 0.0) continue;
      for (std::size_t l = k; l <= p && i + l < n; ++l) band[i + k][l - k] -= factor * band[i][l];
      rhs[i + k] -= factor * rhs[i];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double acc = rhs[i];
    for (std::size_t k = 1; k <= p && i + k < n; ++k) acc -= band[i][k] * x[i + k];
    x[i] = acc / band[i][0];
  }
  return x;
}

}  // namespace gradflow
