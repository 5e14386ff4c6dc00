#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gradflow/errors.hpp"
#include "gradflow/measures.hpp"

namespace gradflow {

// ---------------------------------------------------------------------------
// Counter-based random numbers
//
// Every variate is a pure function of (seed, stream, counter), so a
// trajectory does not depend on evaluation order, thread count or platform.

inline constexpr const char* kGeneratorVersion = "splitmix64-ctr-boxmuller/1";

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(splitmix64(splitmix64(seed) ^ (stream * 0xD1B54A32D192ED03ULL))) {}

  std::uint64_t bits(std::uint64_t counter) const { return splitmix64(key_ ^ splitmix64(counter)); }

  /// Uniform on (0, 1], 53 random bits.
  double uniform(std::uint64_t counter) const {
    return (static_cast<double>(bits(counter) >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Standard normal by Box–Muller on the uniform pair (2c, 2c+1).
  double normal(std::uint64_t counter) const {
    const double u1 = uniform(2 * counter), u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::uint64_t key_;
};

// ---------------------------------------------------------------------------
// Interacting particle system

using Matrix = std::vector<std::vector<double>>;

inline Matrix identity_matrix(std::size_t dim, double scale = 1.0) {
  Matrix m(dim, std::vector<double>(dim, 0.0));
  for (std::size_t i = 0; i < dim; ++i) m[i][i] = scale;
  return m;
}

/// Potential on R^d with its gradient.
struct Potential {
  std::function<double(const Point&)> value;
  std::function<Point(const Point&)> gradient;

  explicit operator bool() const { return static_cast<bool>(gradient); }

  /// k|x − c|²/2 (c = 0 when empty).
  static Potential quadratic(double k, Point center = {}) {
    return {[=](const Point& x) {
              double s = 0.0;
              for (std::size_t d = 0; d < x.size(); ++d) {
                const double y = x[d] - (center.empty() ? 0.0 : center[d]);
                s += 0.5 * k * y * y;
              }
              return s;
            },
            [=](const Point& x) {
              Point g(x.size());
              for (std::size_t d = 0; d < x.size(); ++d) g[d] = k * (x[d] - (center.empty() ? 0.0 : center[d]));
              return g;
            }};
  }

  /// One-dimensional potential from value and derivative.
  static Potential scalar(std::function<double(double)> f, std::function<double(double)> df) {
    return {[f](const Point& x) { return f(x[0]); }, [df](const Point& x) { return Point{df(x[0])}; }};
  }
};

struct ParticleEnsemble {
  std::vector<Point> positions;  // n × dim
  Potential background;          // Vb; empty for none
  Potential interaction;         // Vi, evaluated at X_i − X_j; empty for none
  Matrix A;                      // drift mobility, dim × dim
  Matrix sigma;                  // noise matrix, dim × dim
  std::uint64_t seed = 0;

  std::size_t size() const { return positions.size(); }
  std::size_t dim() const { return positions.empty() ? 0 : positions.front().size(); }

  void validate() const {
    detail::require(!positions.empty(), "ParticleEnsemble: need at least one particle");
    const std::size_t d = dim();
    detail::require(d >= 1, "ParticleEnsemble: dimension must be ≥ 1");
    for (const auto& x : positions) {
      detail::require(x.size() == d, "ParticleEnsemble: particles of different dimension");
      for (double c : x) detail::require(std::isfinite(c), "ParticleEnsemble: non-finite initial position");
    }
    auto square = [d](const Matrix& m) {
      if (m.size() != d) return false;
      for (const auto& row : m)
        if (row.size() != d) return false;
      return true;
    };
    detail::require(square(A) && square(sigma), "ParticleEnsemble: A and sigma must be dim × dim");
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        detail::require(std::isfinite(A[i][j]) && std::isfinite(sigma[i][j]), "ParticleEnsemble: non-finite matrix entry");
        detail::require(std::abs(A[i][j] - A[j][i]) <= 1e-12 * (1.0 + std::abs(A[i][j])), "ParticleEnsemble: A must be symmetric");
      }
    // Positive semidefiniteness by Cholesky with a small negative tolerance.
    Matrix L(d, std::vector<double>(d, 0.0));
    double scale = 0.0;
    for (std::size_t i = 0; i < d; ++i) scale = std::max(scale, std::abs(A[i][i]));
    for (std::size_t j = 0; j < d; ++j) {
      double diag = A[j][j];
      for (std::size_t k = 0; k < j; ++k) diag -= L[j][k] * L[j][k];
      detail::require(diag >= -1e-12 * (1.0 + scale), "ParticleEnsemble: A must be positive semidefinite");
      L[j][j] = diag > 0.0 ? std::sqrt(diag) : 0.0;
      for (std::size_t i = j + 1; i < d; ++i) {
        double v = A[i][j];
        for (std::size_t k = 0; k < j; ++k) v -= L[i][k] * L[j][k];
        L[i][j] = L[j][j] > 0.0 ? v / L[j][j] : 0.0;
      }
    }
  }
};

struct ParticleTrajectory {
  std::vector<double> times;
  std::vector<std::vector<Point>> snapshots;  // every snapshot_stride-th step, plus the final one
  std::uint64_t seed = 0;
  double dt = 0.0;

  const std::vector<Point>& final_positions() const { return snapshots.back(); }
};

struct EulerMaruyamaOptions {
  std::size_t snapshot_stride = 0;  // 0: initial and final state only
};

/// X ← X − [A∇Vb(X_i) + (1/n)Σ_j A∇Vi(X_i − X_j)]dt + √(2dt) σ ξ.
inline ParticleTrajectory euler_maruyama(const ParticleEnsemble& ensemble, double dt, double t_end,
                                         const EulerMaruyamaOptions& options = {}) {
  ensemble.validate();
  detail::require(dt > 0.0 && std::isfinite(dt), "euler_maruyama: dt must be positive");
  detail::require(t_end >= 0.0 && std::isfinite(t_end), "euler_maruyama: T must be ≥ 0");
  const std::size_t steps = static_cast<std::size_t>(std::llround(t_end / dt));
  detail::require(std::abs(static_cast<double>(steps) * dt - t_end) <= 1e-9 * std::max(1.0, t_end),
                  "euler_maruyama: T must be an integer multiple of dt");
  const std::size_t n = ensemble.size(), d = ensemble.dim();
  const CounterRng rng(ensemble.seed, 1);
  const double noise_scale = std::sqrt(2.0 * dt);
  const double inv_n = 1.0 / static_cast<double>(n);
  const Matrix& A = ensemble.A;
  const Matrix& S = ensemble.sigma;

  ParticleTrajectory out;
  out.seed = ensemble.seed;
  out.dt = dt;
  std::vector<Point> x = ensemble.positions, next(n, Point(d));
  out.times.push_back(0.0);
  out.snapshots.push_back(x);

  Point force(d), xi(d), diff(d);
  for (std::size_t step = 1; step <= steps; ++step) {
    for (std::size_t i = 0; i < n; ++i) {
      std::fill(force.begin(), force.end(), 0.0);
      if (ensemble.background) {
        const Point g = ensemble.background.gradient(x[i]);
        for (std::size_t a = 0; a < d; ++a) force[a] += g[a];
      }
      if (ensemble.interaction) {
        for (std::size_t j = 0; j < n; ++j) {
          for (std::size_t a = 0; a < d; ++a) diff[a] = x[i][a] - x[j][a];
          const Point g = ensemble.interaction.gradient(diff);
          for (std::size_t a = 0; a < d; ++a) force[a] += inv_n * g[a];
        }
      }
      const std::uint64_t base = ((static_cast<std::uint64_t>(step) - 1) * n + i) * d;
      for (std::size_t a = 0; a < d; ++a) xi[a] = rng.normal(base + a);
      for (std::size_t a = 0; a < d; ++a) {
        double drift = 0.0, noise = 0.0;
        for (std::size_t b = 0; b < d; ++b) {
          drift += A[a][b] * force[b];
          noise += S[a][b] * xi[b];
        }
        const double v = x[i][a] - drift * dt + noise_scale * noise;
        if (!std::isfinite(v)) throw BlowUpError("euler_maruyama: non-finite position", step);
        next[i][a] = v;
      }
    }
    x.swap(next);
    const bool snap = options.snapshot_stride ? step % options.snapshot_stride == 0 : false;
    if (snap || step == steps) {
      out.times.push_back(static_cast<double>(step) * dt);
      out.snapshots.push_back(x);
    }
  }
  return out;
}

inline nlohmann::json ensemble_metadata(const ParticleEnsemble& e, double dt, double t_end) {
  return {{"seed", e.seed}, {"n", e.size()}, {"dt", dt}, {"T", t_end}, {"A", e.A}, {"sigma", e.sigma},
          {"generator_version", kGeneratorVersion}};
}

/// iid samples of N(mean, sd²) in 1D from a dedicated stream of the seed.
inline std::vector<Point> gaussian_positions(std::size_t n, double mean, double sd, std::uint64_t seed) {
  const CounterRng rng(seed, 2);
  std::vector<Point> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = {mean + sd * rng.normal(i)};
  return x;
}

/// Mass-1 histogram of 1D particles. Particles outside [a, b] are dropped
/// and the rest renormalized; more than 0.1% outside is an error.
inline GridDensity1D empirical_density(const std::vector<Point>& positions, const UniformGrid& grid) {
  detail::require(!positions.empty(), "empirical_density: no particles");
  std::vector<double> counts(grid.cells, 0.0);
  std::size_t inside = 0;
  for (const auto& p : positions) {
    detail::require(p.size() == 1, "empirical_density: particles must be one-dimensional");
    const double x = p[0];
    if (!(x >= grid.a && x <= grid.b)) continue;
    auto cell = static_cast<std::size_t>((x - grid.a) / grid.h());
    if (cell >= grid.cells) cell = grid.cells - 1;
    counts[cell] += 1.0;
    ++inside;
  }
  const std::size_t lost = positions.size() - inside;
  if (static_cast<double>(lost) > 1e-3 * static_cast<double>(positions.size()))
    throw ConsistencyError("empirical_density: " + std::to_string(lost) + " of " + std::to_string(positions.size()) +
                           " particles lie outside the domain");
  const double scale = 1.0 / (static_cast<double>(inside) * grid.h());
  for (double& c : counts) c *= scale;
  return GridDensity1D(grid, std::move(counts));
}

}  // namespace gradflow
