#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gradflow/errors.hpp"
#include "gradflow/gradient_flow.hpp"
#include "gradflow/measures.hpp"
#include "gradflow/numerics.hpp"
#include "gradflow/particles.hpp"
#include "gradflow/transport.hpp"

// Fluctuations of the interacting particle system around its hydrodynamic
// limit, with drift mobility A = 1/η and noise σσᵀ = kT/η (Einstein relation):
//
//   ρ̇ = div(D(ρ)∇DF(ρ)),  D(ρ) = ρ kT/η,  F = Ent + (1/kT)∫[ρVb + ½ρ(ρ∗Vi)]
//   I(ρ) = ¼∫‖ρ̇ − div(D∇DF)‖²_{−1,D(ρ)} dt
//
// In dimensionless units (kT = η = 1) this is exactly the functional of the
// notes with ‖·‖_{−1,ρ}.

namespace gradflow {

/// F = Ent + (1/kT)∫[ρVb + ½ρ(ρ∗Vi)] on a grid.
inline GridFreeEnergy interacting_free_energy(const UniformGrid& grid, const PhysicalConstants& constants,
                                              const SmoothFunction& Vb, const std::function<double(double)>& Vi) {
  const double kt = constants.kt();
  GridFreeEnergy e = GridFreeEnergy::entropy(grid, 1.0);
  if (Vb) {
    e.potential = {[f = Vb.f, kt](double x) { return f(x) / kt; }, [f = Vb.df, kt](double x) { return f(x) / kt; },
                   [f = Vb.d2f, kt](double x) { return f ? f(x) / kt : 0.0; }};
  }
  if (Vi) e.interaction = [Vi, kt](double x) { return Vi(x) / kt; };
  return e;
}

/// The hydrodynamic limit as a FlowProblem: Wasserstein dissipation with friction η/kT.
inline FlowProblem interaction_problem(const UniformGrid& grid, const PhysicalConstants& constants,
                                       const SmoothFunction& Vb, const std::function<double(double)>& Vi) {
  return FlowProblem(EnergyFunctional(interacting_free_energy(grid, constants, Vb, Vi)),
                     QuadraticDissipation::wasserstein(grid, constants.eta / constants.kt()));
}

namespace detail {

/// Removes a roundoff-level total mass from a rate field. `reference` is the
/// size of the quantities s was computed from; a defect above 1e−9 of it is a
/// genuine mass change and is reported.
inline void remove_roundoff_mass(std::vector<double>& s, double reference, const char* who) {
  double total = 0.0;
  for (double v : s) total += v;
  require(std::abs(total) <= 1e-9 * reference, std::string(who) + ": path does not conserve mass");
  const double mean = total / static_cast<double>(s.size());
  for (double& v : s) v -= mean;
}

}  // namespace detail

/// The rate functional and the terms of its energy-dissipation expansion,
///   I = ¼Σ‖ρ̇‖²dt + ½Σ⟨DF(ρ_k), ρ_{k+1} − ρ_k⟩ + ¼Σ‖DF‖²_{1,D}dt,
/// all evaluated at the left end point ρ_k of every step.
struct RateFunctionalTerms {
  double rate = 0.0;            // I
  double primal = 0.0;          // ¼Σ‖ρ̇‖²_{−1,D} dt
  double dual = 0.0;            // ¼Σ‖DF‖²_{1,D} dt
  double cross = 0.0;           // ½Σ⟨DF(ρ_k), ρ_{k+1} − ρ_k⟩
  double energy_change = 0.0;   // F(ρ_T) − F(ρ_0)
};

inline RateFunctionalTerms rate_functional_terms(const std::vector<GridDensity1D>& path, double dt,
                                                 const PhysicalConstants& constants, const SmoothFunction& Vb,
                                                 const std::function<double(double)>& Vi = {}) {
  detail::require(dt > 0.0, "rate_functional: dt must be positive");
  detail::require(path.size() >= 1, "rate_functional: empty path");
  const UniformGrid& grid = path.front().grid();
  for (const auto& r : path) detail::require(r.grid() == grid, "rate_functional: path densities on different grids");
  const EnergyFunctional F(interacting_free_energy(grid, constants, Vb, Vi));
  const double mobility = constants.kt() / constants.eta;  // D = ρ·mobility
  const double h = grid.h();

  RateFunctionalTerms t;
  t.energy_change = F.value(path.back().values()) - F.value(path.front().values());
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    const auto& rho = path[k];
    detail::require<SingularWeightError>(rho.strictly_positive(), "rate_functional: density has a vacuum cell");
    const State drive = wasserstein_gradient(rho, F);  // div(ρ̄∇DF)
    const State df = F.derivative(rho.values());
    State rate(rho.cells()), residual(rho.cells());
    double reference = 0.0;
    for (std::size_t i = 0; i < rho.cells(); ++i) {
      rate[i] = (path[k + 1][i] - rho[i]) / dt;
      residual[i] = rate[i] - mobility * drive[i];
      reference += (path[k + 1][i] + rho[i]) / dt + std::abs(mobility * drive[i]);
    }
    detail::remove_roundoff_mass(rate, reference, "rate_functional");
    detail::remove_roundoff_mass(residual, reference, "rate_functional");
    // ‖s‖²_{−1,D} = ‖s‖²_{−1,ρ}/mobility and ‖ξ‖²_{1,D} = mobility·‖ξ‖²_{1,ρ}
    t.rate += 0.25 * local_w_norm(rho, residual).norm_sq / mobility * dt;
    t.primal += 0.25 * local_w_norm(rho, rate).norm_sq / mobility * dt;
    t.dual += 0.25 * mobility * dual_w_norm(rho, df) * dt;
    t.cross += 0.5 * grid_pairing(df, rate, h) * dt;
  }
  return t;
}

inline double rate_functional(const std::vector<GridDensity1D>& path, double dt, const PhysicalConstants& constants,
                              const SmoothFunction& Vb, const std::function<double(double)>& Vi = {}) {
  return rate_functional_terms(path, dt, constants, Vb, Vi).rate;
}

// ---------------------------------------------------------------------------
// Geometry and reversibility
//
// The state is one or two coupled 1D fields ("channels") on a common grid:
// a ladder graph with x edges inside a channel and y edges, of length
// `channel_spacing`, between the channels at equal x. With two channels this
// is a 2 × n finite-volume grid and A, σ act on the (x, y) components, so the
// non-proportional case σσᵀ ≠ kT·A can be realized.

using ChannelState = std::vector<GridDensity1D>;

/// Piecewise-linear path through `knots` with `per_segment` steps per segment.
inline std::vector<ChannelState> linear_path(const std::vector<ChannelState>& knots, std::size_t per_segment) {
  detail::require(knots.size() >= 2, "linear_path: need at least two knots");
  detail::require(per_segment >= 1, "linear_path: need at least one step per segment");
  std::vector<ChannelState> path;
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    detail::require(knots[k].size() == knots[k + 1].size(), "linear_path: knots with different channel counts");
    for (std::size_t j = 0; j < per_segment; ++j) {
      const double t = static_cast<double>(j) / static_cast<double>(per_segment);
      ChannelState s;
      for (std::size_t c = 0; c < knots[k].size(); ++c) {
        const auto& r0 = knots[k][c];
        const auto& r1 = knots[k + 1][c];
        detail::require(r0.grid() == r1.grid(), "linear_path: knots on different grids");
        std::vector<double> v(r0.cells());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = (1.0 - t) * r0[i] + t * r1[i];
        s.emplace_back(r0.grid(), std::move(v));
      }
      path.push_back(std::move(s));
    }
  }
  path.push_back(knots.back());
  return path;
}

struct ReversibilitySetup {
  Matrix A;      // channels × channels, diagonal
  Matrix sigma;  // channels × channels, diagonal
  std::function<double(double x, double y)> Vb;  // empty for none
  std::function<double(double)> Vi;              // one channel only; empty for none
  double channel_spacing = 1.0;
  double quadrature_tolerance = 1e-10;  // adaptive Gauss–Legendre tolerance per path segment
};

struct ReversibilityResult {
  double crossterm_path1 = 0.0;
  double crossterm_path2 = 0.0;
  bool proportional = false;  // σσᵀ = kT·A for some kT > 0
  double kt = 0.0;            // the ratio when proportional

  double difference() const { return std::abs(crossterm_path1 - crossterm_path2); }
};

namespace detail {

inline void gauss_legendre(std::size_t n, std::vector<double>& nodes, std::vector<double>& weights) {
  // On [0, 1].
  static const std::array<std::vector<double>, 5> x = {
      std::vector<double>{0.0},
      std::vector<double>{-0.5773502691896257, 0.5773502691896257},
      std::vector<double>{-0.7745966692414834, 0.0, 0.7745966692414834},
      std::vector<double>{-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526},
      std::vector<double>{-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831, 0.9061798459386640}};
  static const std::array<std::vector<double>, 5> w = {
      std::vector<double>{2.0},
      std::vector<double>{1.0, 1.0},
      std::vector<double>{0.5555555555555556, 0.8888888888888888, 0.5555555555555556},
      std::vector<double>{0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538},
      std::vector<double>{0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                          0.2369268850561891}};
  require(n >= 1 && n <= 5, "Gauss–Legendre: 1 to 5 nodes");
  nodes.resize(n);
  weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    nodes[i] = 0.5 * (x[n - 1][i] + 1.0);
    weights[i] = 0.5 * w[n - 1][i];
  }
}

class LadderGraph {
 public:
  LadderGraph(const UniformGrid& grid, std::size_t channels, double spacing)
      : grid_(grid), channels_(channels), spacing_(spacing) {
    const std::size_t n = grid.cells;
    const double h = grid.h();
    // A single channel is a plain 1D grid: unit face measure.
    const double face_x = channels == 1 ? 1.0 : spacing_;
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t i = 0; i + 1 < n; ++i) edges_.push_back({node(i, c), node(i + 1, c), face_x / h, h, 0});
    if (channels == 2)
      for (std::size_t i = 0; i < n; ++i) edges_.push_back({node(i, 0), node(i, 1), h / spacing_, spacing_, 1});
  }

  struct Edge {
    std::size_t p, q;       // nodes
    double transmissibility;  // face measure / length
    double length;
    std::size_t direction;  // 0 = x, 1 = y
  };

  std::size_t node(std::size_t i, std::size_t c) const { return i * channels_ + c; }
  std::size_t nodes() const { return grid_.cells * channels_; }
  double cell_measure() const { return channels_ == 1 ? grid_.h() : grid_.h() * spacing_; }
  const std::vector<Edge>& edges() const { return edges_; }

  double x(std::size_t p) const { return grid_.center(p / channels_); }
  double y(std::size_t p) const { return static_cast<double>(p % channels_) * spacing_; }

  /// Solves −div(D∇ξ) = s for edge conductances D (zero-mean ξ).
  std::vector<double> solve(const std::vector<double>& conductance, const std::vector<double>& s) const {
    const std::size_t m = nodes();
    double total = 0.0, scale = 0.0;
    for (double v : s) {
      total += v;
      scale += std::abs(v);
    }
    require(std::abs(total) <= 1e-9 * std::max(scale, 1e-300) || scale == 0.0,
            "reversibility_check: rate field must have zero total mass");
    if (scale == 0.0) return std::vector<double>(m, 0.0);
    // Pin node 0; assemble the remaining rows as a band of half width `channels`.
    const std::size_t p_band = channels_;
    std::vector<std::vector<double>> band(m - 1, std::vector<double>(p_band + 1, 0.0));
    std::vector<double> rhs(m - 1);
    for (std::size_t r = 0; r + 1 < m; ++r) rhs[r] = s[r + 1] * cell_measure();
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const auto& E = edges_[e];
      const double g = conductance[e] * E.transmissibility;
      require<SingularWeightError>(g > 0.0, "reversibility_check: vacuum edge");
      if (E.p > 0) band[E.p - 1][0] += g;
      if (E.q > 0) band[E.q - 1][0] += g;
      if (E.p > 0 && E.q > 0) band[std::min(E.p, E.q) - 1][std::max(E.p, E.q) - std::min(E.p, E.q)] -= g;
    }
    const auto tail = solve_banded_spd(std::move(band), std::move(rhs));
    std::vector<double> xi(m, 0.0);
    std::copy(tail.begin(), tail.end(), xi.begin() + 1);
    double mean = 0.0;
    for (double v : xi) mean += v;
    mean /= static_cast<double>(m);
    for (double& v : xi) v -= mean;
    return xi;
  }

 private:
  UniformGrid grid_;
  std::size_t channels_;
  double spacing_;
  std::vector<Edge> edges_;
};

}  // namespace detail

/// Cross term ∫(ρ̇, −div σσᵀ∇ρ − div ρA∇[Vb + ρ∗Vi])_{−1,D(ρ)} dt, D = ρσσᵀ,
/// along two piecewise-linear paths with the same end points.
inline ReversibilityResult reversibility_check(const ReversibilitySetup& setup, const std::vector<ChannelState>& path1,
                                               const std::vector<ChannelState>& path2, double dt) {
  detail::require(dt > 0.0, "reversibility_check: dt must be positive");
  detail::require(!path1.empty() && !path2.empty(), "reversibility_check: empty path");
  const std::size_t channels = path1.front().size();
  detail::require(channels == 1 || channels == 2, "reversibility_check: one or two channels");
  detail::require(setup.A.size() == channels && setup.sigma.size() == channels,
                  "reversibility_check: A and sigma must be channels × channels");
  std::vector<double> a(channels), s2(channels);
  for (std::size_t i = 0; i < channels; ++i) {
    detail::require(setup.A[i].size() == channels && setup.sigma[i].size() == channels,
                    "reversibility_check: A and sigma must be channels × channels");
    for (std::size_t j = 0; j < channels; ++j)
      if (i != j)
        detail::require(setup.A[i][j] == 0.0 && setup.sigma[i][j] == 0.0,
                        "reversibility_check: A and sigma must be diagonal");
    a[i] = setup.A[i][i];
    s2[i] = setup.sigma[i][i] * setup.sigma[i][i];
    detail::require(a[i] >= 0.0 && s2[i] > 0.0, "reversibility_check: need A ≥ 0 and σ nonsingular");
  }
  detail::require(!setup.Vi || channels == 1, "reversibility_check: interaction is supported for one channel only");

  const UniformGrid grid = path1.front().front().grid();
  auto check_path = [&](const std::vector<ChannelState>& path) {
    for (const auto& st : path) {
      detail::require(st.size() == channels, "reversibility_check: inconsistent channel count");
      for (const auto& r : st) {
        detail::require(r.grid() == grid, "reversibility_check: densities on different grids");
        detail::require<SingularWeightError>(r.strictly_positive(), "reversibility_check: density has a vacuum cell");
      }
    }
  };
  check_path(path1);
  check_path(path2);
  for (std::size_t c = 0; c < channels; ++c)
    detail::require(path1.front()[c] == path2.front()[c] && path1.back()[c] == path2.back()[c],
                    "reversibility_check: paths must share end points");

  const detail::LadderGraph graph(grid, channels, setup.channel_spacing);
  std::vector<double> vb(graph.nodes(), 0.0);
  if (setup.Vb)
    for (std::size_t p = 0; p < graph.nodes(); ++p) vb[p] = setup.Vb(graph.x(p), graph.y(p));
  detail::require(setup.quadrature_tolerance > 0.0, "reversibility_check: quadrature tolerance must be positive");
  std::vector<double> gl_x, gl_w;
  detail::gauss_legendre(5, gl_x, gl_w);

  auto flatten = [&](const ChannelState& st) {
    std::vector<double> v(graph.nodes());
    for (std::size_t i = 0; i < grid.cells; ++i)
      for (std::size_t c = 0; c < channels; ++c) v[graph.node(i, c)] = st[c][i];
    return v;
  };

  // (s1, s2)_{−1,D} = Σ_e T_e ℓ_e² (ξ_q − ξ_p)/ℓ_e · G_e, with −div(D∇ξ) = s1.
  auto rate = [&](const std::vector<double>& rho, const std::vector<double>& drho) {
    std::vector<double> potential = vb;
    if (setup.Vi) {
      const double h = grid.h();
      for (std::size_t i = 0; i < grid.cells; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < grid.cells; ++j) acc += setup.Vi(grid.center(i) - grid.center(j)) * rho[j];
        potential[i] += h * acc;
      }
    }
    const auto& edges = graph.edges();
    std::vector<double> conductance(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e)
      conductance[e] = s2[edges[e].direction] * log_mean(rho[edges[e].p], rho[edges[e].q]);
    const auto xi = graph.solve(conductance, drho);
    double value = 0.0;
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const auto& E = edges[e];
      const double l = E.length;
      const double rbar = log_mean(rho[E.p], rho[E.q]);
      const double G = s2[E.direction] * (rho[E.q] - rho[E.p]) / l + a[E.direction] * rbar * (potential[E.q] - potential[E.p]) / l;
      value += E.transmissibility * l * (xi[E.q] - xi[E.p]) * G;
    }
    return value;
  };

  auto cross = [&](const std::vector<ChannelState>& path) {
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      const auto r0 = flatten(path[k]), r1 = flatten(path[k + 1]);
      std::vector<double> drho(r0.size()), rho(r0.size());
      for (std::size_t p = 0; p < r0.size(); ++p) drho[p] = (r1[p] - r0[p]) / dt;
      // Low-density cells make log ρ(t) vary fast along a segment, so the
      // 5-point rule is applied adaptively by bisection.
      auto panel = [&](double lo, double hi) {
        double v = 0.0;
        for (std::size_t q = 0; q < gl_x.size(); ++q) {
          const double t = lo + (hi - lo) * gl_x[q];
          for (std::size_t p = 0; p < r0.size(); ++p) rho[p] = r0[p] + t * (r1[p] - r0[p]);
          v += (hi - lo) * gl_w[q] * rate(rho, drho);
        }
        return v;
      };
      std::function<double(double, double, double, int)> adapt = [&](double lo, double hi, double whole, int depth) {
        const double mid = 0.5 * (lo + hi);
        const double left = panel(lo, mid), right = panel(mid, hi);
        const double err = std::abs(left + right - whole);
        if (depth >= 20 || err <= setup.quadrature_tolerance * std::max(1.0, std::abs(left + right)))
          return left + right;
        return adapt(lo, mid, left, depth + 1) + adapt(mid, hi, right, depth + 1);
      };
      total += adapt(0.0, 1.0, panel(0.0, 1.0), 0) * dt;
    }
    return total;
  };

  ReversibilityResult out;
  out.crossterm_path1 = cross(path1);
  out.crossterm_path2 = cross(path2);
  out.kt = a[0] > 0.0 ? s2[0] / a[0] : 0.0;
  out.proportional = a[0] > 0.0;
  for (std::size_t i = 0; i < channels; ++i)
    out.proportional = out.proportional && std::abs(s2[i] - out.kt * a[i]) <= 1e-12 * s2[i];
  return out;
}

}  // namespace gradflow
