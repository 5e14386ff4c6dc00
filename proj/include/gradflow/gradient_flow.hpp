#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gradflow/errors.hpp"
#include "gradflow/measures.hpp"
#include "gradflow/numerics.hpp"
#include "gradflow/transport.hpp"

namespace gradflow {

using State = std::vector<double>;

// ---------------------------------------------------------------------------
// Dissipation potentials

enum class DissipationKind { scalar, l2, wasserstein, hminus1 };

inline const char* to_string(DissipationKind kind) {
  switch (kind) {
    case DissipationKind::scalar: return "scalar";
    case DissipationKind::l2: return "l2";
    case DissipationKind::wasserstein: return "wasserstein";
    case DissipationKind::hminus1: return "hminus1";
  }
  return "?";
}

/// Quadratic dissipation Ψ(z,s) = ½⟨s, G(z)s⟩ with dual Ψ*(z,ξ) = ½⟨ξ, K(z)ξ⟩.
///
/// The coefficient η is a friction: G scales with η and K with 1/η.
///   scalar       Ψ = η|s|²/2 on R^m
///   l2           Ψ = (η/2) h Σ s²            on a grid
///   wasserstein  Ψ = (η/2) ‖s‖²_{−1,ρ},  Kξ = −(1/η)(ρ̄ ξ′)′
///   hminus1      Ψ = (η/2) ‖s‖²_{−1,1},  Kξ = −(1/η) ξ″
class QuadraticDissipation {
 public:
  static QuadraticDissipation scalar(double eta) { return {DissipationKind::scalar, eta, std::nullopt}; }
  static QuadraticDissipation l2(const UniformGrid& grid, double eta = 1.0) { return {DissipationKind::l2, eta, grid}; }
  static QuadraticDissipation wasserstein(const UniformGrid& grid, double eta = 1.0) {
    return {DissipationKind::wasserstein, eta, grid};
  }
  static QuadraticDissipation hminus1(const UniformGrid& grid, double eta = 1.0) {
    return {DissipationKind::hminus1, eta, grid};
  }

  DissipationKind kind() const { return kind_; }
  double coefficient() const { return eta_; }
  const std::optional<UniformGrid>& grid() const { return grid_; }

  /// Duality pairing ⟨ξ, s⟩: Euclidean for scalar, h-weighted on grids.
  double pairing(std::span<const double> xi, std::span<const double> s) const {
    detail::require(xi.size() == s.size(), "pairing: size mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) sum += xi[i] * s[i];
    return grid_ ? grid_->h() * sum : sum;
  }

  double psi(std::span<const double> z, std::span<const double> s) const {
    check_state(z);
    switch (kind_) {
      case DissipationKind::scalar:
      case DissipationKind::l2: return 0.5 * eta_ * pairing(s, s);
      case DissipationKind::wasserstein: return 0.5 * eta_ * local_w_norm(density(z), s).norm_sq;
      case DissipationKind::hminus1: return 0.5 * eta_ * weighted_primal_norm(unit_weights(), s, grid_->h()).norm_sq;
    }
    return 0.0;
  }

  double psi_star(std::span<const double> z, std::span<const double> xi) const {
    check_state(z);
    switch (kind_) {
      case DissipationKind::scalar:
      case DissipationKind::l2: return 0.5 * pairing(xi, xi) / eta_;
      case DissipationKind::wasserstein: return 0.5 * dual_w_norm(density(z), xi) / eta_;
      case DissipationKind::hminus1: return 0.5 * weighted_dirichlet(unit_weights(), xi, grid_->h()) / eta_;
    }
    return 0.0;
  }

  /// K(z)ξ, the rate generated by the force ξ.
  State apply_k(std::span<const double> z, std::span<const double> xi) const {
    check_state(z);
    detail::require(xi.size() == z.size(), "apply_k: size mismatch");
    State out(xi.size());
    switch (kind_) {
      case DissipationKind::scalar:
      case DissipationKind::l2:
        for (std::size_t i = 0; i < xi.size(); ++i) out[i] = xi[i] / eta_;
        return out;
      case DissipationKind::wasserstein: {
        const GridDensity1D rho = density(z);
        detail::require<SingularWeightError>(rho.strictly_positive(), "wasserstein dissipation: vacuum cell");
        out = weighted_divergence_form(interface_densities(rho), xi, grid_->h());
        break;
      }
      case DissipationKind::hminus1:
        out = weighted_divergence_form(unit_weights(), xi, grid_->h());
        break;
    }
    for (double& v : out) v /= eta_;
    return out;
  }

  /// −(w ξ′)′ with no-flux ends, for interface weights w.
  static State weighted_divergence_form(std::span<const double> w, std::span<const double> xi, double h) {
    const std::size_t n = xi.size();
    State out(n, 0.0);
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const double flux = w[k] * (xi[k + 1] - xi[k]) / h;  // w ξ′ at interface k
      out[k] -= flux / h;
      out[k + 1] += flux / h;
    }
    return out;
  }

 private:
  QuadraticDissipation(DissipationKind kind, double eta, std::optional<UniformGrid> grid)
      : kind_(kind), eta_(eta), grid_(grid) {
    detail::require(eta > 0.0 && std::isfinite(eta), "QuadraticDissipation: coefficient must be > 0");
  }

  void check_state(std::span<const double> z) const {
    if (grid_) detail::require(z.size() == grid_->cells, "dissipation: state size must equal cell count");
  }

  GridDensity1D density(std::span<const double> z) const { return GridDensity1D(*grid_, State(z.begin(), z.end())); }

  std::vector<double> unit_weights() const { return std::vector<double>(grid_->cells - 1, 1.0); }

  DissipationKind kind_;
  double eta_;
  std::optional<UniformGrid> grid_;
};

// ---------------------------------------------------------------------------
// Energies

/// Scalar function of one variable with first and second derivatives.
struct SmoothFunction {
  std::function<double(double)> f;
  std::function<double(double)> df;
  std::function<double(double)> d2f;

  explicit operator bool() const { return static_cast<bool>(f); }

  static SmoothFunction zero() {
    return {[](double) { return 0.0; }, [](double) { return 0.0; }, [](double) { return 0.0; }};
  }
  /// slope·x
  static SmoothFunction linear(double slope) {
    return {[slope](double x) { return slope * x; }, [slope](double) { return slope; }, [](double) { return 0.0; }};
  }
  /// k(x − center)²/2
  static SmoothFunction quadratic(double k, double center = 0.0) {
    return {[=](double x) { return 0.5 * k * (x - center) * (x - center); },
            [=](double x) { return k * (x - center); }, [=](double) { return k; }};
  }
};

/// F(z) on R^m from user-supplied value and gradient.
struct FiniteDimEnergy {
  std::function<double(std::span<const double>)> value;
  std::function<State(std::span<const double>)> gradient;

  /// F(x) = Σ k x_i²/2.
  static FiniteDimEnergy spring(double k) {
    return {[k](std::span<const double> x) {
              double s = 0.0;
              for (double v : x) s += 0.5 * k * v * v;
              return s;
            },
            [k](std::span<const double> x) {
              State g(x.begin(), x.end());
              for (double& v : g) v *= k;
              return g;
            }};
  }
};

/// F(ρ) = θ∫ρ log(ρ/c₀) + ∫ρV + ½∫ρ(ρ∗W) + ∫U(ρ) on a uniform grid.
struct GridFreeEnergy {
  UniformGrid grid;
  double entropy_coefficient = 1.0;  // θ = RT or kT
  double reference = 1.0;            // c₀
  SmoothFunction potential;          // V(x); empty for none
  std::function<double(double)> interaction;  // even W(x − y); empty for none
  SmoothFunction internal;           // U(ρ); empty for none

  static GridFreeEnergy entropy(const UniformGrid& grid, double theta = 1.0) {
    GridFreeEnergy e;
    e.grid = grid;
    e.entropy_coefficient = theta;
    return e;
  }

  static GridFreeEnergy boltzmann(const UniformGrid& grid, double theta, SmoothFunction potential, double c0 = 1.0) {
    GridFreeEnergy e = entropy(grid, theta);
    e.potential = std::move(potential);
    e.reference = c0;
    return e;
  }

  std::vector<double> potential_values() const {
    std::vector<double> v(grid.cells, 0.0);
    if (potential)
      for (std::size_t i = 0; i < grid.cells; ++i) v[i] = potential.f(grid.center(i));
    return v;
  }

  /// (ρ∗W)_i = h Σ_j W(x_i − x_j) ρ_j, a direct O(n²) sum.
  std::vector<double> convolution(std::span<const double> rho) const {
    std::vector<double> out(grid.cells, 0.0);
    if (!interaction) return out;
    const double h = grid.h();
    for (std::size_t i = 0; i < grid.cells; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < grid.cells; ++j) acc += interaction(grid.center(i) - grid.center(j)) * rho[j];
      out[i] = h * acc;
    }
    return out;
  }
};

/// E(u) = h Σ ½|∇u|² + h Σ W(u) with W(s) = depth·(1 − s²)².
struct DirichletDoubleWell {
  UniformGrid grid;
  double depth = 0.25;

  double well(double s) const { return depth * (1.0 - s * s) * (1.0 - s * s); }
  double well_prime(double s) const { return -4.0 * depth * s * (1.0 - s * s); }
};

/// Neumann Laplacian (u_{i+1} − 2u_i + u_{i−1})/h², mirrored at the ends.
inline State neumann_laplacian(std::span<const double> u, double h) {
  const std::size_t n = u.size();
  State out(n, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double flux = (u[k + 1] - u[k]) / (h * h);
    out[k] += flux;
    out[k + 1] -= flux;
  }
  return out;
}

using EnergyDescriptor = std::variant<FiniteDimEnergy, GridFreeEnergy, DirichletDoubleWell>;

/// Driving functional with value and variational derivative.
///
/// The derivative is the Riesz representative for the problem's pairing:
/// the Euclidean gradient on R^m, the variational derivative DF on grids
/// (so that ⟨DF, f⟩ = h Σ DF_i f_i is the directional derivative).
class EnergyFunctional {
 public:
  EnergyFunctional(EnergyDescriptor d) : descriptor_(std::move(d)) {  // NOLINT(google-explicit-constructor)
    if (const auto* f = std::get_if<FiniteDimEnergy>(&descriptor_))
      detail::require(f->value && f->gradient, "FiniteDimEnergy: value and gradient are required");
    if (const auto* g = std::get_if<GridFreeEnergy>(&descriptor_)) {
      detail::require(g->entropy_coefficient >= 0.0, "GridFreeEnergy: entropy coefficient must be ≥ 0");
      detail::require(g->reference > 0.0, "GridFreeEnergy: reference concentration must be > 0");
    }
  }

  const EnergyDescriptor& descriptor() const { return descriptor_; }

  std::optional<UniformGrid> grid() const {
    if (const auto* g = std::get_if<GridFreeEnergy>(&descriptor_)) return g->grid;
    if (const auto* d = std::get_if<DirichletDoubleWell>(&descriptor_)) return d->grid;
    return std::nullopt;
  }

  double value(std::span<const double> z) const {
    return std::visit([&](const auto& d) { return value_of(d, z); }, descriptor_);
  }

  State derivative(std::span<const double> z) const {
    return std::visit([&](const auto& d) { return derivative_of(d, z); }, descriptor_);
  }

 private:
  static double value_of(const FiniteDimEnergy& e, std::span<const double> z) { return e.value(z); }
  static State derivative_of(const FiniteDimEnergy& e, std::span<const double> z) { return e.gradient(z); }

  static double value_of(const GridFreeEnergy& e, std::span<const double> z) {
    detail::require(z.size() == e.grid.cells, "GridFreeEnergy: state size must equal cell count");
    const double h = e.grid.h();
    const auto v = e.potential_values();
    const auto conv = e.convolution(z);
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      detail::require(z[i] >= 0.0, "GridFreeEnergy: negative density");
      if (e.entropy_coefficient > 0.0 && z[i] > 0.0) sum += e.entropy_coefficient * z[i] * std::log(z[i] / e.reference);
      sum += z[i] * v[i] + 0.5 * z[i] * conv[i];
      if (e.internal) sum += e.internal.f(z[i]);
    }
    return h * sum;
  }

  static State derivative_of(const GridFreeEnergy& e, std::span<const double> z) {
    detail::require(z.size() == e.grid.cells, "GridFreeEnergy: state size must equal cell count");
    const auto v = e.potential_values();
    const auto conv = e.convolution(z);
    State d(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
      double di = v[i] + conv[i];
      if (e.entropy_coefficient > 0.0) {
        detail::require<SingularWeightError>(z[i] > 0.0, "GridFreeEnergy: entropy derivative undefined at vacuum");
        di += e.entropy_coefficient * (std::log(z[i] / e.reference) + 1.0);
      }
      if (e.internal) di += e.internal.df(z[i]);
      d[i] = di;
    }
    return d;
  }

  static double value_of(const DirichletDoubleWell& e, std::span<const double> u) {
    detail::require(u.size() == e.grid.cells, "DirichletDoubleWell: state size must equal cell count");
    const double h = e.grid.h();
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < u.size(); ++k) {
      const double g = (u[k + 1] - u[k]) / h;
      sum += 0.5 * g * g;
    }
    for (double s : u) sum += e.well(s);
    return h * sum;
  }

  static State derivative_of(const DirichletDoubleWell& e, std::span<const double> u) {
    detail::require(u.size() == e.grid.cells, "DirichletDoubleWell: state size must equal cell count");
    State d = neumann_laplacian(u, e.grid.h());
    for (std::size_t i = 0; i < u.size(); ++i) d[i] = -d[i] + e.well_prime(u[i]);
    return d;
  }

  EnergyDescriptor descriptor_;
};

// ---------------------------------------------------------------------------
// Flow problems

/// The triple (state kind, F, Ψ) defining one gradient flow.
class FlowProblem {
 public:
  FlowProblem(EnergyFunctional energy, QuadraticDissipation dissipation)
      : energy_(std::move(energy)), dissipation_(std::move(dissipation)) {
    const auto eg = energy_.grid();
    const auto& dg = dissipation_.grid();
    if (dissipation_.kind() == DissipationKind::scalar) {
      detail::require(!eg, "FlowProblem: scalar dissipation needs a finite-dimensional energy");
    } else {
      detail::require(eg && dg && *eg == *dg, "FlowProblem: grid dissipation needs a grid energy on the same grid");
    }
  }

  const EnergyFunctional& energy() const { return energy_; }
  const QuadraticDissipation& dissipation() const { return dissipation_; }

  /// s* = argmin_s Ψ(z,s) + ⟨F′(z), s⟩ = −K(z)F′(z).
  State optimal_rate(std::span<const double> z) const {
    State force = energy_.derivative(z);
    for (double& f : force) f = -f;
    return dissipation_.apply_k(z, force);
  }

 private:
  EnergyFunctional energy_;
  QuadraticDissipation dissipation_;
};

/// Sampled convex function of one variable on a uniform symmetric grid.
struct SampledFunction {
  std::vector<double> points;
  std::vector<double> values;

  template <typename F>
  static SampledFunction sample(double half_width, std::size_t count, F&& f) {
    detail::require(count >= 3 && half_width > 0.0, "SampledFunction: need ≥ 3 samples and positive width");
    SampledFunction s;
    for (std::size_t i = 0; i < count; ++i) {
      const double x = -half_width + 2.0 * half_width * static_cast<double>(i) / static_cast<double>(count - 1);
      s.points.push_back(x);
      s.values.push_back(f(x));
    }
    return s;
  }
};

/// Discrete Legendre transform max_i (ξ s_i − Ψ(s_i)) of convex samples.
inline double legendre_dual(const SampledFunction& psi, double xi) {
  const auto& s = psi.points;
  const auto& v = psi.values;
  detail::require(s.size() == v.size() && s.size() >= 3, "legendre_dual: need ≥ 3 matching samples");
  const double ds = s[1] - s[0];
  detail::require(ds > 0.0, "legendre_dual: sample points must increase");
  for (std::size_t i = 1; i < s.size(); ++i)
    detail::require(std::abs((s[i] - s[i - 1]) - ds) <= 1e-9 * ds, "legendre_dual: samples must be uniformly spaced");
  detail::require(std::abs(s.front() + s.back()) <= 1e-9 * ds * static_cast<double>(s.size()),
                  "legendre_dual: sample grid must be symmetric about 0");
  for (std::size_t i = 1; i + 1 < s.size(); ++i)
    detail::require(v[i - 1] - 2.0 * v[i] + v[i + 1] >= -1e-10, "legendre_dual: samples are not convex");
  double best = -kInfinity;
  for (std::size_t i = 0; i < s.size(); ++i) best = std::max(best, xi * s[i] - v[i]);
  return best;
}

/// Samples of Ψ* on the given dual grid.
inline SampledFunction legendre_transform(const SampledFunction& psi, double half_width, std::size_t count) {
  return SampledFunction::sample(half_width, count, [&](double xi) { return legendre_dual(psi, xi); });
}

/// z + dt·s* with s* the minimizer of Ψ(z,·) + ⟨F′(z), ·⟩.
inline State local_step(const FlowProblem& problem, std::span<const double> z, double dt) {
  detail::require(dt > 0.0, "local_step: dt must be positive");
  const State s = problem.optimal_rate(z);
  State next(z.begin(), z.end());
  for (std::size_t i = 0; i < next.size(); ++i) next[i] += dt * s[i];
  return next;
}

/// One row of an energy-dissipation trajectory dump.
struct EdiRecord {
  std::size_t step = 0;
  double time = 0.0;
  double energy = 0.0;
  double dissipation_primal = 0.0;  // Ψ(z_k, Δz_k/dt)
  double dissipation_dual = 0.0;    // Ψ*(z_k, −F′(z_k))
  double edi_partial = 0.0;         // F(z_k) − F(z_0) + Σ_{j<k}[Ψ + Ψ*]dt
};

/// Per-step EDI bookkeeping; the last row carries the full residual.
inline std::vector<EdiRecord> edi_records(const FlowProblem& problem, const std::vector<State>& trajectory, double dt) {
  detail::require(dt > 0.0, "edi_residual: dt must be positive");
  detail::require(!trajectory.empty(), "edi_residual: empty trajectory");
  const auto& F = problem.energy();
  const auto& D = problem.dissipation();
  std::vector<EdiRecord> rows;
  const double f0 = F.value(trajectory.front());
  double accumulated = 0.0;
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    EdiRecord r;
    r.step = k;
    r.time = static_cast<double>(k) * dt;
    r.energy = F.value(trajectory[k]);
    r.edi_partial = r.energy - f0 + accumulated;
    if (k + 1 < trajectory.size()) {
      const auto& z = trajectory[k];
      State rate(z.size());
      for (std::size_t i = 0; i < z.size(); ++i) rate[i] = (trajectory[k + 1][i] - z[i]) / dt;
      State force = F.derivative(z);
      for (double& f : force) f = -f;
      r.dissipation_primal = D.psi(z, rate);
      r.dissipation_dual = D.psi_star(z, force);
      accumulated += (r.dissipation_primal + r.dissipation_dual) * dt;
    }
    rows.push_back(r);
  }
  return rows;
}

/// F(z_T) − F(z_0) + Σ_k [Ψ(z_k, Δz_k/dt) + Ψ*(z_k, −F′(z_k))] dt.
inline double edi_residual(const FlowProblem& problem, const std::vector<State>& trajectory, double dt) {
  return edi_records(problem, trajectory, dt).back().edi_partial;
}

/// Conservative div(ρ̄ ∇DF(ρ)) with no-flux ends.
inline State wasserstein_gradient(const GridDensity1D& rho, const EnergyFunctional& energy) {
  detail::require<SingularWeightError>(rho.strictly_positive(), "wasserstein_gradient: density has a vacuum cell");
  detail::require(energy.grid() && *energy.grid() == rho.grid(), "wasserstein_gradient: energy lives on another grid");
  const State df = energy.derivative(rho.values());
  State out = QuadraticDissipation::weighted_divergence_form(interface_densities(rho), df, rho.h());
  for (double& v : out) v = -v;
  return out;
}

}  // namespace gradflow
