#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "gradflow/errors.hpp"
#include "gradflow/gradient_flow.hpp"
#include "gradflow/measures.hpp"
#include "gradflow/numerics.hpp"

namespace gradflow {

namespace detail {

inline std::size_t step_count(double t_end, double dt) {
  require(dt > 0.0 && std::isfinite(dt), "time step must be positive");
  require(t_end >= 0.0 && std::isfinite(t_end), "final time must be ≥ 0");
  return static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
}

inline bool energy_not_increased(double before, double after) {
  return after <= before + 1e-12 * (std::abs(before) + 1.0);
}

/// Negative values down to −1e−14 are roundoff and are clipped; anything
/// below signals a step-size problem.
inline void enforce_positivity(std::vector<double>& c, std::size_t step, const char* who) {
  for (double& v : c) {
    if (!std::isfinite(v)) throw BlowUpError(std::string(who) + ": non-finite concentration", step);
    if (v < -1e-14)
      throw ConsistencyError(std::string(who) + ": concentration fell below -1e-14 at step " + std::to_string(step));
    if (v < 0.0) v = 0.0;
  }
}

/// −(J_k − J_{k−1})/h for interface fluxes J (zero at both ends).
inline std::vector<double> flux_divergence_rate(std::span<const double> flux, double h) {
  const std::size_t n = flux.size() + 1;
  std::vector<double> rate(n, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    rate[k] -= flux[k] / h;
    rate[k + 1] += flux[k] / h;
  }
  return rate;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Spring-dashpot system

struct SpringDashpotTrajectory {
  std::vector<double> times;
  std::vector<double> positions;   // closed form x₀ e^{−kt/η}
  std::vector<double> integrated;  // local_step (explicit Euler) integration
  std::vector<double> energies;    // k x²/2 along the closed form
};

inline SpringDashpotTrajectory spring_dashpot_solve(double k, double eta, double x0, double t_end, double dt) {
  detail::require(k > 0.0 && eta > 0.0, "spring_dashpot_solve: k and eta must be positive");
  detail::require(t_end > 0.0, "spring_dashpot_solve: final time must be positive");
  const std::size_t steps = detail::step_count(t_end, dt);
  const FlowProblem problem(EnergyFunctional(FiniteDimEnergy::spring(k)), QuadraticDissipation::scalar(eta));
  SpringDashpotTrajectory out;
  State z{x0};
  for (std::size_t i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) * dt;
    const double x = x0 * std::exp(-k * t / eta);
    out.times.push_back(t);
    out.positions.push_back(x);
    out.integrated.push_back(z[0]);
    out.energies.push_back(0.5 * k * x * x);
    if (i < steps) z = local_step(problem, z, dt);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Solute diffusion / Fokker–Planck

/// Interface flux J = c w and velocity w of the diffusion-drift law.
struct VelocityField {
  std::vector<double> flux;      // c w at the n−1 interior interfaces
  std::vector<double> velocity;  // w at the n−1 interior interfaces
};

/// c w = −(RT/η)∇c − (c/η)∇V at interior interfaces; w·n = 0 at the ends is implicit.
inline VelocityField derive_velocity(const GridDensity1D& c, const PhysicalConstants& constants,
                                     std::span<const double> V) {
  detail::require<SingularWeightError>(c.strictly_positive(), "derive_velocity: concentration has a vacuum cell");
  detail::require(V.size() == c.cells(), "derive_velocity: potential size must equal cell count");
  const double rt = constants.rt(), eta = constants.eta, h = c.h();
  VelocityField out;
  for (std::size_t k = 0; k + 1 < c.cells(); ++k) {
    const double cbar = log_mean(c[k], c[k + 1]);
    const double j = -(rt / eta) * (c[k + 1] - c[k]) / h - (cbar / eta) * (V[k + 1] - V[k]) / h;
    out.flux.push_back(j);
    out.velocity.push_back(j / cbar);
  }
  return out;
}

/// F(c) = RT h Σ c log(c/c₀) + h Σ c V.
inline double fokker_planck_energy(const GridDensity1D& c, const PhysicalConstants& constants,
                                   std::span<const double> V) {
  double sum = 0.0;
  for (std::size_t i = 0; i < c.cells(); ++i) {
    if (c[i] > 0.0) sum += constants.rt() * c[i] * std::log(c[i] / constants.c0);
    sum += c[i] * V[i];
  }
  return c.h() * sum;
}

struct ModelTrajectory {
  std::vector<GridDensity1D> states;  // every `stride`-th state, plus the last
  std::vector<double> times;          // times of the stored states
  std::vector<double> energies;       // energy after every step (index 0 = initial)
  std::vector<double> masses;         // mass after every step
  double dt = 0.0;                    // step actually used (T/steps ≤ requested dt)
  bool energy_nonincreasing = true;
  double max_energy_increase = 0.0;
};

struct SolveOptions {
  std::size_t stride = 1;  // store every stride-th state
};

/// Conservative explicit scheme for ċ = div((RT/η)∇c + (c/η)∇V), no-flux ends.
inline ModelTrajectory fokker_planck_solve(const GridDensity1D& c0, const PhysicalConstants& constants,
                                           std::span<const double> V, double t_end, double dt,
                                           const SolveOptions& options = {}) {
  constants.validate();
  detail::require(V.size() == c0.cells(), "fokker_planck_solve: potential size must equal cell count");
  detail::require(options.stride >= 1, "fokker_planck_solve: stride must be ≥ 1");
  const double h = c0.h(), rt = constants.rt(), eta = constants.eta;
  const std::size_t steps = detail::step_count(t_end, dt);
  detail::require(dt <= h * h * eta / (2.0 * rt) * (1.0 + 1e-12),
                  "fokker_planck_solve: CFL violated, need dt ≤ h²η/(2RT) = " + std::to_string(h * h * eta / (2.0 * rt)));
  const double step = steps ? t_end / static_cast<double>(steps) : dt;

  ModelTrajectory out;
  out.dt = step;
  std::vector<double> c = c0.values();
  std::vector<double> flux(c.size() - 1);
  auto record = [&](std::size_t i, const GridDensity1D& state) {
    const double e = fokker_planck_energy(state, constants, V);
    if (!out.energies.empty() && !detail::energy_not_increased(out.energies.back(), e)) {
      out.energy_nonincreasing = false;
      out.max_energy_increase = std::max(out.max_energy_increase, e - out.energies.back());
    }
    out.energies.push_back(e);
    out.masses.push_back(state.mass());
    if (i % options.stride == 0 || i == steps) {
      out.states.push_back(state);
      out.times.push_back(static_cast<double>(i) * step);
    }
  };
  record(0, c0);
  for (std::size_t i = 1; i <= steps; ++i) {
    for (std::size_t k = 0; k + 1 < c.size(); ++k) {
      const double cbar = log_mean(c[k], c[k + 1]);
      flux[k] = -(rt / eta) * (c[k + 1] - c[k]) / h - (cbar / eta) * (V[k + 1] - V[k]) / h;
    }
    const auto rate = detail::flux_divergence_rate(flux, h);
    for (std::size_t k = 0; k < c.size(); ++k) c[k] += step * rate[k];
    detail::enforce_positivity(c, i, "fokker_planck_solve");
    record(i, GridDensity1D(c0.grid(), c));
  }
  return out;
}

/// The same dynamics as a FlowProblem: F = RT·Ent(c/c₀) + ∫cV with Wasserstein dissipation of friction η.
inline FlowProblem fokker_planck_problem(const UniformGrid& grid, const PhysicalConstants& constants,
                                         SmoothFunction potential) {
  return FlowProblem(EnergyFunctional(GridFreeEnergy::boltzmann(grid, constants.rt(), std::move(potential), constants.c0)),
                     QuadraticDissipation::wasserstein(grid, constants.eta));
}

// ---------------------------------------------------------------------------
// Multi-component diffusion with a volume constraint

enum class Balance { global, local };

inline const char* to_string(Balance b) { return b == Balance::global ? "global" : "local"; }

struct MultiSpeciesState {
  UniformGrid grid;
  std::vector<std::vector<double>> concentrations;  // c_i per cell
  std::vector<double> molar_volumes;                // α_i
  std::vector<double> frictions;                    // η_i

  std::size_t species() const { return concentrations.size(); }

  /// max_x |Σ α_i c_i(x) − 1|
  double constraint_violation() const {
    double worst = 0.0;
    for (std::size_t x = 0; x < grid.cells; ++x) worst = std::max(worst, std::abs(volume_fraction(x) - 1.0));
    return worst;
  }

  double volume_fraction(std::size_t x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < species(); ++i) s += molar_volumes[i] * concentrations[i][x];
    return s;
  }

  double mass(std::size_t i) const {
    double s = 0.0;
    for (double v : concentrations[i]) s += v;
    return grid.h() * s;
  }

  void validate(double tolerance = 1e-8) const {
    detail::require(species() >= 1, "MultiSpeciesState: need at least one species");
    detail::require(molar_volumes.size() == species() && frictions.size() == species(),
                    "MultiSpeciesState: one molar volume and friction per species");
    for (std::size_t i = 0; i < species(); ++i) {
      detail::require(concentrations[i].size() == grid.cells, "MultiSpeciesState: field size must equal cell count");
      detail::require(molar_volumes[i] > 0.0 && frictions[i] > 0.0,
                      "MultiSpeciesState: molar volumes and frictions must be positive");
      for (double v : concentrations[i])
        detail::require(v >= 0.0 && std::isfinite(v), "MultiSpeciesState: concentrations must be finite and ≥ 0");
    }
    detail::require(constraint_violation() <= tolerance, "MultiSpeciesState: volume constraint Σα_i c_i = 1 violated");
  }
};

/// Interface fluxes j_i = (1/η_i)(−RT∇c_i + α_i c̄_i ∇p) for the chosen balance.
///
/// Global balance: p solves div(Σ α_i²c̄_i/η_i ∇p) = RT div(Σ (α_i/η_i)∇c_i)
/// with no-flux data. Local balance: the multiplier λ is fixed pointwise so
/// that Σ α_i j_i = 0 at every interface. In 1D with no-flux ends both give
/// the same fluxes; they are computed independently.
inline std::vector<std::vector<double>> multicomponent_fluxes(const MultiSpeciesState& state,
                                                              const PhysicalConstants& constants, Balance balance) {
  const std::size_t m = state.species(), n = state.grid.cells;
  const double h = state.grid.h(), rt = constants.rt();
  std::vector<std::vector<double>> cbar(m, std::vector<double>(n - 1));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k + 1 < n; ++k) cbar[i][k] = log_mean(state.concentrations[i][k], state.concentrations[i][k + 1]);

  std::vector<double> weight(n - 1, 0.0), drive(n - 1, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    for (std::size_t i = 0; i < m; ++i) {
      const double a = state.molar_volumes[i], e = state.frictions[i];
      weight[k] += a * a * cbar[i][k] / e;
      drive[k] += rt * (a / e) * (state.concentrations[i][k + 1] - state.concentrations[i][k]) / h;
    }
  }

  std::vector<double> grad_p(n - 1, 0.0);
  if (balance == Balance::global) {
    for (double w : weight)
      detail::require<SingularWeightError>(w > 0.0, "multicomponent_global_step: pressure equation is singular (vacuum)");
    // −(w p′)′ = −(drive)′ ; the right side telescopes to zero total mass.
    std::vector<double> rhs(n, 0.0);
    for (std::size_t k = 0; k + 1 < n; ++k) {
      rhs[k] -= drive[k] / h;
      rhs[k + 1] += drive[k] / h;
    }
    const auto p = solve_weighted_neumann(weight, rhs, h);
    for (std::size_t k = 0; k + 1 < n; ++k) grad_p[k] = (p[k + 1] - p[k]) / h;
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (double v : state.concentrations[i])
        detail::require<SingularWeightError>(v > 0.0, "multicomponent_local_step: vacuum species, multiplier undefined");
    for (std::size_t k = 0; k + 1 < n; ++k) grad_p[k] = drive[k] / weight[k];
  }

  std::vector<std::vector<double>> j(m, std::vector<double>(n - 1));
  for (std::size_t i = 0; i < m; ++i) {
    const double a = state.molar_volumes[i], e = state.frictions[i];
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const double grad_c = (state.concentrations[i][k + 1] - state.concentrations[i][k]) / h;
      j[i][k] = (-rt * grad_c + a * cbar[i][k] * grad_p[k]) / e;
    }
  }
  return j;
}

struct MultiSpeciesStepResult {
  MultiSpeciesState state;
  double drift_before_projection = 0.0;  // max |Σα_i c_i − 1| before renormalization
};

inline MultiSpeciesStepResult multicomponent_step_detailed(const MultiSpeciesState& state,
                                                           const PhysicalConstants& constants, double dt,
                                                           Balance balance) {
  state.validate();
  detail::require(dt > 0.0, "multicomponent step: dt must be positive");
  double min_eta = state.frictions.front();
  for (double e : state.frictions) min_eta = std::min(min_eta, e);
  const double h = state.grid.h();
  detail::require(dt <= h * h * min_eta / (2.0 * constants.rt()) * (1.0 + 1e-12),
                  "multicomponent step: CFL violated, need dt ≤ h² min η_i/(2RT)");

  const auto j = multicomponent_fluxes(state, constants, balance);
  MultiSpeciesStepResult out{state, 0.0};
  for (std::size_t i = 0; i < state.species(); ++i) {
    const auto rate = detail::flux_divergence_rate(j[i], h);
    auto& c = out.state.concentrations[i];
    for (std::size_t x = 0; x < c.size(); ++x) c[x] += dt * rate[x];
    detail::enforce_positivity(c, 1, balance == Balance::global ? "multicomponent_global_step" : "multicomponent_local_step");
  }
  out.drift_before_projection = out.state.constraint_violation();
  if (out.drift_before_projection > 1e-6)
    throw ConsistencyError("multicomponent step: volume constraint drift " + std::to_string(out.drift_before_projection) +
                           " exceeds 1e-6");
  for (std::size_t x = 0; x < state.grid.cells; ++x) {
    const double total = out.state.volume_fraction(x);
    for (auto& c : out.state.concentrations) c[x] /= total;
  }
  return out;
}

inline MultiSpeciesState multicomponent_global_step(const MultiSpeciesState& state, const PhysicalConstants& constants,
                                                    double dt) {
  return multicomponent_step_detailed(state, constants, dt, Balance::global).state;
}

inline MultiSpeciesState multicomponent_local_step(const MultiSpeciesState& state, const PhysicalConstants& constants,
                                                   double dt) {
  return multicomponent_step_detailed(state, constants, dt, Balance::local).state;
}

/// E(c₁..c_m) + RT Σ_i h Σ c_i log(c_i/c₀).
inline double free_energy_multispecies(const std::vector<GridDensity1D>& concentrations,
                                       const PhysicalConstants& constants,
                                       const std::function<double(const std::vector<GridDensity1D>&)>& E = {}) {
  double sum = E ? E(concentrations) : 0.0;
  for (const auto& c : concentrations) {
    double s = 0.0;
    for (double v : c.values())
      if (v > 0.0) s += v * std::log(v / constants.c0);
    sum += constants.rt() * c.h() * s;
  }
  return sum;
}

inline double free_energy_multispecies(const MultiSpeciesState& state, const PhysicalConstants& constants) {
  std::vector<GridDensity1D> fields;
  for (const auto& c : state.concentrations) fields.emplace_back(state.grid, c);
  return free_energy_multispecies(fields, constants);
}

struct MultiSpeciesTrajectory {
  std::vector<MultiSpeciesState> states;  // every stride-th state, plus the last
  std::vector<double> times;
  std::vector<double> energies;           // after every step
  std::vector<double> max_drift;          // pre-projection drift of every step
  double max_constraint_violation = 0.0;  // over all steps, before projection
  bool energy_nonincreasing = true;
};

inline MultiSpeciesTrajectory multicomponent_solve(const MultiSpeciesState& initial, const PhysicalConstants& constants,
                                                   Balance balance, std::size_t steps, double dt,
                                                   const SolveOptions& options = {}) {
  MultiSpeciesTrajectory out;
  MultiSpeciesState s = initial;
  out.states.push_back(s);
  out.times.push_back(0.0);
  out.energies.push_back(free_energy_multispecies(s, constants));
  out.max_constraint_violation = s.constraint_violation();
  for (std::size_t i = 1; i <= steps; ++i) {
    auto r = multicomponent_step_detailed(s, constants, dt, balance);
    s = std::move(r.state);
    out.max_drift.push_back(r.drift_before_projection);
    out.max_constraint_violation = std::max(out.max_constraint_violation, r.drift_before_projection);
    const double e = free_energy_multispecies(s, constants);
    if (!detail::energy_not_increased(out.energies.back(), e)) out.energy_nonincreasing = false;
    out.energies.push_back(e);
    if (i % options.stride == 0 || i == steps) {
      out.states.push_back(s);
      out.times.push_back(static_cast<double>(i) * dt);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Phase field

struct PhaseFieldState {
  UniformGrid grid;
  std::vector<double> u;
  double depth = 0.25;  // W(s) = depth·(1 − s²)²

  DirichletDoubleWell energy_descriptor() const { return {grid, depth}; }
  double energy() const { return EnergyFunctional(energy_descriptor()).value(u); }

  double mean() const {
    double s = 0.0;
    for (double v : u) s += v;
    return s / static_cast<double>(u.size());
  }
};

struct PhaseFieldTrajectory {
  std::vector<PhaseFieldState> states;  // every stride-th state, plus the last
  std::vector<double> times;
  std::vector<double> energies;  // after every step
  std::vector<double> means;     // after every step
  double dt = 0.0;
  bool energy_nonincreasing = true;
  double max_energy_increase = 0.0;
};

namespace detail {

template <typename Rate>
PhaseFieldTrajectory phase_field_integrate(const PhaseFieldState& initial, double t_end, double dt,
                                           const SolveOptions& options, const char* who, Rate&& rate) {
  require(initial.u.size() == initial.grid.cells, std::string(who) + ": field size must equal cell count");
  for (double v : initial.u) require(std::isfinite(v), std::string(who) + ": non-finite initial field");
  require(options.stride >= 1, std::string(who) + ": stride must be ≥ 1");
  const std::size_t steps = step_count(t_end, dt);
  const double step = steps ? t_end / static_cast<double>(steps) : dt;
  PhaseFieldTrajectory out;
  out.dt = step;
  PhaseFieldState s = initial;
  out.states.push_back(s);
  out.times.push_back(0.0);
  out.energies.push_back(s.energy());
  out.means.push_back(s.mean());
  for (std::size_t i = 1; i <= steps; ++i) {
    const auto r = rate(s);
    for (std::size_t x = 0; x < s.u.size(); ++x) {
      s.u[x] += step * r[x];
      if (!std::isfinite(s.u[x])) throw BlowUpError(std::string(who) + ": non-finite field", i);
    }
    const double e = s.energy();
    if (!energy_not_increased(out.energies.back(), e)) {
      out.energy_nonincreasing = false;
      out.max_energy_increase = std::max(out.max_energy_increase, e - out.energies.back());
    }
    out.energies.push_back(e);
    out.means.push_back(s.mean());
    if (i % options.stride == 0 || i == steps) {
      out.states.push_back(s);
      out.times.push_back(static_cast<double>(i) * step);
    }
  }
  return out;
}

}  // namespace detail

/// Explicit scheme for ∂t u = m(Δu − W′(u)) with no-flux ends.
inline PhaseFieldTrajectory allen_cahn_solve(const PhaseFieldState& state, double mobility, double t_end, double dt,
                                             const SolveOptions& options = {}) {
  detail::require(mobility > 0.0, "allen_cahn_solve: mobility must be positive");
  const double h = state.grid.h();
  detail::require(dt <= h * h / (2.0 * mobility) * (1.0 + 1e-12), "allen_cahn_solve: CFL violated, need dt ≤ h²/(2m)");
  const auto well = state.energy_descriptor();
  return detail::phase_field_integrate(state, t_end, dt, options, "allen_cahn_solve", [&](const PhaseFieldState& s) {
    State r = neumann_laplacian(s.u, h);
    for (std::size_t x = 0; x < r.size(); ++x) r[x] = mobility * (r[x] - well.well_prime(s.u[x]));
    return r;
  });
}

/// Explicit scheme for ∂t u = mΔ(−Δu + W′(u)) with no-flux ends for u and μ.
inline PhaseFieldTrajectory cahn_hilliard_solve(const PhaseFieldState& state, double mobility, double t_end, double dt,
                                                const SolveOptions& options = {}) {
  detail::require(mobility > 0.0, "cahn_hilliard_solve: mobility must be positive");
  const double h = state.grid.h();
  detail::require(dt <= h * h * h * h / (8.0 * mobility) * (1.0 + 1e-12),
                  "cahn_hilliard_solve: CFL violated, need dt ≤ h⁴/(8m)");
  const auto well = state.energy_descriptor();
  return detail::phase_field_integrate(state, t_end, dt, options, "cahn_hilliard_solve", [&](const PhaseFieldState& s) {
    State mu = neumann_laplacian(s.u, h);
    for (std::size_t x = 0; x < mu.size(); ++x) mu[x] = -mu[x] + well.well_prime(s.u[x]);
    State r = neumann_laplacian(mu, h);
    for (double& v : r) v *= mobility;
    return r;
  });
}

}  // namespace gradflow
