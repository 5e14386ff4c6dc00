#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "gradflow/config.hpp"
#include "gradflow/fluctuations.hpp"
#include "gradflow/format.hpp"
#include "gradflow/gradient_flow.hpp"
#include "gradflow/jko.hpp"
#include "gradflow/ldp.hpp"
#include "gradflow/measures.hpp"
#include "gradflow/models.hpp"
#include "gradflow/particles.hpp"
#include "gradflow/transport.hpp"

namespace gradflow {

inline constexpr const char* kLibraryVersion = "1.0.0";

enum ExitStatus : int { kExitOk = 0, kExitConfigError = 2, kExitRuntimeError = 3, kExitInvariantFailure = 4 };

/// CSV table whose cells are rendered when added.
class Table {
 public:
  using Cell = std::variant<double, std::size_t, std::string>;

  explicit Table(std::vector<std::string> columns = {}) : columns_(std::move(columns)) {}

  void add(const std::vector<Cell>& row) {
    detail::require(row.size() == columns_.size(), "Table: row width differs from header");
    std::vector<std::string> text;
    for (const auto& c : row) {
      if (const auto* d = std::get_if<double>(&c))
        text.push_back(format_double(*d));
      else if (const auto* n = std::get_if<std::size_t>(&c))
        text.push_back(std::to_string(*n));
      else
        text.push_back(std::get<std::string>(c));
    }
    rows_.push_back(std::move(text));
  }

  std::size_t rows() const { return rows_.size(); }

  std::string str() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < columns_.size(); ++i) os << (i ? "," : "") << columns_[i];
    os << "\n";
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
      os << "\n";
    }
    return os.str();
  }

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

struct InvariantCheck {
  std::string name;
  bool passed = false;
};

struct ExperimentOutput {
  Table result;
  nlohmann::json results = nlohmann::json::object();
  std::vector<InvariantCheck> invariants;
  std::map<std::string, std::string> files;  // relative path → contents

  void check(const std::string& name, bool passed) { invariants.push_back({name, passed}); }
};

namespace detail {

/// Sequential draws from one counter-based stream.
class Draws {
 public:
  Draws(std::uint64_t seed, std::uint64_t stream) : rng_(seed, stream) {}
  double uniform() { return rng_.uniform(counter_++); }
  double normal() { return rng_.normal(counter_++); }
  std::size_t below(std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n)));
  }

 private:
  CounterRng rng_;
  std::uint64_t counter_ = 0;
};

inline std::vector<double> random_simplex(Draws& draws, std::size_t d) {
  std::vector<double> w(d);
  double s = 0.0;
  for (double& v : w) s += (v = draws.uniform());
  for (double& v : w) v /= s;
  return w;
}

inline GridDensity1D gaussian_density(const UniformGrid& grid, double mean, double sd) {
  return GridDensity1D::sample(grid, [=](double x) { return std::exp(-0.5 * (x - mean) * (x - mean) / (sd * sd)); })
      .normalized(1.0);
}

inline std::string json_file(const nlohmann::json& j) { return to_json_string(j); }

// ---------------------------------------------------------------------------

inline ExperimentOutput run_entropy(const ExperimentConfig& cfg) {
  const std::size_t d = cfg.count("alphabet"), pairs = cfg.count("pairs");
  require(d >= 2, "entropy: alphabet must be ≥ 2");
  Draws draws(cfg.seed, 10);
  ExperimentOutput out;
  out.result = Table({"pair", "relative_entropy", "total_variation", "ckp_margin", "pushforward_entropy", "merged_entropy"});
  std::size_t nonneg = 0, identity = 0, ckp = 0, pushforward = 0, processing = 0;
  for (std::size_t p = 0; p < pairs; ++p) {
    const auto mu = DiscreteMeasure::on_alphabet(random_simplex(draws, d));
    const auto nu = DiscreteMeasure::on_alphabet(random_simplex(draws, d));
    const double h = relative_entropy(mu, nu);
    const double tv = total_variation(mu, nu);
    // Injective relabelling i ↦ 2i + 1 and the merge i ↦ ⌊i/2⌋.
    auto inject = [](const Point& x) { return Point{2.0 * x[0] + 1.0}; };
    auto merge = [](const Point& x) { return Point{std::floor(x[0] / 2.0)}; };
    const double h_push = relative_entropy(push_forward(mu, inject), push_forward(nu, inject));
    const double h_merge = relative_entropy(push_forward(mu, merge), push_forward(nu, merge));
    const double slack = 1e-14 * std::max(1.0, h);
    nonneg += h > 0.0;
    identity += relative_entropy(mu, mu) == 0.0;
    ckp += 2.0 * tv * tv <= h + slack;
    pushforward += h_push == h;
    processing += h_merge <= h + slack;
    out.result.add({p, h, tv, h - 2.0 * tv * tv, h_push, h_merge});
  }
  out.results = {{"pairs", pairs},
                 {"positive_for_distinct", nonneg},
                 {"zero_for_equal", identity},
                 {"ckp_holds", ckp},
                 {"pushforward_exact", pushforward},
                 {"data_processing_holds", processing}};
  out.check("relative_entropy_positive_for_distinct", nonneg == pairs);
  out.check("relative_entropy_zero_for_equal", identity == pairs);
  out.check("ckp_inequality", ckp == pairs);
  out.check("injective_pushforward_invariance", pushforward == pairs);
  out.check("data_processing_inequality", processing == pairs);
  return out;
}

inline ExperimentOutput run_transport(const ExperimentConfig& cfg) {
  const std::size_t n = cfg.count("n"), dim = cfg.count("dim"), instances = cfg.count("instances");
  require(n >= 1 && n <= 9, "transport: n must be in 1..9 for the brute-force oracle");
  require(dim >= 1, "transport: dim must be ≥ 1");
  Draws draws(cfg.seed, 11);
  ExperimentOutput out;
  out.result = Table({"instance", "n", "hungarian_cost", "bruteforce_cost", "abs_difference", "straight_line_action"});
  nlohmann::json plans = nlohmann::json::array();
  bool equal = true, action_matches = true;
  double worst = 0.0;
  for (std::size_t k = 0; k < instances; ++k) {
    std::vector<Point> x(n, Point(dim)), y(n, Point(dim));
    for (auto& p : x)
      for (double& c : p) c = draws.uniform();
    for (auto& p : y)
      for (double& c : p) c = draws.uniform();
    const auto fast = w2_atomic(x, y);
    const auto oracle = w2_atomic_bruteforce(x, y);
    const double diff = std::abs(fast.cost - oracle.cost);
    worst = std::max(worst, diff);
    equal = equal && diff <= 1e-12;
    // Straight-line transport along the optimal matching over unit time.
    std::vector<std::vector<Point>> paths(n);
    constexpr std::size_t segments = 8;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t s = 0; s <= segments; ++s) {
        const double t = static_cast<double>(s) / segments;
        Point z(dim);
        for (std::size_t c = 0; c < dim; ++c) z[c] = (1.0 - t) * x[i][c] + t * y[fast.permutation[i]][c];
        paths[i].push_back(z);
      }
    const double action = atomic_path_action(paths, 1.0 / segments);
    action_matches = action_matches && std::abs(action - fast.cost) <= 1e-12 * std::max(1.0, fast.cost);
    out.result.add({k, n, fast.cost, oracle.cost, diff, action});
    plans.push_back({{"instance", k}, {"hungarian", to_json(fast)}, {"bruteforce", to_json(oracle)}});
  }

  // Translating Gaussian: the discrete action approaches W2² = shift².
  const double shift = cfg.num("shift");
  const std::size_t cells = cfg.count("path_cells"), steps = cfg.count("path_steps");
  require(steps >= 1, "transport: path_steps must be ≥ 1");
  const UniformGrid grid(-4.0, 4.0 + shift, cells);
  std::vector<GridDensity1D> path;
  for (std::size_t s = 0; s <= steps; ++s)
    path.push_back(gaussian_density(grid, shift * static_cast<double>(s) / static_cast<double>(steps), 0.5));
  const double dt = 1.0 / static_cast<double>(steps);
  Table action_table({"step", "time", "local_norm_sq"});
  for (const auto& row : path_action_steps(path, dt)) action_table.add({row.step, row.time, row.local_norm_sq});
  const double action = path_action(path, dt);
  const double w2 = w2_grid_1d(path.front(), path.back());
  const double tolerance = 2.0 * (grid.h() + dt) * std::max(1.0, w2 * w2);

  out.files["plans.json"] = json_file(plans);
  out.files["path_action.csv"] = action_table.str();
  out.results = {{"hungarian_equals_bruteforce", equal},
                 {"max_abs_difference", worst},
                 {"straight_line_action_equals_cost", action_matches},
                 {"path_action", action},
                 {"w2_grid_squared", w2 * w2},
                 {"benamou_brenier_tolerance", tolerance}};
  out.check("hungarian_equals_bruteforce", equal);
  out.check("straight_line_action_equals_w2_squared", action_matches);
  out.check("benamou_brenier_lower_bound", action >= w2 * w2 - tolerance);
  return out;
}

inline ExperimentOutput run_jko(const ExperimentConfig& cfg) {
  const UniformGrid grid(cfg.num("a"), cfg.num("b"), cfg.count("cells"));
  const double h = cfg.num("h"), var0 = cfg.num("initial_variance");
  const std::size_t steps = cfg.count("steps");
  require(var0 > 0.0, "jko: initial_variance must be positive");
  const double theta = cfg.constants.rt();
  GridFreeEnergy energy = cfg.str("potential") == "quadratic"
                              ? GridFreeEnergy::boltzmann(grid, theta, SmoothFunction::quadratic(cfg.num("strength")),
                                                          cfg.constants.c0)
                              : GridFreeEnergy::entropy(grid, theta);
  energy.reference = cfg.constants.c0;
  const EnergyFunctional F(energy);
  const auto rho0 = gaussian_density(grid, 0.5 * (grid.a + grid.b), std::sqrt(var0));
  const auto evo = jko_evolve_detailed(rho0, h, steps, F);

  ExperimentOutput out;
  out.result = Table({"step", "time", "energy", "variance", "mass", "iters", "grad_norm", "w2_sq"});
  nlohmann::json diagnostics = nlohmann::json::array();
  bool monotone = true;
  double prev = F.value(rho0.values());
  out.result.add({std::size_t{0}, 0.0, prev, variance(rho0), rho0.mass(), std::size_t{0}, 0.0, 0.0});
  for (std::size_t k = 0; k < steps; ++k) {
    const auto& d = evo.diagnostics[k];
    const auto& rho = evo.iterates[k + 1];
    monotone = monotone && energy_not_increased(prev, d.energy);
    prev = d.energy;
    out.result.add({k + 1, h * static_cast<double>(k + 1), d.energy, variance(rho), rho.mass(), d.iters, d.grad_norm,
                    d.w2_sq});
    nlohmann::json row = to_json(d);
    row["step"] = k + 1;
    diagnostics.push_back(row);
  }
  const double var_final = variance(evo.iterates.back());
  out.files["jko_diagnostics.json"] = json_file(diagnostics);
  out.results = {{"variance_initial", variance(rho0)}, {"variance_final", var_final}, {"energy_final", prev}};
  out.check("energy_nonincreasing", monotone);
  if (cfg.str("potential") == "none") {
    // Heat flow with diffusivity θ: σ²(t) = σ0² + 2θt.
    const double expected = var0 + 2.0 * theta * h * static_cast<double>(steps);
    out.results["variance_expected"] = expected;
    out.check("heat_flow_variance_law", std::abs(var_final - expected) <= 0.02 * expected);
  }
  return out;
}

inline SmoothFunction named_potential(const ExperimentConfig& cfg) {
  const std::string kind = cfg.str("potential");
  const double s = cfg.num("strength");
  if (kind == "linear") return SmoothFunction::linear(s);
  if (kind == "quadratic") return SmoothFunction::quadratic(s);
  if (kind == "gravity") return SmoothFunction::linear(s * cfg.constants.g);
  return SmoothFunction::zero();
}

inline ExperimentOutput run_fokker_planck(const ExperimentConfig& cfg) {
  const UniformGrid grid(cfg.num("a"), cfg.num("b"), cfg.count("cells"));
  const auto& K = cfg.constants;
  const double cfl = cfg.num("cfl");
  require(cfl > 0.0 && cfl <= 1.0, "fokker_planck: cfl must be in (0, 1]");
  const double dt = cfl * grid.h() * grid.h() * K.eta / (2.0 * K.rt());
  const double t_end = cfg.num("T_end");
  const std::size_t every = std::max<std::size_t>(1, cfg.count("record_every"));
  const SmoothFunction potential = named_potential(cfg);
  std::vector<double> V(grid.cells);
  for (std::size_t i = 0; i < grid.cells; ++i) V[i] = potential.f(grid.center(i));

  const GridDensity1D c0 = cfg.str("initial") == "gaussian"
                               ? gaussian_density(grid, cfg.num("initial_mean"), cfg.num("initial_sd"))
                               : GridDensity1D(grid, std::vector<double>(grid.cells, 1.0)).normalized(1.0);
  const bool edi = cfg.flag("edi");
  const auto traj = fokker_planck_solve(c0, K, V, t_end, dt, {edi ? 1 : every});

  ExperimentOutput out;
  out.result = Table({"step", "time", "energy", "mass"});
  const std::size_t steps = traj.energies.size() - 1;
  for (std::size_t i = 0; i <= steps; ++i)
    if (i % every == 0 || i == steps)
      out.result.add({i, static_cast<double>(i) * traj.dt, traj.energies[i], traj.masses[i]});

  const auto boltzmann =
      GridDensity1D::sample(grid, [&](double x) { return std::exp(-potential.f(x) / K.rt()); }).normalized(c0.mass());
  const auto& final_state = traj.states.back();
  Table profile({"x", "density", "boltzmann"});
  for (std::size_t i = 0; i < grid.cells; ++i) profile.add({grid.center(i), final_state[i], boltzmann[i]});
  out.files["final_density.csv"] = profile.str();

  double drift = 0.0;
  for (double m : traj.masses) drift = std::max(drift, std::abs(m - traj.masses.front()));
  out.results = {{"steps", steps},
                 {"dt", traj.dt},
                 {"energy_final", traj.energies.back()},
                 {"mass_drift", drift},
                 {"l1_to_boltzmann", l1_distance(final_state, boltzmann)}};
  out.check("energy_nonincreasing", traj.energy_nonincreasing);
  out.check("mass_conserved", drift <= 1e-12 * traj.masses.front());

  if (edi) {
    const auto problem = fokker_planck_problem(grid, K, potential);
    std::vector<State> z;
    for (const auto& s : traj.states) z.push_back(s.values());
    Table edi_table({"step", "time", "energy", "dissipation_primal", "dissipation_dual", "edi_partial"});
    const auto records = edi_records(problem, z, traj.dt);
    for (const auto& r : records)
      edi_table.add({r.step, r.time, r.energy, r.dissipation_primal, r.dissipation_dual, r.edi_partial});
    out.files["edi.csv"] = edi_table.str();
    out.results["edi_residual"] = records.back().edi_partial;
  }
  return out;
}

inline ExperimentOutput run_multicomponent(const ExperimentConfig& cfg) {
  const UniformGrid grid(cfg.num("a"), cfg.num("b"), cfg.count("cells"));
  const auto& K = cfg.constants;
  const auto alpha = cfg.numbers("alpha"), eta = cfg.numbers("eta");
  const std::size_t m = alpha.size();
  require(m >= 2, "multicomponent: need at least two species");
  require(eta.size() == m, "multicomponent: alpha and eta must have equal length");
  const double amplitude = cfg.num("amplitude");
  require(amplitude >= 0.0 && amplitude * static_cast<double>(m - 1) < 1.0,
          "multicomponent: amplitude must be in [0, 1/(species − 1))");
  const Balance balance = cfg.str("balance") == "local" ? Balance::local : Balance::global;

  // Volume fractions φ_i = (1 + A cos((i+1)πξ))/m for i < m−1, the last one closing Σφ = 1.
  MultiSpeciesState s{grid, std::vector<std::vector<double>>(m, std::vector<double>(grid.cells)), alpha, eta};
  for (std::size_t x = 0; x < grid.cells; ++x) {
    const double xi = (grid.center(x) - grid.a) / (grid.b - grid.a);
    double rest = 1.0;
    for (std::size_t i = 0; i + 1 < m; ++i) {
      const double phi = (1.0 + amplitude * std::cos(static_cast<double>(i + 1) * M_PI * xi)) / static_cast<double>(m);
      s.concentrations[i][x] = phi / alpha[i];
      rest -= phi;
    }
    s.concentrations[m - 1][x] = rest / alpha[m - 1];
  }
  s.validate();

  const double eta_min = *std::min_element(eta.begin(), eta.end());
  const double cfl = cfg.num("cfl");
  require(cfl > 0.0 && cfl <= 1.0, "multicomponent: cfl must be in (0, 1]");
  const double dt = cfl * grid.h() * grid.h() * eta_min / (2.0 * K.rt());
  const std::size_t steps = cfg.count("steps");
  const std::size_t every = std::max<std::size_t>(1, cfg.count("record_every"));
  const auto traj = multicomponent_solve(s, K, balance, steps, dt, {every});

  ExperimentOutput out;
  out.result = Table({"step", "time", "energy", "mass", "constraint_max_violation"});
  std::vector<double> masses0(m);
  for (std::size_t i = 0; i < m; ++i) masses0[i] = s.mass(i);
  double mass_drift = 0.0, running = s.constraint_violation();
  std::size_t stored = 0;
  for (std::size_t step = 0; step <= steps; ++step) {
    if (step > 0) running = std::max(running, traj.max_drift[step - 1]);
    if (step % every != 0 && step != steps) continue;
    const auto& st = traj.states[stored++];
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      total += st.mass(i);
      mass_drift = std::max(mass_drift, std::abs(st.mass(i) - masses0[i]));
    }
    out.result.add({step, static_cast<double>(step) * dt, traj.energies[step], total, running});
  }
  out.results = {{"balance", to_string(balance)},
                 {"dt", dt},
                 {"max_constraint_violation", traj.max_constraint_violation},
                 {"mass_drift", mass_drift},
                 {"energy_final", traj.energies.back()}};
  out.check("volume_constraint", traj.max_constraint_violation <= 1e-8);
  out.check("energy_nonincreasing", traj.energy_nonincreasing);
  out.check("species_mass_conserved", mass_drift <= 1e-10);

  const bool symmetric = std::all_of(alpha.begin(), alpha.end(), [&](double a) { return a == alpha[0]; }) &&
                         std::all_of(eta.begin(), eta.end(), [&](double e) { return e == eta[0]; });
  if (symmetric && steps > 0) {
    // Equal species reduce to plain diffusion with coefficient RT/η for each of them.
    PhysicalConstants single = K;
    single.eta = eta[0];
    const GridDensity1D c_first(grid, s.concentrations[0]);
    const auto fp = fokker_planck_solve(c_first, single, std::vector<double>(grid.cells, 0.0),
                                        dt * static_cast<double>(steps), dt, {steps});
    double linf = 0.0;
    const auto& last = traj.states.back().concentrations[0];
    for (std::size_t x = 0; x < grid.cells; ++x) linf = std::max(linf, std::abs(last[x] - fp.states.back()[x]));
    out.results["linf_to_single_species"] = linf;
    out.check("symmetric_matches_single_species", linf <= 1e-6);
  }
  return out;
}

inline ExperimentOutput run_phasefield(const ExperimentConfig& cfg) {
  const UniformGrid grid(cfg.num("a"), cfg.num("b"), cfg.count("cells"));
  const double mobility = cfg.num("mobility"), cfl = cfg.num("cfl");
  require(mobility > 0.0, "phasefield: mobility must be positive");
  require(cfl > 0.0 && cfl <= 1.0, "phasefield: cfl must be in (0, 1]");
  const bool ch = cfg.str("model") == "cahn_hilliard";
  const double h = grid.h();
  const double dt = ch ? cfl * h * h * h * h / (8.0 * mobility) : cfl * h * h / (2.0 * mobility);
  const std::size_t steps = cfg.count("steps");
  const std::size_t every = std::max<std::size_t>(1, cfg.count("record_every"));

  // Smooth random start: mean + amplitude·Σ_{k≤4} (g_k/k) cos(kπξ).
  Draws draws(cfg.seed, 12);
  std::vector<double> coef(4);
  for (double& c : coef) c = draws.normal();
  PhaseFieldState s{grid, std::vector<double>(grid.cells)};
  for (std::size_t x = 0; x < grid.cells; ++x) {
    const double xi = (grid.center(x) - grid.a) / (grid.b - grid.a);
    double v = cfg.num("mean");
    for (std::size_t k = 0; k < coef.size(); ++k)
      v += cfg.num("amplitude") * coef[k] / static_cast<double>(k + 1) * std::cos(static_cast<double>(k + 1) * M_PI * xi);
    s.u[x] = v;
  }
  const double t_end = dt * static_cast<double>(steps);
  const auto traj = ch ? cahn_hilliard_solve(s, mobility, t_end, dt, {every}) : allen_cahn_solve(s, mobility, t_end, dt, {every});

  ExperimentOutput out;
  out.result = Table({"step", "time", "energy", "mean"});
  const std::size_t n = traj.energies.size() - 1;
  for (std::size_t i = 0; i <= n; ++i)
    if (i % every == 0 || i == n) out.result.add({i, static_cast<double>(i) * traj.dt, traj.energies[i], traj.means[i]});
  double mean_drift = 0.0;
  for (double mu : traj.means) mean_drift = std::max(mean_drift, std::abs(mu - traj.means.front()));
  Table profile({"x", "u"});
  for (std::size_t x = 0; x < grid.cells; ++x) profile.add({grid.center(x), traj.states.back().u[x]});
  out.files["final_field.csv"] = profile.str();
  out.results = {{"model", cfg.str("model")},
                 {"dt", traj.dt},
                 {"energy_initial", traj.energies.front()},
                 {"energy_final", traj.energies.back()},
                 {"mean_drift", mean_drift}};
  out.check("energy_nonincreasing", traj.energy_nonincreasing);
  if (ch) out.check("mean_conserved", mean_drift <= 1e-12);
  return out;
}

inline ExperimentOutput run_particles(const ExperimentConfig& cfg) {
  const std::size_t n = cfg.count("n");
  const double dt = cfg.num("dt"), t_end = cfg.num("T");
  const double A = cfg.num("A"), sigma = cfg.num("sigma"), kappa = cfg.num("interaction");
  require(A > 0.0 && sigma > 0.0, "particles: A and sigma must be positive");
  const bool confined = cfg.str("potential") == "quadratic";
  const double k = cfg.num("strength");

  ParticleEnsemble ensemble{gaussian_positions(n, cfg.num("initial_mean"), cfg.num("initial_sd"), cfg.seed),
                            confined ? Potential::quadratic(k) : Potential{},
                            kappa != 0.0 ? Potential::quadratic(kappa) : Potential{},
                            identity_matrix(1, A),
                            identity_matrix(1, sigma),
                            cfg.seed};
  const std::size_t every = cfg.count("snapshot_every");
  const auto traj = euler_maruyama(ensemble, dt, t_end, {every});

  ExperimentOutput out;
  for (std::size_t s = 0; s < traj.snapshots.size(); ++s) {
    Table snap({"particle_id", "x"});
    for (std::size_t i = 0; i < n; ++i) snap.add({i, traj.snapshots[s][i][0]});
    const auto step = static_cast<std::size_t>(std::llround(traj.times[s] / dt));
    char name[48];
    std::snprintf(name, sizeof name, "snapshots/step_%08zu.csv", step);
    out.files[name] = snap.str();
  }
  out.files["metadata.json"] = json_file(ensemble_metadata(ensemble, dt, t_end));

  // PDE of the hydrodynamic limit: ∂ρ = σ²Δρ + A div(ρ∇Vb), i.e. RT/η = σ², 1/η = A.
  const UniformGrid grid(cfg.num("a"), cfg.num("b"), cfg.count("cells"));
  const auto empirical = empirical_density(traj.final_positions(), grid);
  out.result = Table({"cell", "x", "empirical", "pde"});
  // In 1D with scalar A and σ the Einstein relation σσᵀ = kT·A holds with kT = σ²/A.
  out.results = {{"n", n}, {"steps", static_cast<std::size_t>(std::llround(t_end / dt))}, {"kT", sigma * sigma / A}};
  if (kappa == 0.0) {
    const auto K = PhysicalConstants::with_rt(sigma * sigma / A, 1.0 / A);
    std::vector<double> V(grid.cells, 0.0);
    if (confined)
      for (std::size_t i = 0; i < grid.cells; ++i) V[i] = 0.5 * k * grid.center(i) * grid.center(i);
    const auto rho0 = gaussian_density(grid, cfg.num("initial_mean"), cfg.num("initial_sd"));
    const double pde_dt = 0.9 * grid.h() * grid.h() * K.eta / (2.0 * K.rt());
    const auto pde = fokker_planck_solve(rho0, K, V, t_end, pde_dt, {std::numeric_limits<std::size_t>::max()});
    const auto& rho_T = pde.states.back();
    for (std::size_t i = 0; i < grid.cells; ++i) out.result.add({i, grid.center(i), empirical[i], rho_T[i]});
    out.results["w2_empirical_pde"] = w2_grid_1d(empirical, rho_T);
  } else {
    for (std::size_t i = 0; i < grid.cells; ++i) out.result.add({i, grid.center(i), empirical[i], std::string("")});
  }
  out.check("empirical_mass_one", std::abs(empirical.mass() - 1.0) <= 1e-12);
  return out;
}

inline ExperimentOutput run_ldp(const ExperimentConfig& cfg) {
  const double a = cfg.num("a");
  ExperimentOutput out;
  out.result = Table({"n", "tail_rate_exact", "rate_limit", "abs_error"});
  const double limit = coin_rate(a);
  bool chernoff = true, coin_decreasing = true;
  double prev = kInfinity;
  for (double nd : cfg.numbers("coin_n")) {
    require(nd >= 1.0 && nd == std::floor(nd), "ldp: coin_n entries must be positive integers");
    const auto n = static_cast<std::size_t>(nd);
    const double rate = coin_tail_exact(n, a);
    const double err = std::abs(rate - limit);
    chernoff = chernoff && rate >= limit - 1e-12;
    coin_decreasing = coin_decreasing && err < prev;
    prev = err;
    out.result.add({n, rate, limit, err});
  }

  FiniteLdpProblem problem{cfg.numbers("mu"), cfg.numbers("tilt"), 1};
  {
    double s = 0.0;
    for (double m : problem.mu) s += m;
    for (double& m : problem.mu) m /= s;  // 1/3 written in decimal need not sum to exactly 1
  }
  const std::size_t state = cfg.count("state");
  require(state < problem.mu.size(), "ldp: state index out of range");
  const std::vector<LinearConstraint> set = {LinearConstraint::at_least(problem.mu.size(), state, cfg.num("threshold"))};
  Table sanov({"n", "exact_rate", "inf_rate", "abs_error", "types_in_set", "types_total"});
  bool sanov_decreasing = true;
  double prev_err = kInfinity;
  SanovResult last;
  for (double nd : cfg.numbers("sanov_n")) {
    require(nd >= 1.0 && nd == std::floor(nd), "ldp: sanov_n entries must be positive integers");
    problem.n = static_cast<std::size_t>(nd);
    last = sanov_exact(problem, set);
    const double err = std::abs(last.exact_rate - last.inf_entropy);
    sanov_decreasing = sanov_decreasing && err < prev_err;
    prev_err = err;
    sanov.add({problem.n, last.exact_rate, last.inf_entropy, err, last.types_in_set, last.types_total});
  }
  out.files["sanov.csv"] = sanov.str();

  const auto table = varadhan_tilt(problem);
  std::vector<std::string> cols;
  for (std::size_t i = 0; i < problem.mu.size(); ++i) cols.push_back("k" + std::to_string(i));
  cols.push_back("exact_rate");
  cols.push_back("limit_rate");
  Table tilt(cols);
  for (const auto& row : table.rows) {
    std::vector<Table::Cell> cells(row.type.begin(), row.type.end());
    cells.push_back(row.exact_rate);
    cells.push_back(row.limit_rate);
    tilt.add(cells);
  }
  out.files["varadhan.csv"] = tilt.str();

  const auto deg = log_degeneracy({2, 2});
  out.results = {{"coin_rate", limit},
                 {"coin_error_final", prev},
                 {"sanov_n_final", problem.n},
                 {"sanov_exact_final", last.exact_rate},
                 {"sanov_inf_rate", last.inf_entropy},
                 {"varadhan_minimizer", table.minimizer},
                 {"log_degeneracy_exact", deg.exact},
                 {"log_degeneracy_stirling", deg.approximation}};
  out.check("chernoff_lower_bound", chernoff);
  out.check("coin_error_decreasing", coin_decreasing);
  out.check("sanov_error_decreasing", sanov_decreasing);
  return out;
}

inline ExperimentOutput run_reversibility(const ExperimentConfig& cfg) {
  const UniformGrid grid(cfg.num("a"), cfg.num("b"), cfg.count("cells"));
  const std::size_t per = cfg.count("segments");
  const double sy2 = cfg.num("sigma_y_sq"), coupling = cfg.num("coupling");
  require(sy2 > 0.0, "reversibility: sigma_y_sq must be positive");

  // Two-channel Gaussian knots; both paths start at s0 and end at s1.
  auto knot = [&](double center, double width, double w0, double w1) {
    ChannelState s;
    for (double w : {w0, w1})
      s.push_back(GridDensity1D::sample(grid, [&](double x) { return w * std::exp(-(x - center) * (x - center) / width); }));
    double m = 0.0;
    for (const auto& r : s) m += r.mass();
    for (auto& r : s) r = r.normalized(r.mass() / m);
    return s;
  };
  const auto s0 = knot(0.0, 1.0, 1.3, 0.7), s1 = knot(0.5, 1.0, 0.8, 1.2);
  const auto via1 = knot(-0.6, 0.8, 1.0, 1.0), via2 = knot(1.0, 1.0 / 1.5, 1.4, 0.6);
  const auto path1 = linear_path({s0, via1, s1}, per), path2 = linear_path({s0, via2, s1}, per);
  const double dt = 1.0 / static_cast<double>(per);
  auto vb = [coupling](double x, double y) { return coupling * x * y + 0.5 * x * x; };

  const ReversibilitySetup prop{identity_matrix(2), identity_matrix(2), vb, {}};
  ReversibilitySetup nonprop = prop;
  nonprop.sigma[1][1] = std::sqrt(sy2);
  const auto r_prop = reversibility_check(prop, path1, path2, dt);
  const auto r_non = reversibility_check(nonprop, path1, path2, dt);

  ExperimentOutput out;
  out.result = Table({"case", "proportional", "crossterm_path1", "crossterm_path2", "difference"});
  out.result.add({std::string("proportional"), std::string(r_prop.proportional ? "true" : "false"), r_prop.crossterm_path1,
                  r_prop.crossterm_path2, r_prop.difference()});
  out.result.add({std::string("nonproportional"), std::string(r_non.proportional ? "true" : "false"),
                  r_non.crossterm_path1, r_non.crossterm_path2, r_non.difference()});
  out.results = {{"proportional_difference", r_prop.difference()}, {"nonproportional_difference", r_non.difference()}};
  out.check("proportional_path_independent", r_prop.difference() <= 1e-6);
  if (!r_non.proportional && coupling != 0.0) out.check("nonproportional_path_dependent", r_non.difference() > 1e-3);
  return out;
}

}  // namespace detail

inline ExperimentOutput execute(const ExperimentConfig& cfg) {
  const std::string& e = cfg.experiment;
  if (e == "entropy") return detail::run_entropy(cfg);
  if (e == "transport") return detail::run_transport(cfg);
  if (e == "jko") return detail::run_jko(cfg);
  if (e == "fokker_planck") return detail::run_fokker_planck(cfg);
  if (e == "multicomponent") return detail::run_multicomponent(cfg);
  if (e == "phasefield") return detail::run_phasefield(cfg);
  if (e == "particles") return detail::run_particles(cfg);
  if (e == "ldp") return detail::run_ldp(cfg);
  if (e == "reversibility") return detail::run_reversibility(cfg);
  throw ArgumentError("execute: unknown experiment '" + e + "'");
}

struct RunOutcome {
  int status = kExitOk;
  nlohmann::json summary;
  std::string error;
};

/// Runs one experiment and writes result.csv, summary.json and the experiment's extra files.
inline RunOutcome run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& output_dir) {
  namespace fs = std::filesystem;
  RunOutcome outcome;
  nlohmann::json summary = {{"experiment", cfg.experiment},
                            {"config_hash", config_hash(cfg)},
                            {"library_version", kLibraryVersion},
                            {"generator_version", kGeneratorVersion},
                            {"seed", cfg.seed},
                            {"constants", cfg.constants_json},
                            {"parameters", cfg.parameters}};
  auto write = [&](const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    os << text;
    if (!os) throw Error("cannot write " + path.string());
  };

  const auto start = std::chrono::steady_clock::now();
  ExperimentOutput out;
  try {
    fs::create_directories(output_dir);
    out = execute(cfg);
  } catch (const std::exception& e) {
    outcome.status = kExitRuntimeError;
    outcome.error = e.what();
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  nlohmann::json invariants = nlohmann::json::array();
  bool all_passed = true;
  for (const auto& c : out.invariants) {
    invariants.push_back({{"name", c.name}, {"passed", c.passed}});
    all_passed = all_passed && c.passed;
  }
  if (outcome.status == kExitOk && !all_passed) outcome.status = kExitInvariantFailure;
  summary["results"] = out.results;
  summary["invariants"] = invariants;
  summary["status"] = outcome.status == kExitOk               ? "ok"
                      : outcome.status == kExitInvariantFailure ? "invariant_failure"
                                                                : "error";
  if (!outcome.error.empty()) summary["error"] = outcome.error;
  summary["wall_time_seconds"] = wall;

  try {
    if (outcome.status != kExitRuntimeError) {
      write(output_dir / "result.csv", out.result.str());
      for (const auto& [name, text] : out.files) write(output_dir / name, text);
    }
    write(output_dir / "summary.json", to_json_string(summary));
  } catch (const std::exception& e) {
    outcome.status = kExitRuntimeError;
    outcome.error = e.what();
  }
  outcome.summary = std::move(summary);
  return outcome;
}

}  // namespace gradflow
