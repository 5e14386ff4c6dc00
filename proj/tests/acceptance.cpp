#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "gradflow/gradflow.hpp"

using namespace gradflow;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed;
  std::string detail;
};

std::string fmt(const char* f, double a = 0.0, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::vector<Point> random_points(std::mt19937_64& gen, std::size_t n, std::size_t dim) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Point> p(n, Point(dim));
  for (auto& x : p)
    for (double& c : x) c = u(gen);
  return p;
}

std::vector<double> random_probability(std::mt19937_64& gen, std::size_t d) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(d);
  double s = 0.0;
  for (double& v : w) s += (v = u(gen));
  for (double& v : w) v /= s;
  return w;
}

bool nonincreasing(const std::vector<double>& e) {
  for (std::size_t i = 1; i < e.size(); ++i)
    if (e[i] > e[i - 1] + 1e-12 * (std::abs(e[i - 1]) + 1.0)) return false;
  return true;
}

double linf(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

Outcome assignment_oracle() {
  std::mt19937_64 gen(1);
  double worst = 0.0;
  for (std::size_t n = 2; n <= 8; ++n)
    for (int t = 0; t < 200; ++t) {
      const auto x = random_points(gen, n, 2), y = random_points(gen, n, 2);
      worst = std::max(worst, std::abs(w2_atomic(x, y).cost - w2_atomic_bruteforce(x, y).cost));
    }
  return {worst <= 1e-12, fmt("max |dcost| = %.3g over 1400 instances", worst)};
}

Outcome dirac_distance() {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  int mismatches = 0;
  for (int t = 0; t < 100; ++t) {
    const double x = u(gen), y = u(gen);
    if (w2_atomic({{x}}, {{y}}).distance() != std::abs(x - y)) ++mismatches;
  }
  return {mismatches == 0, fmt("%g of 100 pairs differ from |x - y|", mismatches)};
}

Outcome entropy_suite() {
  std::mt19937_64 gen(3);
  std::uniform_int_distribution<std::size_t> size(2, 8);
  int violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t d = size(gen);
    const auto mw = random_probability(gen, d), nw = random_probability(gen, d);
    const auto mu = DiscreteMeasure::on_alphabet(mw), nu = DiscreteMeasure::on_alphabet(nw);
    const double h = relative_entropy(mu, nu), tv = total_variation(mu, nu);
    violations += !(h > 0.0);
    violations += relative_entropy(mu, mu) != 0.0;
    violations += 2.0 * tv * tv > h + 1e-14 * std::max(1.0, h);
    auto inject = [](const Point& p) { return Point{5.0 * p[0] + 2.0}; };
    violations += relative_entropy(push_forward(mu, inject), push_forward(nu, inject)) != h;
    auto merge = [](const Point& p) { return Point{std::floor(p[0] / 3.0)}; };
    violations += relative_entropy(push_forward(mu, merge), push_forward(nu, merge)) > h + 1e-14 * std::max(1.0, h);
  }
  return {violations == 0, fmt("%g violations over 1000 pairs", violations)};
}

Outcome coin_ldp() {
  const double limit = coin_rate(0.6);
  double previous = kInfinity;
  bool decreasing = true;
  for (std::size_t n : {100, 500, 2000}) {
    const double err = std::abs(coin_tail_exact(n, 0.6) - limit);
    decreasing = decreasing && err < previous;
    previous = err;
  }
  const double gap = std::abs(coin_tail_exact(2000, 0.6) - 0.020136);
  return {gap <= 0.01 && decreasing, fmt("|rate(2000) - 0.020136| = %.3g, error(2000) = %.3g, decreasing = %g", gap,
                                         previous, decreasing)};
}

Outcome sanov_varadhan() {
  const std::vector<double> mu(3, 1.0 / 3.0);
  bool ok = true;
  std::string detail;
  for (const std::vector<double>& tilt : {std::vector<double>{}, std::vector<double>{0.0, 0.5, 1.0}}) {
    double previous = kInfinity;
    bool decreasing = true;
    for (std::size_t n : {30, 60, 120}) {
      const auto r = sanov_exact({mu, tilt, n}, {LinearConstraint::at_least(3, 0, 0.6)});
      const double err = std::abs(r.exact_rate - r.inf_entropy);
      decreasing = decreasing && err < previous;
      previous = err;
    }
    ok = ok && decreasing && previous <= 0.05;
    detail += std::string(tilt.empty() ? "untilted" : "tilted") + fmt(" error(120) = %.4f decreasing = %g; ", previous, decreasing);
  }
  return {ok, detail};
}

Outcome jko_heat() {
  const UniformGrid g(-8.0, 8.0, 400);
  const auto rho0 = GridDensity1D::sample(g, [](double x) { return std::exp(-0.5 * x * x); }).normalized(1.0);
  const EnergyFunctional F(GridFreeEnergy::entropy(g));
  const auto it = jko_evolve(rho0, 1e-3, 100, F);
  std::vector<double> energies;
  for (const auto& r : it) energies.push_back(F.value(r.values()));
  const double var = variance(it.back());
  const bool monotone = nonincreasing(energies);
  return {std::abs(var - 1.2) <= 0.02 * 1.2 && monotone,
          fmt("final variance = %.6f, energy nonincreasing = %g", var, monotone)};
}

Outcome boltzmann_stationarity() {
  const UniformGrid g(0.0, 5.0, 100);
  const auto K = PhysicalConstants::dimensionless();
  std::vector<double> V;
  for (double x : g.centers()) V.push_back(x);
  const GridDensity1D c0(g, std::vector<double>(g.cells, 0.2));
  const auto tr = fokker_planck_solve(c0, K, V, 50.0, 0.9 * g.h() * g.h() / 2.0, {1000000000});
  const auto target = GridDensity1D::sample(g, [](double x) { return std::exp(-x); }).normalized(1.0);
  const double d = l1_distance(tr.states.back(), target);
  return {d <= 1e-3, fmt("L1 = %.3g", d)};
}

Outcome edi_convergence() {
  const UniformGrid g(0.0, 1.0, 50);
  const auto K = PhysicalConstants::dimensionless();
  const auto c0 = GridDensity1D::sample(g, [](double x) { return 1.0 + 0.5 * std::cos(M_PI * x); });
  const std::vector<double> V(g.cells, 0.0);
  const auto problem = fokker_planck_problem(g, K, SmoothFunction::zero());
  std::vector<double> forward, reversed;
  for (double f : {0.4, 0.2}) {
    const auto tr = fokker_planck_solve(c0, K, V, 0.02, f * g.h() * g.h() / 2.0);
    std::vector<State> z;
    for (const auto& s : tr.states) z.push_back(s.values());
    forward.push_back(edi_residual(problem, z, tr.dt));
    std::reverse(z.begin(), z.end());
    reversed.push_back(edi_residual(problem, z, tr.dt));
  }
  const double ratio = forward[0] / forward[1];
  const double contrast = std::min(reversed[0] / forward[0], reversed[1] / forward[1]);
  return {ratio >= 1.7 && ratio <= 2.3 && contrast > 10.0,
          fmt("halving ratio = %.4f, reversed/forward >= %.3g", ratio, contrast)};
}

Outcome multicomponent() {
  const UniformGrid g(0.0, 1.0, 50);
  const auto K = PhysicalConstants::dimensionless();
  MultiSpeciesState sym{g, {std::vector<double>(50), std::vector<double>(50)}, {1.0, 1.0}, {1.0, 1.0}};
  for (std::size_t x = 0; x < 50; ++x) {
    sym.concentrations[0][x] = 0.5 + 0.3 * std::cos(M_PI * g.center(x));
    sym.concentrations[1][x] = 1.0 - sym.concentrations[0][x];
  }
  const double dt = 0.4 * g.h() * g.h();
  const auto fp = fokker_planck_solve(GridDensity1D(g, sym.concentrations[0]), K, std::vector<double>(50, 0.0),
                                      1000 * dt, dt, {1000000});
  const auto global = multicomponent_solve(sym, K, Balance::global, 1000, dt, {1000000});
  const double diff = linf(global.states.back().concentrations[0], fp.states.back().values());

  // Unequal molar volumes and frictions.
  MultiSpeciesState mixed{g, {std::vector<double>(50), std::vector<double>(50)}, {1.0, 2.0}, {1.0, 3.0}};
  for (std::size_t x = 0; x < 50; ++x) {
    const double phi0 = 0.5 + 0.25 * std::cos(M_PI * g.center(x));
    mixed.concentrations[0][x] = phi0 / 1.0;
    mixed.concentrations[1][x] = (1.0 - phi0) / 2.0;
  }
  double violation = 0.0;
  for (const auto* s : {&sym, &mixed})
    for (Balance b : {Balance::global, Balance::local})
      violation = std::max(violation, multicomponent_solve(*s, K, b, 1000, 0.4 * g.h() * g.h() / 3.0, {1000000})
                                          .max_constraint_violation);
  return {diff <= 1e-6 && violation <= 1e-8,
          fmt("symmetric vs single species Linf = %.3g, max volume violation = %.3g", diff, violation)};
}

Outcome phase_field() {
  const UniformGrid g(0.0, 8.0, 64);
  std::mt19937_64 gen(29);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PhaseFieldState s{g, std::vector<double>(64, 0.0)};
  for (int mode = 1; mode <= 4; ++mode) {
    const double c = 0.3 * u(gen);
    for (std::size_t x = 0; x < 64; ++x) s.u[x] += c * std::cos(mode * M_PI * g.center(x) / 8.0);
  }
  const double h = g.h();
  const auto ac = allen_cahn_solve(s, 1.0, 10000 * 0.4 * h * h, 0.4 * h * h, {1000000});
  const double dt = h * h * h * h / 16.0;
  const auto ch = cahn_hilliard_solve(s, 1.0, 10000 * dt, dt, {1000000});
  double drift = 0.0;
  for (double m : ch.means) drift = std::max(drift, std::abs(m - ch.means.front()));
  const bool ac_ok = nonincreasing(ac.energies), ch_ok = nonincreasing(ch.energies);
  return {ac_ok && ch_ok && drift <= 1e-12 && ch.means.size() == 10001,
          fmt("AC monotone = %g, CH monotone = %g, CH mean drift = %.3g", ac_ok, ch_ok, drift)};
}

Outcome sde_to_pde() {
  const UniformGrid G(-6.0, 6.0, 240);
  const double T = 0.5;
  std::vector<double> V;
  for (double x : G.centers()) V.push_back(0.5 * x * x);
  const auto c0 = GridDensity1D::sample(G, [](double x) { return std::exp(-(x - 2.0) * (x - 2.0) / 0.5); }).normalized(1.0);
  const auto pde = fokker_planck_solve(c0, PhysicalConstants::dimensionless(), V, T, 0.5 * G.h() * G.h() / 2.0, {1000000});
  std::string detail = "median W2:";
  double previous = kInfinity;
  bool decreasing = true;
  for (std::size_t n : {100, 1000, 10000}) {
    std::vector<double> d;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      // σσᵀ = kT·A with kT = A = 1.
      const ParticleEnsemble e{gaussian_positions(n, 2.0, 0.5, seed), Potential::quadratic(1.0), {}, identity_matrix(1),
                               identity_matrix(1), seed};
      d.push_back(w2_grid_1d(empirical_density(euler_maruyama(e, 1e-3, T).final_positions(), G), pde.states.back()));
    }
    std::sort(d.begin(), d.end());
    const double median = 0.5 * (d[4] + d[5]);
    decreasing = decreasing && median < previous;
    previous = median;
    detail += fmt(" %.4g", median);
  }
  return {decreasing, detail};
}

Outcome reversibility() {
  const auto report = validate_config(nlohmann::json{{"experiment", "reversibility"}});
  const auto out = execute(*report.config);
  const double prop = out.results["proportional_difference"].get<double>();
  const double non = out.results["nonproportional_difference"].get<double>();
  return {prop <= 1e-6 && non > 1e-3, fmt("proportional = %.3g, non-proportional = %.3g", prop, non)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "gradflow_acceptance_determinism";
  fs::remove_all(root);
  const std::vector<std::string> configs = {"entropy",    "transport", "jko",   "fokker_planck", "multicomponent",
                                            "allen_cahn", "particles", "ldp",   "reversibility"};
  std::size_t identical = 0;
  std::string differing;
  for (const auto& name : configs) {
    std::string csv[2];
    for (int run = 0; run < 2; ++run) {
      const fs::path out = root / (name + std::to_string(run));
      const std::string cmd = std::string("\"") + GRADFLOW_CLI + "\" run --config \"" + GRADFLOW_CONFIG_DIR + "/" + name +
                              ".json\" --out \"" + out.string() + "\" >/dev/null 2>&1";
      const int raw = std::system(cmd.c_str());
      if (!WIFEXITED(raw) || WEXITSTATUS(raw) != 0) csv[run] = "<exit " + std::to_string(raw) + ">" + std::to_string(run);
      else csv[run] = slurp(out / "result.csv");
    }
    if (csv[0] == csv[1] && !csv[0].empty())
      ++identical;
    else
      differing += " " + name;
  }
  fs::remove_all(root);
  return {identical == configs.size(),
          fmt("%g of %g experiment types byte-identical", identical, configs.size()) + differing};
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;  // 0: no limit
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "assignment_oracle", 10.0, assignment_oracle},
      {2, "dirac_w2_distance", 0.0, dirac_distance},
      {3, "entropy_suite", 0.0, entropy_suite},
      {4, "coin_ldp", 1.0, coin_ldp},
      {5, "sanov_varadhan", 30.0, sanov_varadhan},
      {6, "jko_heat_flow", 60.0, jko_heat},
      {7, "boltzmann_stationarity", 30.0, boltzmann_stationarity},
      {8, "edi_convergence", 0.0, edi_convergence},
      {9, "multicomponent", 0.0, multicomponent},
      {10, "phase_field", 0.0, phase_field},
      {11, "sde_to_pde", 300.0, sde_to_pde},
      {12, "reversibility", 0.0, reversibility},
      {13, "determinism", 0.0, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.limit_seconds == 0.0 || seconds < c.limit_seconds;
    const bool passed = o.passed && in_time;
    failures += !passed;
    std::printf("%s %2d %s: %s (%.2f s%s)\n", passed ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), seconds,
                in_time ? "" : ", over time limit");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
