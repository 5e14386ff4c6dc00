#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gradflow/models.hpp"
#include "gradflow/particles.hpp"
#include "gradflow/transport.hpp"

using namespace gradflow;

namespace {

ParticleEnsemble free_ensemble(std::size_t n, std::uint64_t seed) {
  return {std::vector<Point>(n, Point{0.0}), {}, {}, identity_matrix(1), identity_matrix(1), seed};
}

double sample_variance(const std::vector<Point>& x) {
  double m = 0.0, s = 0.0;
  for (const auto& p : x) m += p[0];
  m /= static_cast<double>(x.size());
  for (const auto& p : x) s += (p[0] - m) * (p[0] - m);
  return s / static_cast<double>(x.size() - 1);
}

}  // namespace

TEST(CounterRng, CountersAreIndependentOfCallOrder) {
  const CounterRng rng(42, 1);
  const double a = rng.normal(7), b = rng.normal(3);
  EXPECT_EQ(rng.normal(3), b);
  EXPECT_EQ(rng.normal(7), a);
  EXPECT_NE(CounterRng(42, 2).normal(7), a);
  EXPECT_NE(CounterRng(43, 1).normal(7), a);
}

TEST(CounterRng, MomentsOfNormalAndUniform) {
  const CounterRng rng(5, 0);
  const std::size_t n = 200000;
  double s1 = 0.0, s2 = 0.0, umin = 1.0, umax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = rng.normal(i);
    s1 += z;
    s2 += z * z;
    const double u = rng.uniform(i);
    umin = std::min(umin, u);
    umax = std::max(umax, u);
  }
  EXPECT_NEAR(s1 / n, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 5.0 * std::sqrt(2.0 / n));
  EXPECT_GT(umin, 0.0);
  EXPECT_LE(umax, 1.0);
}

TEST(EulerMaruyama, SeededDeterminism) {
  ParticleEnsemble e{gaussian_positions(50, 0.0, 1.0, 9), Potential::quadratic(1.0),
                     Potential::scalar([](double x) { return std::exp(-x * x); },
                                       [](double x) { return -2.0 * x * std::exp(-x * x); }),
                     identity_matrix(1), identity_matrix(1, 0.7), 9};
  const auto a = euler_maruyama(e, 1e-2, 0.5, {10});
  const auto b = euler_maruyama(e, 1e-2, 0.5, {10});
  EXPECT_EQ(a.snapshots, b.snapshots);
  EXPECT_EQ(a.times, b.times);
  ASSERT_EQ(a.snapshots.size(), 6u);
  e.seed = 10;
  EXPECT_NE(euler_maruyama(e, 1e-2, 0.5).final_positions(), a.final_positions());
}

TEST(EulerMaruyama, NoiselessQuadraticDecay) {
  const double k = 2.0, x0 = 1.5, T = 1.0;
  double previous = 0.0;
  for (double dt : {2e-3, 1e-3, 5e-4}) {
    const ParticleEnsemble e{{Point{x0}}, Potential::quadratic(k), {}, identity_matrix(1), identity_matrix(1, 0.0), 1};
    const double err = std::abs(euler_maruyama(e, dt, T).final_positions()[0][0] - x0 * std::exp(-k * T));
    EXPECT_LT(err, dt);
    if (previous > 0.0) {
      EXPECT_NEAR(previous / err, 2.0, 0.1);
    }
    previous = err;
  }
}

TEST(EulerMaruyama, BrownianVarianceIsTwiceTime) {
  const std::size_t n = 10000;
  const double T = 1.0;
  const auto tr = euler_maruyama(free_ensemble(n, 77), 1e-2, T);
  EXPECT_NEAR(sample_variance(tr.final_positions()), 2.0 * T, 2.0 * T * 5.0 / std::sqrt(static_cast<double>(n)));
}

TEST(EulerMaruyama, SingleParticleLawIsBoltzmann) {
  // Independent copies of an n = 1 system in a double well, with σσᵀ = kT·A.
  const double kt = 0.5, a = 1.0;
  const auto V = [](double x) { return 0.25 * x * x * x * x - 0.5 * x * x; };
  const auto dV = [](double x) { return x * x * x - x; };
  const std::size_t copies = 4000;
  std::vector<Point> finals;
  for (std::size_t c = 0; c < copies; ++c) {
    const ParticleEnsemble e{{Point{1.0}}, Potential::scalar(V, dV), {}, identity_matrix(1, a),
                             identity_matrix(1, std::sqrt(kt * a)), 1000 + c};
    finals.push_back(euler_maruyama(e, 2e-3, 8.0).final_positions()[0]);
  }
  const UniformGrid bins(-2.5, 2.5, 20);
  std::vector<double> expected(bins.cells, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < bins.cells; ++i) {
    for (int q = 0; q < 200; ++q) {
      const double x = bins.a + bins.h() * (i + (q + 0.5) / 200.0);
      expected[i] += std::exp(-V(x) / kt);
    }
    z += expected[i];
  }
  std::vector<double> observed(bins.cells, 0.0);
  for (const auto& p : finals) {
    ASSERT_TRUE(p[0] > bins.a && p[0] < bins.b);
    observed[static_cast<std::size_t>((p[0] - bins.a) / bins.h())] += 1.0;
  }
  double chi2 = 0.0;
  for (std::size_t i = 0; i < bins.cells; ++i) {
    const double e = copies * expected[i] / z;
    if (e >= 5.0) chi2 += (observed[i] - e) * (observed[i] - e) / e;
  }
  // 99.9% quantile of χ² with at most 19 degrees of freedom.
  EXPECT_LT(chi2, 43.8);
}

TEST(EulerMaruyama, BlowUpReportsStep) {
  const ParticleEnsemble e{{Point{10.0}},
                           Potential::scalar([](double x) { return std::pow(x, 6.0); },
                                             [](double x) { return 6.0 * std::pow(x, 5.0); }),
                           {},
                           identity_matrix(1),
                           identity_matrix(1, 0.0),
                           1};
  try {
    euler_maruyama(e, 1.0, 10.0);
    FAIL() << "expected a blow-up";
  } catch (const BlowUpError& err) {
    EXPECT_GE(err.step(), 1u);
    EXPECT_LE(err.step(), 10u);
  }
}

TEST(EulerMaruyama, Errors) {
  auto e = free_ensemble(3, 1);
  EXPECT_THROW(euler_maruyama(e, 0.0, 1.0), ArgumentError);
  EXPECT_THROW(euler_maruyama(e, 1e-2, -1.0), ArgumentError);
  e.A = {{-1.0}};
  EXPECT_THROW(e.validate(), ArgumentError);
  ParticleEnsemble two{{Point{0.0, 0.0}}, {}, {}, {{1.0, 0.5}, {0.4, 1.0}}, identity_matrix(2), 1};
  EXPECT_THROW(two.validate(), ArgumentError);
  two.A = {{1.0, 2.0}, {2.0, 1.0}};
  EXPECT_THROW(two.validate(), ArgumentError);
  two.A = {{1.0, 1.0}, {1.0, 1.0}};
  EXPECT_NO_THROW(two.validate());
  two.sigma = identity_matrix(1);
  EXPECT_THROW(two.validate(), ArgumentError);
  EXPECT_THROW((ParticleEnsemble{{}, {}, {}, identity_matrix(1), identity_matrix(1), 1}.validate()), ArgumentError);
}

TEST(EulerMaruyama, TwoDimensionalCorrelatedNoise) {
  ParticleEnsemble e{std::vector<Point>(20000, Point{0.0, 0.0}), {}, {}, identity_matrix(2), {{1.0, 0.0}, {1.0, 1.0}}, 3};
  const auto x = euler_maruyama(e, 0.1, 0.5).final_positions();
  double cxx = 0.0, cxy = 0.0, cyy = 0.0;
  for (const auto& p : x) {
    cxx += p[0] * p[0];
    cxy += p[0] * p[1];
    cyy += p[1] * p[1];
  }
  const double n = static_cast<double>(x.size());
  // Covariance 2T·σσᵀ = [[1, 1], [1, 2]].
  EXPECT_NEAR(cxx / n, 1.0, 0.05);
  EXPECT_NEAR(cxy / n, 1.0, 0.05);
  EXPECT_NEAR(cyy / n, 2.0, 0.1);
}

TEST(EnsembleMetadata, Fields) {
  const auto e = free_ensemble(4, 12);
  const auto j = ensemble_metadata(e, 1e-3, 2.0);
  EXPECT_EQ(j["seed"], 12u);
  EXPECT_EQ(j["n"], 4u);
  EXPECT_EQ(j["dt"], 1e-3);
  EXPECT_EQ(j["T"], 2.0);
  EXPECT_EQ(j["generator_version"], kGeneratorVersion);
  EXPECT_EQ(j["A"], nlohmann::json::parse("[[1.0]]"));
}

TEST(EmpiricalDensity, SpikeAtOneCell) {
  const UniformGrid g(0.0, 2.0, 8);
  const auto rho = empirical_density(std::vector<Point>(5, Point{g.center(3)}), g);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_DOUBLE_EQ(rho[i], i == 3 ? 1.0 / g.h() : 0.0);
}

TEST(EmpiricalDensity, UniformConcentration) {
  const UniformGrid g(0.0, 1.0, 50);
  const std::size_t n = 100000;
  const CounterRng rng(8, 0);
  std::vector<Point> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = {rng.uniform(i)};
  const auto rho = empirical_density(x, g);
  double worst = 0.0;
  for (double v : rho.values()) worst = std::max(worst, std::abs(v - 1.0));
  EXPECT_LE(worst, 5.0 * std::sqrt(std::log(static_cast<double>(n)) / (n * g.h())));
  EXPECT_NEAR(rho.mass(), 1.0, 1e-12);
}

TEST(EmpiricalDensity, MassIsOneAndLossIsBounded) {
  const UniformGrid g(-1.0, 1.0, 10);
  const auto x = gaussian_positions(3000, 0.0, 0.25, 4);
  EXPECT_NEAR(empirical_density(x, g).mass(), 1.0, 1e-12);

  std::vector<Point> few_out(2000, Point{0.1});
  few_out[0] = {5.0};  // 0.05% outside
  EXPECT_NEAR(empirical_density(few_out, g).mass(), 1.0, 1e-12);
  few_out[1] = {-5.0};
  few_out[2] = {7.0};  // 0.15% outside
  EXPECT_THROW(empirical_density(few_out, g), ConsistencyError);
  EXPECT_THROW(empirical_density({}, g), ArgumentError);
  EXPECT_THROW(empirical_density({Point{0.0, 1.0}}, g), ArgumentError);
}

TEST(SdeToPde, EmpiricalApproachesFokkerPlanck) {
  // σσᵀ = kT·A with A = 1, kT = 1: the PDE is ċ = Δc + div(c∇V).
  const UniformGrid G(-6.0, 6.0, 240);
  std::vector<double> V;
  for (double x : G.centers()) V.push_back(0.5 * x * x);
  const auto c0 = GridDensity1D::sample(G, [](double x) { return std::exp(-(x - 2.0) * (x - 2.0) / 0.5); }).normalized(1.0);
  const auto pde = fokker_planck_solve(c0, PhysicalConstants::dimensionless(), V, 0.5, 0.5 * G.h() * G.h() / 2.0, {1000000});
  double previous = 1e9;
  for (std::size_t n : {100, 1000}) {
    std::vector<double> d;
    for (std::uint64_t s = 0; s < 5; ++s) {
      const ParticleEnsemble e{gaussian_positions(n, 2.0, 0.5, s), Potential::quadratic(1.0), {}, identity_matrix(1),
                               identity_matrix(1), s};
      d.push_back(w2_grid_1d(empirical_density(euler_maruyama(e, 1e-3, 0.5).final_positions(), G), pde.states.back()));
    }
    std::sort(d.begin(), d.end());
    EXPECT_LT(d[2], previous) << "n = " << n;
    previous = d[2];
  }
}
