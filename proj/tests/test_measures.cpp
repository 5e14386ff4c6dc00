#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "gradflow/measures.hpp"
#include "gradflow/measures_io.hpp"

using namespace gradflow;

namespace {

std::vector<double> random_probability(std::mt19937_64& gen, std::size_t d, bool allow_zero = false) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(d);
  double s = 0.0;
  for (double& v : w) {
    v = u(gen);
    if (allow_zero && u(gen) < 0.2) v = 0.0;
    s += v;
  }
  if (s == 0.0) {
    w[0] = 1.0;
    s = 1.0;
  }
  for (double& v : w) v /= s;
  return w;
}

// Independent evaluation of Σ μ log(μ/ν) in long double.
long double reference_entropy(const std::vector<double>& mu, const std::vector<double>& nu) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < mu.size(); ++i)
    if (mu[i] > 0.0) s += static_cast<long double>(mu[i]) * std::log(static_cast<long double>(mu[i]) / nu[i]);
  return s;
}

}  // namespace

TEST(RelativeEntropy, IdentityIsZero) {
  const auto mu = DiscreteMeasure::on_alphabet({0.5, 0.5});
  EXPECT_EQ(relative_entropy(mu, mu), 0.0);
}

TEST(RelativeEntropy, PointMassAgainstUniform) {
  EXPECT_NEAR(relative_entropy(DiscreteMeasure::on_alphabet({1.0, 0.0}), DiscreteMeasure::on_alphabet({0.5, 0.5})),
              std::log(2.0), 1e-15);
}

TEST(RelativeEntropy, InfiniteWithoutAbsoluteContinuity) {
  EXPECT_EQ(relative_entropy(DiscreteMeasure::on_alphabet({0.5, 0.5}), DiscreteMeasure::on_alphabet({1.0, 0.0})),
            std::numeric_limits<double>::infinity());
}

TEST(RelativeEntropy, MismatchedSupportIsArgumentError) {
  EXPECT_THROW(relative_entropy(DiscreteMeasure::on_alphabet({0.5, 0.5}), DiscreteMeasure::on_alphabet({0.2, 0.3, 0.5})),
               ArgumentError);
}

TEST(RelativeEntropy, MatchesExtendedPrecisionSum) {
  std::mt19937_64 gen(11);
  for (int t = 0; t < 200; ++t) {
    const auto mu = random_probability(gen, 6, true), nu = random_probability(gen, 6);
    EXPECT_NEAR(relative_entropy(DiscreteMeasure::on_alphabet(mu), DiscreteMeasure::on_alphabet(nu)),
                static_cast<double>(reference_entropy(mu, nu)), 1e-14);
  }
}

TEST(RelativeEntropy, GridDensitiesUseCellWidth) {
  const UniformGrid g(0.0, 2.0, 4);
  const GridDensity1D mu(g, {1.0, 0.0, 0.5, 0.5}), nu(g, {0.5, 0.5, 0.5, 0.5});
  EXPECT_NEAR(relative_entropy(mu, nu), 0.5 * std::log(2.0), 1e-15);
  EXPECT_EQ(relative_entropy(nu, mu), std::numeric_limits<double>::infinity());
}

TEST(EntGrid, UniformUnitDensityIsZero) {
  EXPECT_EQ(ent_grid(GridDensity1D(UniformGrid(0.0, 1.0, 10), std::vector<double>(10, 1.0))), 0.0);
}

TEST(EntGrid, UniformHalfDensity) {
  EXPECT_NEAR(ent_grid(GridDensity1D(UniformGrid(0.0, 2.0, 10), std::vector<double>(10, 0.5))), -std::log(2.0), 1e-15);
}

TEST(EntGrid, StandardNormalClosedForm) {
  const UniformGrid g(-8.0, 8.0, 800);
  const auto rho = GridDensity1D::sample(g, [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); });
  EXPECT_NEAR(ent_grid(rho), -0.5 * std::log(2.0 * M_PI) - 0.5, 1e-4);
}

TEST(EntGrid, InvariantUnderRefinementOfPiecewiseConstant) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int t = 0; t < 50; ++t) {
    const UniformGrid coarse(-1.0, 2.0, 17), fine(-1.0, 2.0, 34);
    std::vector<double> v(17), w(34);
    for (std::size_t i = 0; i < 17; ++i) w[2 * i] = w[2 * i + 1] = v[i] = u(gen);
    EXPECT_NEAR(ent_grid(GridDensity1D(coarse, v)), ent_grid(GridDensity1D(fine, w)), 1e-12);
  }
}

TEST(TotalVariation, Examples) {
  const auto a = DiscreteMeasure::on_alphabet({1.0, 0.0});
  EXPECT_EQ(total_variation(a, a), 0.0);
  EXPECT_NEAR(total_variation(a, DiscreteMeasure::on_alphabet({0.5, 0.5})), 0.5, 1e-15);
  EXPECT_NEAR(total_variation(DiscreteMeasure::on_alphabet({0.7, 0.3}), DiscreteMeasure::on_alphabet({0.3, 0.7})), 0.4,
              1e-15);
}

TEST(TotalVariation, UnequalMassIsArgumentError) {
  EXPECT_THROW(total_variation(DiscreteMeasure::on_alphabet({1.0, 0.0}), DiscreteMeasure::on_alphabet({0.5, 0.6})),
               ArgumentError);
}

TEST(EntropyProperties, ThousandRandomPairs) {
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<std::size_t> size(2, 7);
  int violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t d = size(gen);
    const auto mw = random_probability(gen, d, true), nw = random_probability(gen, d);
    const auto mu = DiscreteMeasure::on_alphabet(mw), nu = DiscreteMeasure::on_alphabet(nw);
    const double h = relative_entropy(mu, nu), tv = total_variation(mu, nu);
    if (!(h >= 0.0)) ++violations;
    if ((h == 0.0) != (mw == nw)) ++violations;
    if (relative_entropy(mu, mu) != 0.0) ++violations;
    if (2.0 * tv * tv > h + 1e-14) ++violations;

    // Injective relabelling: exact invariance.
    auto inject = [](const Point& x) { return Point{3.0 * x[0] - 7.0}; };
    if (relative_entropy(push_forward(mu, inject), push_forward(nu, inject)) != h) ++violations;

    // Random non-injective map onto fewer states: data processing.
    std::vector<double> image(d);
    std::uniform_int_distribution<int> target(0, static_cast<int>(d) / 2);
    for (double& y : image) y = target(gen);
    auto collapse = [&](const Point& x) { return Point{image[static_cast<std::size_t>(x[0])]}; };
    if (relative_entropy(push_forward(mu, collapse), push_forward(nu, collapse)) > h + 1e-14 * std::max(1.0, h))
      ++violations;
  }
  EXPECT_EQ(violations, 0);
}

TEST(PushForward, Examples) {
  const auto mu = DiscreteMeasure::on_alphabet({0.5, 0.5});
  EXPECT_EQ(push_forward(mu, [](const Point& x) { return x; }), mu);
  const auto shifted = push_forward(mu, [](const Point& x) { return Point{x[0] + 1.0}; });
  EXPECT_EQ(shifted.atoms(), (std::vector<Point>{{1.0}, {2.0}}));
  EXPECT_EQ(shifted.weights(), (std::vector<double>{0.5, 0.5}));
  const auto merged = push_forward(mu, [](const Point&) { return Point{0.0}; });
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_EQ(merged.weights()[0], 1.0);
}

TEST(EmpiricalMeasure, Examples) {
  const auto d0 = empirical_from_samples({{0.0}});
  EXPECT_EQ(d0.size(), 1u);
  EXPECT_EQ(d0.weights()[0], 1.0);
  const auto merged = empirical_from_samples({{0.0}, {0.0}});
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_EQ(merged.weights()[0], 1.0);
  const auto three = empirical_from_samples({{0.0}, {1.0}, {2.0}});
  for (double w : three.weights()) EXPECT_DOUBLE_EQ(w, 1.0 / 3.0);
  EXPECT_THROW(empirical_from_samples({}), ArgumentError);
}

TEST(SecondMoment, Examples) {
  EXPECT_EQ(second_moment(DiscreteMeasure({{0.0}}, {1.0})), 0.0);
  EXPECT_EQ(second_moment(DiscreteMeasure({{2.0}}, {1.0})), 4.0);
  EXPECT_NEAR(second_moment(GridDensity1D(UniformGrid(0.0, 1.0, 1000), std::vector<double>(1000, 1.0))), 1.0 / 3.0, 1e-6);
}

TEST(DiscreteMeasure, Invariants) {
  EXPECT_THROW(DiscreteMeasure({{0.0}}, {-1.0}), ArgumentError);
  EXPECT_THROW(DiscreteMeasure({{0.0}, {1.0}}, {1.0}), ArgumentError);
  EXPECT_THROW(DiscreteMeasure({{0.0}, {1.0, 2.0}}, {0.5, 0.5}), ArgumentError);
  EXPECT_DOUBLE_EQ(DiscreteMeasure({{0.0}, {1.0}}, {0.25, 0.5}).mass(), 0.75);
}

TEST(GridDensity1D, Invariants) {
  EXPECT_THROW(UniformGrid(0.0, 1.0, 1), ArgumentError);
  EXPECT_THROW(UniformGrid(1.0, 0.0, 4), ArgumentError);
  const UniformGrid g(0.0, 2.0, 4);
  EXPECT_THROW(GridDensity1D(g, {1.0, -0.1, 1.0, 1.0}), ArgumentError);
  EXPECT_THROW(GridDensity1D(g, {1.0, 1.0}), ArgumentError);
  EXPECT_DOUBLE_EQ(GridDensity1D(g, {1.0, 2.0, 3.0, 4.0}).mass(), 5.0);
}

TEST(PhysicalConstants, Invariants) {
  PhysicalConstants si;
  EXPECT_NO_THROW(si.validate());
  PhysicalConstants bad = si;
  bad.R = 8.0;
  EXPECT_THROW(bad.validate(), ArgumentError);
  bad = si;
  bad.T = 0.0;
  EXPECT_THROW(bad.validate(), ArgumentError);
  EXPECT_NO_THROW(PhysicalConstants::dimensionless().validate());
}

TEST(MeasuresCsv, DiscreteRoundTrip) {
  const DiscreteMeasure mu({{0.1, -2.0}, {1.0 / 3.0, 5e-300}}, {0.25, 0.75});
  std::stringstream ss;
  write_csv(ss, mu);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "x,y,weight");
  EXPECT_EQ(read_discrete_measure_csv(ss), mu);
}

TEST(MeasuresCsv, GridRoundTrip) {
  const auto rho = GridDensity1D::sample(UniformGrid(-1.0, 3.0, 7), [](double x) { return std::exp(-x * x); });
  std::stringstream ss;
  write_csv(ss, rho);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "cell_center,value");
  const auto back = read_grid_density_csv(ss);
  EXPECT_EQ(back.values(), rho.values());
  EXPECT_NEAR(back.grid().a, rho.grid().a, 1e-15);
  EXPECT_NEAR(back.grid().b, rho.grid().b, 1e-15);
}

TEST(MeasuresCsv, MissingHeaderRejected) {
  std::stringstream ss("0.5,1\n");
  EXPECT_THROW(read_discrete_measure_csv(ss), Error);
}
