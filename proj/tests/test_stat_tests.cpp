#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "ctrlz/stat_tests.hpp"
#include "oracles.hpp"

using namespace ctrlz;

namespace {

// Values on a coarse grid so exact ties are frequent.
std::vector<double> tied_sample(std::mt19937_64& gen, std::size_t n) {
  std::uniform_int_distribution<int> grid(-12, 12);
  std::vector<double> v(n);
  for (auto& x : v) x = grid(gen) * 0.5;
  return v;
}

std::vector<double> continuous_sample(std::mt19937_64& gen, std::size_t n, double mu, double sd) {
  std::normal_distribution<double> d(mu, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = d(gen);
  return v;
}

double rho(std::vector<double> a, std::vector<double> b) {
  return rho_statistic(RewardSamples(std::move(a)), RewardSamples(std::move(b))).value();
}

}  // namespace

TEST(RewardSamples, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(RewardSamples(std::vector<double>{}), InvalidInput);
  EXPECT_THROW(RewardSamples({1.0, NAN}), InvalidInput);
  EXPECT_THROW(RewardSamples({INFINITY}), InvalidInput);
  EXPECT_NO_THROW(RewardSamples({-1e300, 1e300}));
}

TEST(ImprovementScore, RejectsOutOfRange) {
  EXPECT_THROW(ImprovementScore(-0.1), InvalidInput);
  EXPECT_THROW(ImprovementScore(1.5), InvalidInput);
  EXPECT_THROW(ImprovementScore(NAN), InvalidInput);
}

TEST(RhoStatistic, Examples) {
  EXPECT_EQ(rho({3, 4, 5}, {0, 1, 2}), 1.0);
  EXPECT_EQ(rho({1, 1}, {1, 1}), 0.0);
  EXPECT_EQ(rho({2, 0}, {1, 3}), 0.25);
}

TEST(RhoStatistic, UnequalSizesUseProductDenominator) {
  // 3 of 6 pairs: (2>1), (4>1), (4>3)
  EXPECT_EQ(rho({2, 4}, {1, 3, 5}), 0.5);
}

TEST(RhoStatistic, MatchesBruteForceWithTies) {
  std::mt19937_64 gen(11);
  std::uniform_int_distribution<std::size_t> size(1, 20);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto a = tied_sample(gen, size(gen));
    const auto b = tied_sample(gen, size(gen));
    ASSERT_EQ(rho(a, b), oracle::brute_force_rho(a, b));
  }
}

TEST(RhoStatistic, BoundedAndComplementaryWithoutTies) {
  std::mt19937_64 gen(12);
  std::uniform_int_distribution<std::size_t> size(1, 20);
  for (int trial = 0; trial < 500; ++trial) {
    const auto a = continuous_sample(gen, size(gen), 0.0, 1.0);
    const auto b = continuous_sample(gen, size(gen), 0.3, 2.0);
    const double ab = rho(a, b), ba = rho(b, a);
    ASSERT_GE(ab, 0.0);
    ASSERT_LE(ab, 1.0);
    ASSERT_DOUBLE_EQ(ab + ba, 1.0);
  }
}

TEST(RhoStatistic, InvariantUnderStrictlyIncreasingTransforms) {
  std::mt19937_64 gen(13);
  std::uniform_int_distribution<std::size_t> size(1, 20);
  const auto apply = [](std::vector<double> v, auto g) {
    for (auto& x : v) x = g(x);
    return v;
  };
  for (int trial = 0; trial < 300; ++trial) {
    const auto a = tied_sample(gen, size(gen));
    const auto b = tied_sample(gen, size(gen));
    const double base = rho(a, b);
    ASSERT_EQ(rho(apply(a, [](double x) { return 3.5 * x - 7.0; }), apply(b, [](double x) { return 3.5 * x - 7.0; })),
              base);
    ASSERT_EQ(rho(apply(a, [](double x) { return std::exp(x); }), apply(b, [](double x) { return std::exp(x); })),
              base);
    ASSERT_EQ(rho(apply(a, [](double x) { return x * x * x; }), apply(b, [](double x) { return x * x * x; })), base);
  }
}

TEST(Comparators, PermutationInvariant) {
  std::mt19937_64 gen(14);
  for (int trial = 0; trial < 200; ++trial) {
    auto a = continuous_sample(gen, 13, 1.0, 3.0);
    auto b = tied_sample(gen, 9);
    const RewardSamples ra(a), rb(b);
    std::shuffle(a.begin(), a.end(), gen);
    std::shuffle(b.begin(), b.end(), gen);
    const RewardSamples sa(a), sb(b);
    for (auto c : {Comparator::mann_whitney, Comparator::empirical, Comparator::gaussian, Comparator::mean}) {
      ASSERT_EQ(compare(c, ra, rb).value(), compare(c, sa, sb).value()) << to_string(c);
    }
  }
}

TEST(EmpiricalSuperiority, Examples) {
  EXPECT_EQ(empirical_superiority({3, 4, 5}, {0, 1, 2}).value(), 1.0);
  EXPECT_EQ(empirical_superiority({2, 0}, {1, 3}).value(), 0.25);
  EXPECT_EQ(empirical_superiority({1}, {1}).value(), 0.0);
}

TEST(EmpiricalSuperiority, EqualsRhoEverywhere) {
  std::mt19937_64 gen(15);
  std::uniform_int_distribution<std::size_t> size(1, 20);
  for (int trial = 0; trial < 2000; ++trial) {
    const RewardSamples a(tied_sample(gen, size(gen)));
    const RewardSamples b(tied_sample(gen, size(gen)));
    ASSERT_EQ(empirical_superiority(a, b).value(), rho_statistic(a, b).value());
  }
}

TEST(NormalCdf, MatchesQuadrature) {
  for (double x : {-6.0, -3.0, -1.5, -0.2, 0.0, 0.7, 1.0, 2.5, 5.0}) {
    EXPECT_NEAR(normal_cdf(x), oracle::normal_cdf_quadrature(x), 1e-7) << x;
  }
}

TEST(GaussianSuperiority, Examples) {
  // Equal means, equal nonzero spread.
  EXPECT_NEAR(gaussian_superiority({1, 3}, {0, 4}).value(), 0.5, 1e-12);
  // μ = 1, σ² = 0.5 + 0.5.
  const double r = std::sqrt(0.5);
  const double p = gaussian_superiority({1 - r, 1 + r}, {-r, r}).value();
  EXPECT_NEAR(p, 0.841344746069, 1e-6);  // Simpson quadrature of the density up to 1
  EXPECT_NEAR(p, oracle::normal_cdf_quadrature(1.0), 1e-6);
  EXPECT_EQ(gaussian_superiority({5, 5, 5}, {1, 1, 1}).value(), 1.0);
}

TEST(GaussianSuperiority, DegenerateSpread) {
  EXPECT_EQ(gaussian_superiority({1, 1}, {5}).value(), 0.0);
  EXPECT_EQ(gaussian_superiority({2, 2}, {2, 2, 2}).value(), 0.5);
}

TEST(GaussianSuperiority, SwapSumsToOne) {
  std::mt19937_64 gen(16);
  for (int trial = 0; trial < 500; ++trial) {
    const RewardSamples a(continuous_sample(gen, 20, 0.0, 1.0));
    const RewardSamples b(continuous_sample(gen, 20, 0.5, 2.0));
    ASSERT_NEAR(gaussian_superiority(a, b).value() + gaussian_superiority(b, a).value(), 1.0, 1e-12);
  }
}

TEST(GaussianSuperiority, MatchesMonteCarlo) {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = continuous_sample(gen, 20, 0.0, 1.0);
    const auto b = continuous_sample(gen, 20, 0.4, 1.5);
    const double mc = oracle::monte_carlo_superiority(a, b, 1'000'000, 100 + trial);
    EXPECT_NEAR(gaussian_superiority(RewardSamples(a), RewardSamples(b)).value(), mc, 0.005);
  }
}

TEST(MeanSuperiority, Examples) {
  EXPECT_EQ(mean_superiority({10, 10}, {1, 1}).value(), 1.0);
  EXPECT_EQ(mean_superiority({1, 1}, {10, 10}).value(), 0.0);
  EXPECT_EQ(mean_superiority({0, 2}, {1, 1}).value(), 1.0);
}

TEST(GaussianFit, Examples) {
  auto f = gaussian_fit({1, 1, 1});
  EXPECT_EQ(f.mean, 1.0);
  EXPECT_EQ(f.std_dev, 0.0);
  f = gaussian_fit({0, 2});
  EXPECT_EQ(f.mean, 1.0);
  EXPECT_EQ(f.std_dev, 1.0);
  f = gaussian_fit({-3, 3});
  EXPECT_EQ(f.mean, 0.0);
  EXPECT_EQ(f.std_dev, 3.0);
}

TEST(GaussianFit, MatchesPopulationMoments) {
  std::mt19937_64 gen(18);
  const auto v = continuous_sample(gen, 37, 4.0, 2.0);
  const auto f = gaussian_fit(RewardSamples(v));
  EXPECT_NEAR(f.mean, oracle::mean(v), 1e-12);
  EXPECT_NEAR(f.std_dev, std::sqrt(oracle::population_variance(v)), 1e-12);
}

TEST(ComparatorNames, RoundTrip) {
  for (auto c : {Comparator::mann_whitney, Comparator::empirical, Comparator::gaussian, Comparator::mean}) {
    EXPECT_EQ(parse_comparator(to_string(c)), c);
  }
  EXPECT_FALSE(parse_comparator("t_test").has_value());
}
