#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "coherelab/error.hpp"
#include "coherelab/stats.hpp"
#include "oracle.hpp"

using namespace coherelab;
using namespace coherelab::stats;
using coherelab::testing::oracle_r;
using coherelab::testing::oracle_t_p;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

// r-to-series: n points with sample correlation exactly r (up to rounding).
PairedSeries series_with_r(double r, std::size_t n) {
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    b[i] = std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = r * a[i] + std::sqrt(1 - r * r) * b[i];
  return PairedSeries(a, y);
}

}  // namespace

TEST(PearsonR, PerfectAndAnti) {
  EXPECT_EQ(pearson_r(PairedSeries({1, 2, 3}, {1, 2, 3})), 1.0);
  EXPECT_EQ(pearson_r(PairedSeries({1, 2, 3}, {-1, -2, -3})), -1.0);
}

TEST(PearsonR, FiveValueExample) {
  // cov 10/4, var 10/4 and 37/4: r = 10 / sqrt(148)
  const double r = pearson_r(PairedSeries({1, 2, 3, 4, 5}, {2, 1, 4, 3, 6}));
  EXPECT_NEAR(r, 0.8219949365267865, 1e-15);
  EXPECT_NEAR(r, 10.0 / std::sqrt(148.0), 1e-15);
}

TEST(PearsonR, Errors) {
  EXPECT_EQ(code_of([] { pearson_r(PairedSeries({1}, {2})); }), ErrorCode::TooShort);
  EXPECT_EQ(code_of([] { pearson_r(PairedSeries({1, 1, 1}, {1, 2, 3})); }), ErrorCode::ZeroVariance);
  EXPECT_EQ(code_of([] { pearson_r(PairedSeries({1, 2, 3}, {4, 4, 4})); }), ErrorCode::ZeroVariance);
  EXPECT_EQ(code_of([] { PairedSeries({1, 2}, {1}); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { PairedSeries({1, NAN}, {1, 2}); }), ErrorCode::InvalidArgument);
}

TEST(PearsonR, AffineInvarianceProperty) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 3 + gen() % 100;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = normal(gen);
      y[i] = 0.5 * x[i] + normal(gen);
    }
    const double r = pearson_r(PairedSeries(x, y));
    const double a = scale(gen), b = normal(gen) * 10;
    std::vector<double> ax(n), neg(n);
    for (std::size_t i = 0; i < n; ++i) {
      ax[i] = a * x[i] + b;
      neg[i] = -x[i];
    }
    EXPECT_NEAR(pearson_r(PairedSeries(ax, y)), r, 1e-10);
    EXPECT_NEAR(pearson_r(PairedSeries(x, ax)), pearson_r(PairedSeries(x, x)), 1e-10);
    EXPECT_NEAR(pearson_r(PairedSeries(neg, y)), -r, 1e-10);
  }
}

TEST(IncompleteBeta, KnownValues) {
  EXPECT_EQ(regularized_incomplete_beta(2, 3, 0.0), 0.0);
  EXPECT_EQ(regularized_incomplete_beta(2, 3, 1.0), 1.0);
  // I_x(1, 1) = x; I_x(a, 1) = x^a
  EXPECT_NEAR(regularized_incomplete_beta(1, 1, 0.3), 0.3, 1e-14);
  EXPECT_NEAR(regularized_incomplete_beta(2.5, 1, 0.4), std::pow(0.4, 2.5), 1e-14);
  // symmetry I_x(a, b) = 1 - I_{1-x}(b, a)
  EXPECT_NEAR(regularized_incomplete_beta(3.5, 0.5, 0.8), 1 - regularized_incomplete_beta(0.5, 3.5, 0.2), 1e-14);
}

TEST(TwoTailedP, Examples) {
  EXPECT_EQ(t_two_tailed_p(0.0, 7), 1.0);
  EXPECT_NEAR(t_two_tailed_p(1.0, 1), 0.5, 1e-14);
  EXPECT_NEAR(t_two_tailed_p(-1.0, 1), 0.5, 1e-14);
  // df = 2 closed form: p = 1 - t / sqrt(2 + t^2)
  EXPECT_NEAR(t_two_tailed_p(1.7, 2), 1 - 1.7 / std::sqrt(2 + 1.7 * 1.7), 1e-14);
  EXPECT_NEAR(t_two_tailed_p(2.5, 10), 0.031446844236608776, 1e-12);
}

TEST(TwoTailedP, MatchesNumericIntegration) {
  for (double df : {1.0, 2.0, 3.0, 7.0, 10.0, 28.0, 178.0, 498.0}) {
    for (double t : {0.05, 0.5, 1.0, 1.96, 2.5, 4.0, 8.0, 20.0}) {
      EXPECT_NEAR(t_two_tailed_p(t, static_cast<std::size_t>(df)), oracle_t_p(t, df), 1e-10)
          << "t=" << t << " df=" << df;
    }
  }
}

TEST(PearsonWithP, PerfectFitHasZeroP) {
  const auto res = pearson_with_p(PairedSeries({1, 2, 3, 4, 5}, {1, 2, 3, 4, 5}));
  EXPECT_EQ(res.r, 1.0);
  EXPECT_EQ(res.p_value, 0.0);
  EXPECT_EQ(res.n, 5u);
  EXPECT_TRUE(res.significant);
}

TEST(PearsonWithP, NeedsThreePoints) {
  EXPECT_EQ(code_of([] { pearson_with_p(PairedSeries({1, 2}, {2, 1})); }), ErrorCode::TooShort);
}

TEST(PearsonWithP, PublishedPairsAreConsistent) {
  const auto session = pearson_with_p(series_with_r(0.29, 180));
  EXPECT_NEAR(session.r, 0.29, 1e-12);
  EXPECT_GE(session.p_value, 1e-5);
  EXPECT_LE(session.p_value, 1e-3);
  EXPECT_NEAR(session.p_value, 7.8527e-05, 5e-9);

  const auto client = pearson_with_p(series_with_r(0.67, 9));
  EXPECT_NEAR(client.r, 0.67, 1e-12);
  EXPECT_GE(client.p_value, 0.03);
  EXPECT_LE(client.p_value, 0.07);
  EXPECT_NEAR(client.p_value, 0.04832, 1e-5);
  EXPECT_TRUE(client.significant);
}

TEST(PearsonWithP, FuzzedAgainstOracle) {
  std::mt19937_64 gen(17);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> mix(-1.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 3 + gen() % 498;
    const double w = mix(gen);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = normal(gen) * 3 + 1;
      y[i] = w * x[i] + normal(gen);
    }
    const auto res = pearson_with_p(PairedSeries(x, y));
    const double r = oracle_r(x, y);
    ASSERT_NEAR(res.r, r, 1e-10);
    const double df = static_cast<double>(n - 2);
    const double t = r * std::sqrt(df / (1 - r * r));
    ASSERT_NEAR(res.p_value, oracle_t_p(t, df), 1e-9) << "n=" << n << " r=" << r;
    EXPECT_EQ(res.significant, res.p_value < 0.05);
  }
}

TEST(Mean, Examples) {
  const std::vector<double> one{5};
  const std::vector<double> three{1, 2, 3};
  EXPECT_EQ(mean(one), 5.0);
  EXPECT_EQ(mean(three), 2.0);
  EXPECT_EQ(code_of([] { mean(std::span<const double>{}); }), ErrorCode::EmptyInput);
}

TEST(Mean, PermutationInvariantExactly) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + gen() % 200);
    for (double& x : v) x = u(gen) * std::pow(10.0, static_cast<double>(gen() % 12) - 6);
    const double m = mean(v);
    std::shuffle(v.begin(), v.end(), gen);
    EXPECT_EQ(mean(v), m);
  }
}
