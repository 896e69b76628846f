// Copyright 2026 The cbexp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cbexp/estimators.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.h"

namespace cbexp {
namespace {

template <typename Fn>
ErrorCode CodeOf(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no cbexp::Error thrown";
  return ErrorCode::kIo;
}

// Phi(x) = 1/2 + phi(x) * sum_n x^(2n+1) / (1*3*...*(2n+1)), summed in long
// double. Converges for all x; fine for |x| < 6.
double SeriesNormalCdf(double xd) {
  const long double x = xd;
  long double term = x;
  long double sum = x;
  for (int n = 1; n < 400; ++n) {
    term *= x * x / (2 * n + 1);
    sum += term;
  }
  const long double pi = 3.141592653589793238462643383279502884L;
  return static_cast<double>(0.5L + std::exp(-x * x / 2) / std::sqrt(2 * pi) * sum);
}

HTEstimate Est(double tau) {
  HTEstimate e;
  e.tau_hat = tau;
  return e;
}

VarianceEstimate Var(double sigma) {
  VarianceEstimate v;
  v.sigma_hat = sigma;
  return v;
}

TEST(HtEstimateTest, SingletonExample) {
  const std::vector<int> labels = {0, 1};
  const std::vector<double> y = {1, 0};
  const auto e = HtEstimate(y, Assignment({1, 0}), Clustering::FromLabels(labels));
  EXPECT_DOUBLE_EQ(e.tau_hat, 1.0);
  EXPECT_EQ(e.m_treated, 1u);
  EXPECT_EQ(e.m_control, 1u);
}

TEST(HtEstimateTest, PairedClustersExample) {
  const std::vector<int> labels = {0, 0, 1, 1};
  const std::vector<double> y = {1, 2, 3, 4};
  const auto e = HtEstimate(y, Assignment({1, 0}), Clustering::FromLabels(labels));
  EXPECT_DOUBLE_EQ(e.tau_hat, -2.0);
}

TEST(HtEstimateTest, ConstantOutcomesGiveZero) {
  const std::vector<int> labels = {0, 0, 1, 1, 2, 2, 3, 3};
  const std::vector<double> y(8, 3.5);
  const auto e = HtEstimate(y, Assignment({1, 0, 1, 0}), Clustering::FromLabels(labels));
  EXPECT_DOUBLE_EQ(e.tau_hat, 0.0);
}

TEST(HtEstimateTest, UndefinedWhenOneBucketIsEmpty) {
  const std::vector<int> labels = {0, 1};
  const std::vector<double> y = {1, 0};
  const Clustering c = Clustering::FromLabels(labels);
  EXPECT_EQ(CodeOf([&] { HtEstimate(y, Assignment({1, 1}), c); }),
            ErrorCode::kUndefinedEstimator);
  EXPECT_EQ(CodeOf([&] { HtEstimate(y, Assignment({0, 0}), c); }),
            ErrorCode::kUndefinedEstimator);
}

TEST(HtEstimateTest, DimensionMismatch) {
  const std::vector<int> labels = {0, 1};
  const std::vector<double> y = {1, 0, 2};
  EXPECT_EQ(CodeOf([&] { HtEstimate(y, Assignment({1, 0}), Clustering::FromLabels(labels)); }),
            ErrorCode::kDimensionMismatch);
}

TEST(HtEstimateTest, MatchesOracleAndIsLinear) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 5 + trial % 20;
    const std::size_t m = 2 + trial % 4;
    const auto labels = testing::RandomLabels(n, m, rng);
    const Clustering c = Clustering::FromLabels(labels);
    std::vector<int> zc(m, 0);
    for (std::size_t j = 0; j < m / 2; ++j) zc[j] = 1;
    std::shuffle(zc.begin(), zc.end(), rng);
    std::vector<double> y1(n), y2(n), mix(n);
    const double a = normal(rng);
    const double b = normal(rng);
    for (std::size_t i = 0; i < n; ++i) {
      y1[i] = normal(rng);
      y2[i] = normal(rng);
      mix[i] = a * y1[i] + b * y2[i];
    }
    // The oracle indexes clusters by raw label; FromLabels keeps label order.
    const Assignment z = testing::ClusterVector(zc);
    const double t1 = HtEstimate(y1, z, c).tau_hat;
    EXPECT_NEAR(t1, testing::HtOracle(y1, labels, zc), 1e-12);
    const double t2 = HtEstimate(y2, z, c).tau_hat;
    EXPECT_NEAR(HtEstimate(mix, z, c).tau_hat, a * t1 + b * t2, 1e-10);
  }
}

TEST(NeymannVarianceTest, HandExample) {
  // Singletons with treated totals {2,4} and control totals {1,3}.
  const std::vector<int> labels = {0, 1, 2, 3};
  const std::vector<double> y = {2, 1, 4, 3};
  const auto v = NeymannVariance(y, Assignment({1, 0, 1, 0}), Clustering::FromLabels(labels));
  EXPECT_DOUBLE_EQ(v.s_treated, 2.0);
  EXPECT_DOUBLE_EQ(v.s_control, 2.0);
  EXPECT_DOUBLE_EQ(v.sigma_hat, 2.0);
}

TEST(NeymannVarianceTest, EqualTotalsGiveZero) {
  const std::vector<int> labels = {0, 0, 1, 1, 2, 2, 3, 3};
  const std::vector<double> y = {1, 2, 0, 3, 5, 5, 4, 6};
  const auto v = NeymannVariance(y, Assignment({1, 1, 0, 0}), Clustering::FromLabels(labels));
  EXPECT_DOUBLE_EQ(v.sigma_hat, 0.0);
}

TEST(NeymannVarianceTest, NeedsTwoClustersPerBucket) {
  const std::vector<int> labels = {0, 1, 2};
  const std::vector<double> y = {1, 2, 3};
  EXPECT_EQ(CodeOf([&] {
              NeymannVariance(y, Assignment({1, 0, 0}), Clustering::FromLabels(labels));
            }),
            ErrorCode::kInsufficientReplication);
}

TEST(NeymannVarianceTest, ScalesQuadratically) {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 12;
    const auto labels = testing::RandomLabels(n, 6, rng);
    const Clustering c = Clustering::FromLabels(labels);
    std::vector<double> y(n), scaled(n), shifted(n);
    const double k = 0.5 + 3.0 * std::abs(normal(rng));
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = normal(rng);
      scaled[i] = k * y[i];
    }
    const Assignment z({1, 0, 1, 0, 1, 0});
    const double base = NeymannVariance(y, z, c).sigma_hat;
    EXPECT_GE(base, 0.0);
    EXPECT_NEAR(NeymannVariance(scaled, z, c).sigma_hat, k * k * base, 1e-10 * (1 + k * k * base));
  }
}

TEST(NormalCdfTest, Values) {
  EXPECT_DOUBLE_EQ(NormalCdf(0.0), 0.5);
  EXPECT_NEAR(NormalCdf(-1.959964), 0.025, 1e-6);
  EXPECT_DOUBLE_EQ(NormalCdf(40.0), 1.0);
  EXPECT_DOUBLE_EQ(NormalCdf(-40.0), 0.0);
}

TEST(NormalCdfTest, MatchesSeriesOracle) {
  for (double x = -5.0; x <= 5.0; x += 0.125) {
    EXPECT_NEAR(NormalCdf(x), SeriesNormalCdf(x), 1e-13) << x;
  }
}

TEST(CompareClusteringsTest, IncreasingPrefersLargerEstimate) {
  const auto v = CompareClusterings(Est(1), Var(0.5), Est(3), Var(0.5), 0.05,
                                    Direction::kIncreasing);
  EXPECT_DOUBLE_EQ(v.statistic, -2.0);
  EXPECT_NEAR(v.p_value, 0.0227501319, 1e-9);
  EXPECT_EQ(v.better, Better::kClustering2);
}

TEST(CompareClusteringsTest, DecreasingFlips) {
  const auto v = CompareClusterings(Est(1), Var(0.5), Est(3), Var(0.5), 0.05,
                                    Direction::kDecreasing);
  EXPECT_EQ(v.better, Better::kClustering1);
}

TEST(CompareClusteringsTest, SwappedArgumentsMirror) {
  const auto v = CompareClusterings(Est(3), Var(0.5), Est(1), Var(0.5), 0.05,
                                    Direction::kIncreasing);
  EXPECT_DOUBLE_EQ(v.statistic, 2.0);
  EXPECT_EQ(v.better, Better::kClustering1);
}

TEST(CompareClusteringsTest, EqualEstimatesAreInconclusive) {
  const auto v = CompareClusterings(Est(2), Var(0.3), Est(2), Var(0.7), 0.05,
                                    Direction::kIncreasing);
  EXPECT_EQ(v.statistic, 0.0);
  EXPECT_DOUBLE_EQ(v.p_value, 0.5);
  EXPECT_EQ(v.better, Better::kInconclusive);
}

TEST(CompareClusteringsTest, SmallGapIsInconclusive) {
  const auto v = CompareClusterings(Est(1), Var(0.5), Est(2), Var(0.5), 0.05,
                                    Direction::kIncreasing);
  EXPECT_EQ(v.better, Better::kInconclusive);
}

TEST(CompareClusteringsTest, CorrelationShrinksDenominator) {
  const auto v = CompareClusterings(Est(1), Var(1.0), Est(2), Var(1.0), 0.05,
                                    Direction::kIncreasing, 0.75);
  EXPECT_NEAR(v.statistic, -1.0 / std::sqrt(0.5), 1e-12);
}

TEST(CompareClusteringsTest, Errors) {
  EXPECT_EQ(CodeOf([] {
              CompareClusterings(Est(1), Var(0), Est(2), Var(0), 0.05, Direction::kIncreasing);
            }),
            ErrorCode::kDegenerateTest);
  EXPECT_EQ(CodeOf([] {
              CompareClusterings(Est(1), Var(1), Est(2), Var(1), 1.5, Direction::kIncreasing);
            }),
            ErrorCode::kInvalidParameter);
}

TEST(ToStringTest, Names) {
  EXPECT_STREQ(ToString(Better::kClustering1), "clustering-1");
  EXPECT_STREQ(ToString(Better::kClustering2), "clustering-2");
  EXPECT_STREQ(ToString(Better::kInconclusive), "inconclusive");
}

}  // namespace
}  // namespace cbexp
