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

#include <cmath>
#include <numbers>

namespace cbexp {
namespace {

void CheckShapes(std::span<const double> y, const Assignment& z_clusters,
                 const Clustering& clustering) {
  if (y.size() != clustering.num_units()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "outcome vector length " + std::to_string(y.size()) +
                    " != N " + std::to_string(clustering.num_units()));
  }
  if (z_clusters.size() != clustering.num_clusters()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "cluster assignment length " +
                    std::to_string(z_clusters.size()) + " != M " +
                    std::to_string(clustering.num_clusters()));
  }
}

std::vector<double> ClusterTotals(std::span<const double> y,
                                  const Clustering& clustering) {
  std::vector<double> totals(clustering.num_clusters(), 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    totals[clustering.cluster_of(i)] += y[i];
  }
  return totals;
}

// Two-pass sample variance with n-1 denominator.
double SampleVariance(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size() - 1);
}

}  // namespace

HTEstimate HtEstimate(std::span<const double> y, const Assignment& z_clusters,
                      const Clustering& clustering) {
  CheckShapes(y, z_clusters, clustering);
  const auto totals = ClusterTotals(y, clustering);
  HTEstimate e;
  e.m_total = clustering.num_clusters();
  e.n_units = clustering.num_units();
  double treated = 0.0;
  double control = 0.0;
  for (std::size_t j = 0; j < totals.size(); ++j) {
    if (z_clusters[j]) {
      treated += totals[j];
      ++e.m_treated;
    } else {
      control += totals[j];
      ++e.m_control;
    }
  }
  if (e.m_treated == 0 || e.m_control == 0) {
    throw Error(ErrorCode::kUndefinedEstimator,
                "HT estimator needs treated and control clusters");
  }
  const double scale =
      static_cast<double>(e.m_total) / static_cast<double>(e.n_units);
  e.tau_hat = scale * (treated / static_cast<double>(e.m_treated) -
                       control / static_cast<double>(e.m_control));
  return e;
}

VarianceEstimate NeymannVariance(std::span<const double> y,
                                 const Assignment& z_clusters,
                                 const Clustering& clustering) {
  CheckShapes(y, z_clusters, clustering);
  VarianceEstimate v;
  v.cluster_totals = ClusterTotals(y, clustering);
  std::vector<double> treated;
  std::vector<double> control;
  for (std::size_t j = 0; j < v.cluster_totals.size(); ++j) {
    (z_clusters[j] ? treated : control).push_back(v.cluster_totals[j]);
  }
  if (treated.size() < 2 || control.size() < 2) {
    throw Error(ErrorCode::kInsufficientReplication,
                "need >= 2 clusters per bucket, got " +
                    std::to_string(treated.size()) + " treated and " +
                    std::to_string(control.size()) + " control");
  }
  v.s_treated = SampleVariance(treated);
  v.s_control = SampleVariance(control);
  const double scale = static_cast<double>(clustering.num_clusters()) /
                       static_cast<double>(clustering.num_units());
  v.sigma_hat = scale * (v.s_treated / static_cast<double>(treated.size()) +
                         v.s_control / static_cast<double>(control.size()));
  return v;
}

double NormalCdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

const char* ToString(Direction d) {
  return d == Direction::kIncreasing ? "increasing" : "decreasing";
}

const char* ToString(Better b) {
  switch (b) {
    case Better::kClustering1: return "clustering-1";
    case Better::kClustering2: return "clustering-2";
    case Better::kInconclusive: return "inconclusive";
  }
  return "inconclusive";
}

ComparisonVerdict CompareClusterings(const HTEstimate& e1,
                                     const VarianceEstimate& v1,
                                     const HTEstimate& e2,
                                     const VarianceEstimate& v2, double alpha,
                                     Direction direction, double rho) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::kInvalidParameter, "alpha must lie in (0, 1)");
  }
  if (rho < -1.0 || rho > 1.0) {
    throw Error(ErrorCode::kInvalidParameter, "rho must lie in [-1, 1]");
  }
  const double var = v1.sigma_hat + v2.sigma_hat -
                     2.0 * rho * std::sqrt(v1.sigma_hat * v2.sigma_hat);
  if (!(var > 0.0)) {
    throw Error(ErrorCode::kDegenerateTest,
                "combined variance is not positive");
  }
  ComparisonVerdict verdict;
  verdict.alpha = alpha;
  verdict.direction = direction;
  verdict.statistic = (e1.tau_hat - e2.tau_hat) / std::sqrt(var);
  verdict.p_value = NormalCdf(verdict.statistic);

  const bool first_smaller = verdict.p_value < alpha;
  const bool first_larger = NormalCdf(-verdict.statistic) < alpha;
  if (first_smaller) {
    verdict.better = direction == Direction::kIncreasing ? Better::kClustering2
                                                         : Better::kClustering1;
  } else if (first_larger) {
    verdict.better = direction == Direction::kIncreasing ? Better::kClustering1
                                                         : Better::kClustering2;
  }
  return verdict;
}

}  // namespace cbexp
