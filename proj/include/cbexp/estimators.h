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

// Horvitz-Thompson point estimates for cluster-based designs, the Neymann
// variance estimator and the normal-approximation test that decides which of
// two clusterings yields the less biased estimator.

#ifndef CBEXP_ESTIMATORS_H_
#define CBEXP_ESTIMATORS_H_

#include <span>
#include <string>
#include <vector>

#include "cbexp/core.h"

namespace cbexp {

struct HTEstimate {
  double tau_hat = 0.0;
  std::size_t m_treated = 0;
  std::size_t m_control = 0;
  std::size_t m_total = 0;
  std::size_t n_units = 0;
};

// tau_hat = (M/N) * (mean treated cluster total - mean control cluster total).
// Throws kUndefinedEstimator when every cluster is in one bucket.
HTEstimate HtEstimate(std::span<const double> y, const Assignment& z_clusters,
                      const Clustering& clustering);

struct VarianceEstimate {
  double sigma_hat = 0.0;
  double s_treated = 0.0;
  double s_control = 0.0;
  std::vector<double> cluster_totals;
};

// (M/N) * (S_t/M_t + S_c/M_c) with S the n-1 sample variance of cluster
// totals in each bucket. Needs at least two clusters per bucket.
VarianceEstimate NeymannVariance(std::span<const double> y,
                                 const Assignment& z_clusters,
                                 const Clustering& clustering);

// Standard normal CDF.
double NormalCdf(double x);

enum class Direction { kIncreasing, kDecreasing };
enum class Better { kClustering1, kClustering2, kInconclusive };

const char* ToString(Direction d);
const char* ToString(Better b);

struct ComparisonVerdict {
  double statistic = 0.0;
  double p_value = 0.5;  // NormalCdf(statistic)
  Better better = Better::kInconclusive;
  Direction direction = Direction::kIncreasing;
  double alpha = 0.05;
};

// statistic = (tau1 - tau2) / sqrt(s1 + s2 - 2 rho sqrt(s1 s2)).
// Under an increasing mechanism every estimator underestimates, so the
// significantly larger estimate wins; a decreasing mechanism flips that.
ComparisonVerdict CompareClusterings(const HTEstimate& e1,
                                     const VarianceEstimate& v1,
                                     const HTEstimate& e2,
                                     const VarianceEstimate& v2, double alpha,
                                     Direction direction, double rho = 0.0);

}  // namespace cbexp

#endif  // CBEXP_ESTIMATORS_H_
