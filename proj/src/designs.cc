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

#include "cbexp/designs.h"

#include <algorithm>
#include <numeric>
#include <string>

namespace cbexp {
namespace {

// Uniform k-subset indicator of {0..n-1} via a partial Fisher-Yates shuffle.
std::vector<std::uint8_t> RandomSubset(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<std::uint8_t> chosen(n, 0);
  for (std::size_t i = 0; i < k; ++i) chosen[idx[i]] = 1;
  return chosen;
}

ArmDesign AssignArm(const Clustering& base, const ArmSplit& split, int arm,
                    std::uint64_t seed) {
  ArmDesign design;
  design.induced = Induce(base, split, arm);
  const std::size_t m = design.induced.clustering.num_clusters();
  if (m < 2) {
    throw Error(ErrorCode::kDegenerateDesign,
                "arm " + std::to_string(arm) + " has " + std::to_string(m) +
                    " induced cluster(s)");
  }
  Rng rng = MakeRng(seed);
  auto ca = ClusterBasedAssignment(design.induced.clustering,
                                   DefaultTreatedClusters(m), rng);
  design.z_clusters = std::move(ca.clusters);
  design.m_treated = ca.m_treated;
  design.m_control = ca.m_control;
  return design;
}

}  // namespace

Assignment CompleteRandomization(std::size_t n_units, std::size_t n_treated,
                                 Rng& rng) {
  if (n_treated > n_units) {
    throw Error(ErrorCode::kInvalidParameter,
                "n_treated " + std::to_string(n_treated) + " exceeds n_units " +
                    std::to_string(n_units));
  }
  return Assignment(RandomSubset(n_units, n_treated, rng));
}

ClusterAssignment ClusterBasedAssignment(const Clustering& clustering,
                                         std::size_t m_treated, Rng& rng) {
  const std::size_t m = clustering.num_clusters();
  if (m_treated > m) {
    throw Error(ErrorCode::kInvalidParameter,
                "m_treated " + std::to_string(m_treated) + " exceeds M " +
                    std::to_string(m));
  }
  ClusterAssignment out;
  out.clusters = Assignment(RandomSubset(m, m_treated, rng));
  std::vector<std::uint8_t> units(clustering.num_units());
  for (std::size_t i = 0; i < units.size(); ++i) {
    units[i] = out.clusters[clustering.cluster_of(i)];
  }
  out.units = Assignment(std::move(units));
  out.m_treated = m_treated;
  out.m_control = m - m_treated;
  return out;
}

ArmSplit BalancedArmSplit(std::size_t n_units, Rng& rng) {
  ArmSplit split;
  const auto in_arm1 = RandomSubset(n_units, n_units / 2, rng);
  split.arm.resize(n_units);
  for (std::size_t i = 0; i < n_units; ++i) {
    split.arm[i] = in_arm1[i] ? 1 : 2;
  }
  split.n1 = n_units / 2;
  split.n2 = n_units - split.n1;
  return split;
}

InducedClustering Induce(const Clustering& base, const ArmSplit& split,
                         int arm) {
  if (split.arm.size() != base.num_units()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "arm split and clustering sizes differ");
  }
  InducedClustering out;
  std::vector<int> labels;
  for (std::size_t i = 0; i < split.arm.size(); ++i) {
    if (split.arm[i] == arm) {
      out.units.push_back(static_cast<int>(i));
      labels.push_back(base.cluster_of(i));
    }
  }
  if (out.units.empty()) {
    throw Error(ErrorCode::kEmptyArm,
                "arm " + std::to_string(arm) + " has no units");
  }
  out.clustering = Clustering::FromLabels(labels);
  return out;
}

EoEDesign EoEAssign(const Clustering& c1, const Clustering& c2,
                    std::uint64_t seed) {
  if (c1.num_units() != c2.num_units()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "clusterings cover different numbers of units");
  }
  EoEDesign design;
  Rng split_rng = MakeRng(DeriveSeed(seed, Stream::kArmSplit));
  design.split = BalancedArmSplit(c1.num_units(), split_rng);
  if (design.split.n1 == 0) {
    throw Error(ErrorCode::kDegenerateDesign, "population too small to split");
  }
  design.arms[0] =
      AssignArm(c1, design.split, 1, DeriveSeed(seed, Stream::kArm1Clusters));
  design.arms[1] =
      AssignArm(c2, design.split, 2, DeriveSeed(seed, Stream::kArm2Clusters));

  std::vector<std::uint8_t> z(c1.num_units(), 0);
  for (const auto& arm : design.arms) {
    const auto& units = arm.induced.units;
    for (std::size_t pos = 0; pos < units.size(); ++pos) {
      z[units[pos]] = arm.z_clusters[arm.induced.clustering.cluster_of(pos)];
    }
  }
  design.z = Assignment(std::move(z));
  return design;
}

nlohmann::json ToJson(const EoEDesign& design) {
  nlohmann::json j;
  j["w"] = design.split.arm;
  j["z"] = std::vector<int>(design.z.values().begin(), design.z.values().end());
  for (int k = 0; k < 2; ++k) {
    const auto& arm = design.arms[k];
    const std::string suffix = std::to_string(k + 1);
    j["z" + suffix] = std::vector<int>(arm.z_clusters.values().begin(),
                                       arm.z_clusters.values().end());
    nlohmann::json map = nlohmann::json::array();
    for (std::size_t pos = 0; pos < arm.induced.units.size(); ++pos) {
      map.push_back({arm.induced.units[pos],
                     arm.induced.clustering.cluster_of(pos)});
    }
    j["clusters" + suffix] = std::move(map);
    j["m_treated" + suffix] = arm.m_treated;
    j["m_control" + suffix] = arm.m_control;
  }
  return j;
}

}  // namespace cbexp
