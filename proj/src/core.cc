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

#include "cbexp/core.h"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

namespace cbexp {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyPopulation: return "empty-population";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kPartitionViolation: return "partition-violation";
    case ErrorCode::kInvalidParameter: return "invalid-parameter";
    case ErrorCode::kUndefinedEstimator: return "undefined-estimator";
    case ErrorCode::kInsufficientReplication: return "insufficient-replication";
    case ErrorCode::kDegenerateDesign: return "degenerate-design";
    case ErrorCode::kEmptyArm: return "empty-arm";
    case ErrorCode::kDegenerateTest: return "degenerate-test";
    case ErrorCode::kUnreliableEstimate: return "unreliable-estimate";
    case ErrorCode::kData: return "data";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
      code_(code) {}

Assignment::Assignment(std::vector<std::uint8_t> values)
    : values_(std::move(values)) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i] > 1) {
      throw Error(ErrorCode::kInvalidParameter,
                  "assignment entry " + std::to_string(i) + " is not 0 or 1");
    }
  }
}

Assignment Assignment::Zeros(std::size_t n) {
  return Assignment(std::vector<std::uint8_t>(n, 0));
}

Assignment Assignment::Ones(std::size_t n) {
  return Assignment(std::vector<std::uint8_t>(n, 1));
}

std::size_t Assignment::NumTreated() const {
  return static_cast<std::size_t>(
      std::count(values_.begin(), values_.end(), std::uint8_t{1}));
}

Clustering Clustering::FromLabels(std::span<const int> labels) {
  std::vector<int> distinct(labels.begin(), labels.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (!distinct.empty() && distinct.front() < 0) {
    throw Error(ErrorCode::kPartitionViolation, "negative cluster label");
  }

  Clustering c;
  c.cluster_of_.resize(labels.size());
  c.members_.resize(distinct.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int dense = static_cast<int>(
        std::lower_bound(distinct.begin(), distinct.end(), labels[i]) -
        distinct.begin());
    c.cluster_of_[i] = dense;
    c.members_[dense].push_back(static_cast<int>(i));
  }
  return c;
}

bool Clustering::SamePartitionAs(const Clustering& other) const {
  if (num_units() != other.num_units() ||
      num_clusters() != other.num_clusters()) {
    return false;
  }
  // Bijection between labels, checked in both directions.
  std::vector<int> fwd(num_clusters(), -1);
  std::vector<int> bwd(other.num_clusters(), -1);
  for (std::size_t i = 0; i < num_units(); ++i) {
    const int a = cluster_of_[i];
    const int b = other.cluster_of_[i];
    if (fwd[a] == -1 && bwd[b] == -1) {
      fwd[a] = b;
      bwd[b] = a;
    } else if (fwd[a] != b || bwd[b] != a) {
      return false;
    }
  }
  return true;
}

ClusteringValidation ValidateClustering(
    std::span<const std::pair<int, int>> entries, std::size_t n_units) {
  std::vector<int> labels(n_units, -1);
  for (const auto& [unit, cluster] : entries) {
    if (unit < 0 || static_cast<std::size_t>(unit) >= n_units) {
      throw Error(ErrorCode::kPartitionViolation,
                  "unit " + std::to_string(unit) + " out of range");
    }
    if (cluster < 0) {
      throw Error(ErrorCode::kPartitionViolation,
                  "negative cluster for unit " + std::to_string(unit));
    }
    if (labels[unit] != -1) {
      throw Error(ErrorCode::kPartitionViolation,
                  "unit " + std::to_string(unit) + " assigned twice");
    }
    labels[unit] = cluster;
  }
  for (std::size_t i = 0; i < n_units; ++i) {
    if (labels[i] == -1) {
      throw Error(ErrorCode::kPartitionViolation,
                  "missing unit " + std::to_string(i));
    }
  }

  ClusteringValidation result;
  result.clustering = Clustering::FromLabels(labels);
  std::map<int, int> seen;
  for (std::size_t i = 0; i < n_units; ++i) {
    seen.emplace(labels[i], result.clustering.cluster_of(i));
  }
  for (const auto& [original, dense] : seen) {
    if (original != dense) result.remapped.emplace_back(original, dense);
  }
  return result;
}

void WriteClustering(std::ostream& out, const Clustering& clustering) {
  for (std::size_t i = 0; i < clustering.num_units(); ++i) {
    out << i << '\t' << clustering.cluster_of(i) << '\n';
  }
}

Clustering ReadClustering(std::istream& in, std::size_t n_units) {
  std::vector<std::pair<int, int>> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    int unit = 0;
    int cluster = 0;
    std::string extra;
    if (!(fields >> unit >> cluster) || (fields >> extra)) {
      throw Error(ErrorCode::kParse,
                  "clustering line " + std::to_string(line_no) + ": '" + line +
                      "'");
    }
    entries.emplace_back(unit, cluster);
  }
  return ValidateClustering(entries, n_units).clustering;
}

NeighborhoodGraph NeighborhoodGraph::FromEdges(
    std::size_t n_units, std::span<const std::pair<int, int>> edges) {
  std::vector<std::vector<int>> adj(n_units);
  for (const auto& [a, b] : edges) {
    if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= n_units ||
        static_cast<std::size_t>(b) >= n_units) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "edge (" + std::to_string(a) + ", " + std::to_string(b) +
                      ") out of range");
    }
    if (a == b) {
      throw Error(ErrorCode::kInvalidParameter,
                  "self-loop at unit " + std::to_string(a));
    }
    adj[a].push_back(b);
    adj[b].push_back(a);
  }

  NeighborhoodGraph g;
  g.offsets_.assign(n_units + 1, 0);
  for (std::size_t i = 0; i < n_units; ++i) {
    auto& list = adj[i];
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    g.offsets_[i + 1] = g.offsets_[i] + list.size();
  }
  g.adjacency_.reserve(g.offsets_.back());
  for (const auto& list : adj) {
    g.adjacency_.insert(g.adjacency_.end(), list.begin(), list.end());
  }
  return g;
}

std::vector<double> PotentialOutcomeModel::Outcomes(
    const Assignment& z, std::optional<std::uint64_t> noise_seed) const {
  std::vector<double> out(num_units());
  Evaluate(z, noise_seed, out);
  return out;
}

double TotalTreatmentEffect(const PotentialOutcomeModel& model,
                            std::optional<std::uint64_t> noise_seed) {
  const std::size_t n = model.num_units();
  if (n == 0) {
    throw Error(ErrorCode::kEmptyPopulation, "model has no units");
  }
  const auto treated = model.Outcomes(Assignment::Ones(n), noise_seed);
  const auto control = model.Outcomes(Assignment::Zeros(n), noise_seed);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += treated[i] - control[i];
  return sum / static_cast<double>(n);
}

ExposureProfile ClusterExposure(const Clustering& clustering,
                                const NeighborhoodGraph& graph) {
  const std::size_t n = clustering.num_units();
  if (graph.num_units() != n) {
    throw Error(ErrorCode::kDimensionMismatch,
                "clustering has " + std::to_string(n) + " units, graph has " +
                    std::to_string(graph.num_units()));
  }
  ExposureProfile profile;
  profile.theta.resize(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto nbrs = graph.neighbors(i);
    if (nbrs.empty()) {
      profile.theta[i] = 1.0;
    } else {
      const int own = clustering.cluster_of(i);
      const auto inside = std::count_if(nbrs.begin(), nbrs.end(), [&](int j) {
        return clustering.cluster_of(j) == own;
      });
      profile.theta[i] =
          static_cast<double>(inside) / static_cast<double>(nbrs.size());
    }
    sum += profile.theta[i];
  }
  profile.theta_mean = n == 0 ? 0.0 : sum / static_cast<double>(n);
  return profile;
}

}  // namespace cbexp
