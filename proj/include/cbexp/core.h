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

// Foundational types for cluster-based randomized experiments: treatment
// assignments, clusterings of units, interference neighborhoods and the
// potential-outcome contract that every outcome model implements.

#ifndef CBEXP_CORE_H_
#define CBEXP_CORE_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cbexp {

enum class ErrorCode {
  kEmptyPopulation,
  kDimensionMismatch,
  kPartitionViolation,
  kInvalidParameter,
  kUndefinedEstimator,
  kInsufficientReplication,
  kDegenerateDesign,
  kEmptyArm,
  kDegenerateTest,
  kUnreliableEstimate,
  kData,
  kParse,
  kConfig,
  kIo,
};

const char* ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Binary treatment vector over units (or clusters). Entries are 0 or 1.
class Assignment {
 public:
  Assignment() = default;
  explicit Assignment(std::vector<std::uint8_t> values);

  static Assignment Zeros(std::size_t n);
  static Assignment Ones(std::size_t n);

  std::size_t size() const { return values_.size(); }
  std::uint8_t operator[](std::size_t i) const { return values_[i]; }
  void Set(std::size_t i, bool treated) { values_[i] = treated ? 1 : 0; }
  std::span<const std::uint8_t> values() const { return values_; }
  std::size_t NumTreated() const;

  friend bool operator==(const Assignment&, const Assignment&) = default;

 private:
  std::vector<std::uint8_t> values_;
};

// Partition of units {0..N-1} into M non-empty clusters with dense indices.
class Clustering {
 public:
  Clustering() = default;

  // Builds from per-unit labels. Labels may be any non-negative integers;
  // they are renumbered densely, preserving their relative order.
  static Clustering FromLabels(std::span<const int> labels);

  std::size_t num_units() const { return cluster_of_.size(); }
  std::size_t num_clusters() const { return members_.size(); }
  int cluster_of(std::size_t unit) const { return cluster_of_[unit]; }
  std::span<const int> labels() const { return cluster_of_; }
  std::span<const int> members(std::size_t cluster) const {
    return members_[cluster];
  }

  // True when both describe the same co-membership relation.
  bool SamePartitionAs(const Clustering& other) const;

  friend bool operator==(const Clustering&, const Clustering&) = default;

 private:
  std::vector<int> cluster_of_;
  std::vector<std::vector<int>> members_;
};

struct ClusteringValidation {
  Clustering clustering;
  // (original label, dense index) for every label that was renumbered.
  std::vector<std::pair<int, int>> remapped;
};

// Checks that `entries` (unit, cluster) cover every unit in [0, n_units)
// exactly once and normalizes cluster indices to a dense range.
ClusteringValidation ValidateClustering(
    std::span<const std::pair<int, int>> entries, std::size_t n_units);

// "unit_index<TAB>cluster_index" per line.
void WriteClustering(std::ostream& out, const Clustering& clustering);
Clustering ReadClustering(std::istream& in, std::size_t n_units);

// Undirected interference graph over units; neighborhoods exclude the unit.
class NeighborhoodGraph {
 public:
  NeighborhoodGraph() = default;
  // Duplicate edges are merged. Self-loops and out-of-range endpoints are
  // rejected.
  static NeighborhoodGraph FromEdges(
      std::size_t n_units, std::span<const std::pair<int, int>> edges);

  std::size_t num_units() const {
    return offsets_.empty() ? 0 : offsets_.size() - 1;
  }
  std::size_t num_edges() const { return adjacency_.size() / 2; }
  std::span<const int> neighbors(std::size_t unit) const {
    return {adjacency_.data() + offsets_[unit],
            adjacency_.data() + offsets_[unit + 1]};
  }
  std::size_t degree(std::size_t unit) const {
    return offsets_[unit + 1] - offsets_[unit];
  }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<int> adjacency_;
};

// Y(Z) for every unit. Implementations must be deterministic given Z and the
// noise seed; std::nullopt requests noise-free outcomes.
class PotentialOutcomeModel {
 public:
  virtual ~PotentialOutcomeModel() = default;

  virtual std::size_t num_units() const = 0;
  // Writes Y(z) into `out`, which has num_units() entries.
  virtual void Evaluate(const Assignment& z,
                        std::optional<std::uint64_t> noise_seed,
                        std::span<double> out) const = 0;

  std::vector<double> Outcomes(const Assignment& z,
                               std::optional<std::uint64_t> noise_seed) const;
};

struct ExposureProfile {
  std::vector<double> theta;
  double theta_mean = 0.0;
};

// Mean over units of Y_i(1) - Y_i(0), both evaluated with `noise_seed`.
double TotalTreatmentEffect(const PotentialOutcomeModel& model,
                            std::optional<std::uint64_t> noise_seed);

// theta_i = |N_i ∩ C(i)| / |N_i|; isolated units get theta_i = 1.
ExposureProfile ClusterExposure(const Clustering& clustering,
                                const NeighborhoodGraph& graph);

}  // namespace cbexp

#endif  // CBEXP_CORE_H_
