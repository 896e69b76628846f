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

// Balanced partitioning of bidder-keyphrase graphs with restreaming linear
// deterministic greedy (R-LDG), random balanced baselines, and cut metrics.

#ifndef CBEXP_PARTITIONING_H_
#define CBEXP_PARTITIONING_H_

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cbexp/core.h"
#include "cbexp/random.h"

namespace cbexp {

// Weighted bipartite graph. Left nodes (bidders) have ids 0..L-1, right nodes
// (keyphrases) have ids L..L+R-1.
class BipartiteGraph {
 public:
  struct Edge {
    int left = 0;
    int right = 0;
    double weight = 0.0;
  };
  struct Neighbor {
    int node = 0;
    double weight = 0.0;
  };

  BipartiteGraph() = default;
  // Duplicate (left, right) pairs are summed; negative weights rejected.
  static BipartiteGraph FromEdges(std::size_t n_left, std::size_t n_right,
                                  std::span<const Edge> edges);

  std::size_t num_left() const { return n_left_; }
  std::size_t num_right() const { return n_right_; }
  std::size_t num_nodes() const { return n_left_ + n_right_; }
  bool is_left(std::size_t node) const { return node < n_left_; }
  int right_node(int right_index) const {
    return static_cast<int>(n_left_) + right_index;
  }

  std::span<const Neighbor> neighbors(std::size_t node) const {
    return {adjacency_.data() + offsets_[node],
            adjacency_.data() + offsets_[node + 1]};
  }
  // Merged edges in order of first appearance in the input.
  const std::vector<Edge>& edges() const { return edges_; }
  double total_weight() const { return total_weight_; }
  // Nodes in order of first appearance in the input edge list, followed by
  // isolated nodes in id order.
  const std::vector<int>& stream_order() const { return stream_order_; }

 private:
  std::size_t n_left_ = 0;
  std::size_t n_right_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_;
  std::vector<Neighbor> adjacency_;
  std::vector<int> stream_order_;
  double total_weight_ = 0.0;
};

// Graph read from "bidder_id,keyphrase_id,weight" CSV with string ids.
struct LabeledBipartiteGraph {
  BipartiteGraph graph;
  std::vector<std::string> left_names;
  std::vector<std::string> right_names;
};

LabeledBipartiteGraph ReadBipartiteCsv(std::istream& in);
void WriteBipartiteCsv(std::ostream& out, const LabeledBipartiteGraph& graph);

inline constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();

struct PartitionState {
  static constexpr int kUnassigned = -1;
  std::vector<int> part_of;
  std::vector<std::size_t> node_count;  // |P_i|
  std::vector<std::size_t> left_count;  // bidder nodes in P_i
  std::size_t num_parts() const { return node_count.size(); }
};

struct CutReport {
  double weighted_cut_ratio = 0.0;
  std::vector<double> history;  // after each pass
};

enum class RldgVariant {
  // |P_i ∩ N(u)| (1 - |P_i| / H_i), every node counts against H_i.
  kUnweighted,
  // (sum of weights from u into P_i) (1 - |P_i,c| / H_i,c), only bidder
  // nodes count against the capacity.
  kWeightedBipartite,
};

struct RldgOptions {
  std::size_t k = 2;
  RldgVariant variant = RldgVariant::kWeightedBipartite;
  std::size_t passes = 10;
  double min_improvement = 1e-4;
  // Per-partition capacity; empty means ceil(n / k) with n the node count
  // (unweighted) or the bidder count (bipartite).
  std::vector<std::size_t> capacity;
  bool shuffle_each_pass = false;
  std::uint64_t seed = 0;  // used only when shuffling
};

struct RldgResult {
  PartitionState state;
  CutReport report;
};

// Ties go to the least-loaded partition, then the lowest index. Partitions
// at capacity are never chosen.
RldgResult RldgPartition(const BipartiteGraph& graph, const RldgOptions& options);

// Uniform random assignment of n_nodes into k parts whose sizes differ by at
// most one.
PartitionState RandomBalancedPartition(std::size_t n_nodes, std::size_t k,
                                       Rng& rng, std::size_t n_left = 0);

// Weighted fraction of edge mass whose endpoints lie in different parts.
double WeightedCutRatio(const BipartiteGraph& graph, const PartitionState& state);

// Clustering of the bidder nodes only; empty partitions are dropped.
Clustering ProjectBidderPartition(const PartitionState& state,
                                  const BipartiteGraph& graph);

// "node_id,partition_index".
void WritePartitionCsv(std::ostream& out, const PartitionState& state);

struct PlantedBipartiteParams {
  std::size_t n_left = 200;
  std::size_t n_right = 400;
  std::size_t blocks = 2;
  std::size_t degree = 8;         // edges per bidder
  double within_probability = 0.5;
  double within_weight = 10.0;
  double cross_weight = 1.0;
};

struct PlantedBipartite {
  BipartiteGraph graph;
  std::vector<int> block;  // ground-truth block per node
};

// Each bidder draws `degree` distinct keyphrases; each is taken from the
// bidder's own block with `within_probability`, otherwise from another block.
PlantedBipartite MakePlantedBipartite(const PlantedBipartiteParams& params,
                                      std::uint64_t seed);

}  // namespace cbexp

#endif  // CBEXP_PARTITIONING_H_
