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

#include "cbexp/partitioning.h"

#include <algorithm>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace cbexp {
namespace {

std::size_t CeilDiv(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

struct Scorer {
  const BipartiteGraph& graph;
  RldgVariant variant;
  std::vector<std::size_t> capacity;

  // Load compared against the capacity for node `u`.
  std::size_t Load(const PartitionState& s, std::size_t p) const {
    return variant == RldgVariant::kUnweighted ? s.node_count[p]
                                               : s.left_count[p];
  }

  bool Feasible(const PartitionState& s, std::size_t u, std::size_t p) const {
    if (variant == RldgVariant::kWeightedBipartite && !graph.is_left(u)) {
      return true;
    }
    return Load(s, p) < capacity[p];
  }

  // Keyphrases in the bipartite variant face no capacity (H_i = infinity).
  double Factor(const PartitionState& s, std::size_t u, std::size_t p) const {
    if (variant == RldgVariant::kWeightedBipartite && !graph.is_left(u)) {
      return 1.0;
    }
    return 1.0 - static_cast<double>(Load(s, p)) /
                     static_cast<double>(capacity[p]);
  }
};

void Place(PartitionState& s, const BipartiteGraph& g, std::size_t u, int p) {
  s.part_of[u] = p;
  ++s.node_count[p];
  if (g.is_left(u)) ++s.left_count[p];
}

PartitionState EmptyState(std::size_t n_nodes, std::size_t k) {
  PartitionState s;
  s.part_of.assign(n_nodes, PartitionState::kUnassigned);
  s.node_count.assign(k, 0);
  s.left_count.assign(k, 0);
  return s;
}

}  // namespace

BipartiteGraph BipartiteGraph::FromEdges(std::size_t n_left,
                                         std::size_t n_right,
                                         std::span<const Edge> edges) {
  BipartiteGraph g;
  g.n_left_ = n_left;
  g.n_right_ = n_right;
  std::unordered_map<std::uint64_t, std::size_t> index;
  for (const auto& e : edges) {
    if (e.left < 0 || e.right < 0 || static_cast<std::size_t>(e.left) >= n_left ||
        static_cast<std::size_t>(e.right) >= n_right) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "edge (" + std::to_string(e.left) + ", " +
                      std::to_string(e.right) + ") out of range");
    }
    if (!(e.weight >= 0.0)) {
      throw Error(ErrorCode::kInvalidParameter, "negative edge weight");
    }
    const std::uint64_t key =
        (static_cast<std::uint64_t>(e.left) << 32) | static_cast<std::uint32_t>(e.right);
    auto [it, inserted] = index.emplace(key, g.edges_.size());
    if (inserted) {
      g.edges_.push_back(e);
    } else {
      g.edges_[it->second].weight += e.weight;
    }
  }

  const std::size_t n = g.num_nodes();
  std::vector<std::size_t> degree(n, 0);
  for (const auto& e : g.edges_) {
    ++degree[e.left];
    ++degree[g.right_node(e.right)];
    g.total_weight_ += e.weight;
  }
  g.offsets_.assign(n + 1, 0);
  for (std::size_t u = 0; u < n; ++u) g.offsets_[u + 1] = g.offsets_[u] + degree[u];
  g.adjacency_.resize(g.offsets_.back());
  std::vector<std::size_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
  std::vector<bool> seen(n, false);
  for (const auto& e : g.edges_) {
    const int r = g.right_node(e.right);
    g.adjacency_[cursor[e.left]++] = {r, e.weight};
    g.adjacency_[cursor[r]++] = {e.left, e.weight};
    for (int node : {e.left, r}) {
      if (!seen[node]) {
        seen[node] = true;
        g.stream_order_.push_back(node);
      }
    }
  }
  for (std::size_t u = 0; u < n; ++u) {
    if (!seen[u]) g.stream_order_.push_back(static_cast<int>(u));
  }
  return g;
}

LabeledBipartiteGraph ReadBipartiteCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("bidder_id,keyphrase_id,weight", 0) != 0) {
    throw Error(ErrorCode::kParse,
                "expected header 'bidder_id,keyphrase_id,weight'");
  }
  LabeledBipartiteGraph out;
  std::unordered_map<std::string, int> left_ids;
  std::unordered_map<std::string, int> right_ids;
  std::vector<BipartiteGraph::Edge> edges;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    // Keyphrases may contain commas: the bidder is the first field and the
    // weight the last.
    const auto first = line.find(',');
    const auto last = line.rfind(',');
    if (first == std::string::npos || first == last) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) +
                                         ": expected 3 columns");
    }
    const std::string bidder = line.substr(0, first);
    const std::string keyphrase = line.substr(first + 1, last - first - 1);
    const std::string weight = line.substr(last + 1);
    double w = 0.0;
    try {
      w = std::stod(weight);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParse,
                  "line " + std::to_string(line_no) + ": bad weight");
    }
    auto [li, lnew] = left_ids.emplace(bidder, static_cast<int>(left_ids.size()));
    if (lnew) out.left_names.push_back(bidder);
    auto [ri, rnew] = right_ids.emplace(keyphrase, static_cast<int>(right_ids.size()));
    if (rnew) out.right_names.push_back(keyphrase);
    edges.push_back({li->second, ri->second, w});
  }
  out.graph = BipartiteGraph::FromEdges(out.left_names.size(),
                                        out.right_names.size(), edges);
  return out;
}

void WriteBipartiteCsv(std::ostream& out, const LabeledBipartiteGraph& graph) {
  const auto old_precision = out.precision(17);
  out << "bidder_id,keyphrase_id,weight\n";
  for (const auto& e : graph.graph.edges()) {
    out << graph.left_names[e.left] << ',' << graph.right_names[e.right] << ','
        << e.weight << '\n';
  }
  out.precision(old_precision);
}

RldgResult RldgPartition(const BipartiteGraph& graph, const RldgOptions& options) {
  const std::size_t k = options.k;
  if (k == 0) throw Error(ErrorCode::kInvalidParameter, "k must be >= 1");
  const std::size_t n = graph.num_nodes();
  const bool bipartite = options.variant == RldgVariant::kWeightedBipartite;
  const std::size_t constrained = bipartite ? graph.num_left() : n;

  Scorer scorer{graph, options.variant, options.capacity};
  if (scorer.capacity.empty()) {
    scorer.capacity.assign(k, std::max<std::size_t>(1, CeilDiv(constrained, k)));
  }
  if (scorer.capacity.size() != k) {
    throw Error(ErrorCode::kInvalidParameter, "need one capacity per partition");
  }
  std::size_t total_capacity = 0;
  for (std::size_t c : scorer.capacity) {
    if (c == 0) throw Error(ErrorCode::kInvalidParameter, "zero capacity");
    total_capacity = c == kUnlimited || total_capacity == kUnlimited
                         ? kUnlimited
                         : total_capacity + c;
  }
  if (total_capacity < constrained) {
    throw Error(ErrorCode::kInvalidParameter,
                "capacities sum to " + std::to_string(total_capacity) +
                    " < " + std::to_string(constrained) + " nodes");
  }

  RldgResult result;
  result.state = EmptyState(n, k);
  PartitionState& state = result.state;
  std::vector<int> order = graph.stream_order();
  Rng rng = MakeRng(options.seed);
  std::vector<double> affinity(k, 0.0);
  std::vector<int> touched;

  for (std::size_t pass = 0; pass < std::max<std::size_t>(1, options.passes); ++pass) {
    if (options.shuffle_each_pass) std::shuffle(order.begin(), order.end(), rng);
    // Each pass refills the partitions from empty; nodes not yet streamed in
    // this pass keep their previous label for the neighbor scores.
    std::fill(state.node_count.begin(), state.node_count.end(), 0);
    std::fill(state.left_count.begin(), state.left_count.end(), 0);
    for (int u : order) {
      for (const auto& nb : graph.neighbors(u)) {
        const int p = state.part_of[nb.node];
        if (p == PartitionState::kUnassigned) continue;
        if (affinity[p] == 0.0) touched.push_back(p);
        affinity[p] += bipartite ? nb.weight : 1.0;
      }
      int best = -1;
      double best_score = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        if (!scorer.Feasible(state, u, p)) continue;
        const double score = affinity[p] * scorer.Factor(state, u, p);
        if (best < 0 || score > best_score ||
            (score == best_score &&
             scorer.Load(state, p) < scorer.Load(state, best))) {
          best = static_cast<int>(p);
          best_score = score;
        }
      }
      for (int p : touched) affinity[p] = 0.0;
      touched.clear();
      Place(state, graph, u, best);
    }
    result.report.history.push_back(WeightedCutRatio(graph, state));
    const auto& h = result.report.history;
    if (h.size() >= 2 && h[h.size() - 2] - h.back() < options.min_improvement) {
      break;
    }
  }
  result.report.weighted_cut_ratio = result.report.history.back();
  return result;
}

PartitionState RandomBalancedPartition(std::size_t n_nodes, std::size_t k,
                                       Rng& rng, std::size_t n_left) {
  if (k == 0 || k > std::max<std::size_t>(n_nodes, 1)) {
    throw Error(ErrorCode::kInvalidParameter,
                "k must lie in [1, node count]");
  }
  std::vector<int> nodes(n_nodes);
  std::iota(nodes.begin(), nodes.end(), 0);
  std::shuffle(nodes.begin(), nodes.end(), rng);
  PartitionState s = EmptyState(n_nodes, k);
  for (std::size_t pos = 0; pos < n_nodes; ++pos) {
    const int node = nodes[pos];
    const int p = static_cast<int>(pos % k);
    s.part_of[node] = p;
    ++s.node_count[p];
    if (static_cast<std::size_t>(node) < n_left) ++s.left_count[p];
  }
  return s;
}

double WeightedCutRatio(const BipartiteGraph& graph, const PartitionState& state) {
  if (state.part_of.size() != graph.num_nodes()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "partition state does not cover the graph");
  }
  double cut = 0.0;
  for (const auto& e : graph.edges()) {
    const int a = state.part_of[e.left];
    const int b = state.part_of[graph.right_node(e.right)];
    if (a == PartitionState::kUnassigned || b == PartitionState::kUnassigned) {
      throw Error(ErrorCode::kInvalidParameter, "unassigned node in cut ratio");
    }
    if (a != b) cut += e.weight;
  }
  return graph.total_weight() > 0.0 ? cut / graph.total_weight() : 0.0;
}

Clustering ProjectBidderPartition(const PartitionState& state,
                                  const BipartiteGraph& graph) {
  std::vector<int> labels(graph.num_left());
  for (std::size_t b = 0; b < labels.size(); ++b) {
    labels[b] = state.part_of[b];
    if (labels[b] == PartitionState::kUnassigned) {
      throw Error(ErrorCode::kInvalidParameter,
                  "bidder " + std::to_string(b) + " is unassigned");
    }
  }
  return Clustering::FromLabels(labels);
}

void WritePartitionCsv(std::ostream& out, const PartitionState& state) {
  out << "node_id,partition_index\n";
  for (std::size_t u = 0; u < state.part_of.size(); ++u) {
    out << u << ',' << state.part_of[u] << '\n';
  }
}

PlantedBipartite MakePlantedBipartite(const PlantedBipartiteParams& params,
                                      std::uint64_t seed) {
  if (params.blocks == 0 || params.n_right < params.blocks ||
      params.degree == 0) {
    throw Error(ErrorCode::kInvalidParameter, "infeasible planted parameters");
  }
  Rng rng = MakeRng(seed);
  PlantedBipartite out;
  out.block.resize(params.n_left + params.n_right);
  std::vector<std::vector<int>> right_by_block(params.blocks);
  for (std::size_t b = 0; b < params.n_left; ++b) {
    out.block[b] = static_cast<int>(rng() % params.blocks);
  }
  std::vector<int> right_perm(params.n_right);
  std::iota(right_perm.begin(), right_perm.end(), 0);
  std::shuffle(right_perm.begin(), right_perm.end(), rng);
  for (std::size_t pos = 0; pos < params.n_right; ++pos) {
    const int blk = static_cast<int>(pos % params.blocks);
    right_by_block[blk].push_back(right_perm[pos]);
    out.block[params.n_left + right_perm[pos]] = blk;
  }

  std::bernoulli_distribution within(params.within_probability);
  std::vector<BipartiteGraph::Edge> edges;
  for (std::size_t b = 0; b < params.n_left; ++b) {
    std::vector<int> chosen;
    for (std::size_t d = 0; d < params.degree; ++d) {
      int blk = out.block[b];
      const bool in = params.blocks == 1 || within(rng);
      if (!in) {
        blk = static_cast<int>((blk + 1 + rng() % (params.blocks - 1)) %
                               params.blocks);
      }
      const auto& pool = right_by_block[blk];
      const int r = pool[rng() % pool.size()];
      if (std::find(chosen.begin(), chosen.end(), r) != chosen.end()) continue;
      chosen.push_back(r);
      edges.push_back({static_cast<int>(b), r,
                       in ? params.within_weight : params.cross_weight});
    }
  }
  out.graph = BipartiteGraph::FromEdges(params.n_left, params.n_right, edges);
  return out;
}

}  // namespace cbexp
