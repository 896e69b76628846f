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

// Config-driven pipelines: load or generate a bid log, build two candidate
// clusterings of the bidders, simulate an outcome model under direct and
// experiment-of-experiments designs, and write reports and tidy CSVs.
//
// Configs are JSON objects with an explicit "schema_version". Every key not
// given is filled with its default and the filled keys are reported back so
// callers can log them.

#ifndef CBEXP_HARNESS_H_
#define CBEXP_HARNESS_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cbexp/auctions.h"
#include "cbexp/core.h"
#include "cbexp/data_io.h"
#include "cbexp/estimators.h"
#include "cbexp/interference.h"
#include "cbexp/monte_carlo.h"
#include "cbexp/partitioning.h"
#include "json.hpp"

namespace cbexp {

inline constexpr int kSchemaVersion = 1;

enum class DatasetSource { kSynthetic, kFile };

struct DatasetSpec {
  DatasetSource source = DatasetSource::kSynthetic;
  std::string path;  // bid log, when source is kFile
  SyntheticParams synthetic;
  std::uint64_t seed = 1;
};

enum class ModelKind { kLinear, kSecondPrice, kVcgPositional };

struct LinearSpec {
  // Per-unit parameters are drawn N(mean, sd) unless params_csv is set.
  double alpha_mean = 0.0;
  double alpha_sd = 1.0;
  double beta_mean = 1.0;
  double beta_sd = 0.5;
  double gamma_mean = 1.0;
  double gamma_sd = 0.5;
  double noise_sd = 0.5;
  std::string params_csv;
};

struct AuctionSpec {
  double reserve_spread = 0.5;  // log-sd of treated reserves around the median bid
  std::size_t max_participants = 6;
  std::size_t slots = 4;
  // Empty means pos_j = 0.6^(j-1), which is convex.
  std::vector<double> position_curve;
  std::array<double, 2> reserve_band = {0.2, 0.6};
};

struct ModelSpec {
  ModelKind kind = ModelKind::kSecondPrice;
  LinearSpec linear;
  AuctionSpec auction;
};

enum class ClusteringKind { kRldg, kRandom, kFile };

struct ClusteringSpec {
  ClusteringKind kind = ClusteringKind::kRldg;
  GraphMetric metric = GraphMetric::kBid;
  std::size_t k = 50;
  std::size_t passes = 10;
  std::string path;  // "unit<TAB>cluster", units index bidders by first appearance
};

struct Figure2Spec {
  bool planted = false;  // use a planted bipartite graph instead of the dataset
  PlantedBipartiteParams planted_params;
  GraphMetric metric = GraphMetric::kBid;
  std::vector<std::size_t> ks = {50, 400};
  std::size_t passes = 10;
};

struct Figure3Panel {
  std::string name;
  std::array<ClusteringSpec, 2> clusterings;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  DatasetSpec dataset;
  ModelSpec model;
  std::array<ClusteringSpec, 2> clusterings;
  std::size_t replications = 2000;
  std::uint64_t master_seed = 0;
  double alpha = 0.05;
  std::string output_dir = "out";
  bool simulate_direct = true;
  Figure2Spec figure2;
  std::vector<Figure3Panel> figure3;  // defaults to the three standard panels
};

struct LoadedConfig {
  ExperimentConfig config;
  std::vector<std::string> defaults;  // "key = value" for each filled default
};

// Throws Error(kConfig) listing every problem found.
LoadedConfig ParseConfig(const nlohmann::json& json);
LoadedConfig LoadConfig(const std::filesystem::path& path);
nlohmann::json ToJson(const ExperimentConfig& config);

// Bid log plus the bidder-keyphrase graph weighted by bids. Bidder indices
// are positions in graph.left_names.
struct Population {
  std::vector<BidRecord> records;
  LabeledBipartiteGraph graph;
};

Population LoadPopulation(const DatasetSpec& spec);

// Bidders sharing at least one keyphrase are neighbors.
NeighborhoodGraph CoBiddingGraph(const BipartiteGraph& graph);

struct BuiltClustering {
  Clustering clustering;
  nlohmann::json info;
};

BuiltClustering BuildClustering(const ClusteringSpec& spec,
                                const Population& population,
                                std::uint64_t seed);

// Seed the pipelines use for clustering `index` (0 or 1).
std::uint64_t ClusteringSeed(std::uint64_t master_seed, std::size_t index);

struct BuiltModel {
  std::unique_ptr<PotentialOutcomeModel> model;
  std::optional<std::uint64_t> noise_seed;
  nlohmann::json info;
};

BuiltModel BuildModel(const ModelSpec& spec, const Population& population,
                      std::uint64_t master_seed);

struct EstimateSummary {
  std::string name;
  double mean = 0.0;
  double stderr_mean = 0.0;
  std::size_t kept = 0;
  std::size_t excluded = 0;
  std::optional<double> closed_form;  // linear model, direct designs only
};

struct ComparisonReport {
  nlohmann::json config;
  nlohmann::json population;
  std::array<nlohmann::json, 2> clusterings;
  double tte = 0.0;
  MonotonicityKind monotonicity = MonotonicityKind::kIndeterminate;
  std::string monotonicity_basis;
  std::optional<std::array<EstimateSummary, 2>> direct;
  std::array<EstimateSummary, 2> eoe;
  nlohmann::json single_realization;
  std::optional<ComparisonVerdict> aggregate_verdict;
  // Present only when direct designs were simulated.
  std::optional<bool> ordering_consistent;
  // Every mean within 3 stderr of the side of TTE the monotonicity predicts.
  std::optional<bool> monotonicity_consistent;

  std::optional<MonteCarloResult> direct_samples[2];
  MonteCarloResult eoe_samples;
};

ComparisonReport RunComparisonPipeline(const ExperimentConfig& config);
nlohmann::json ToJson(const ComparisonReport& report);

// report.json (or report.csv) plus samples_direct_1.csv, samples_direct_2.csv
// and samples_eoe.csv.
void WriteComparisonArtifacts(const ComparisonReport& report,
                              const std::filesystem::path& dir, bool csv);

// Direct designs only: TTE and per-clustering Monte-Carlo summaries.
struct SimulationReport {
  nlohmann::json summary;
  std::array<MonteCarloResult, 2> samples;
};

SimulationReport RunSimulation(const ExperimentConfig& config);

struct Figure2Row {
  std::size_t k = 0;
  std::string method;  // "rldg" or "random"
  std::size_t pass = 0;
  double cut_ratio = 0.0;
};

std::vector<Figure2Row> ReproduceFigure2(const ExperimentConfig& config);
void WriteFigure2Csv(std::ostream& out, const std::vector<Figure2Row>& rows);

struct Figure3Result {
  std::vector<std::string> panels;
  std::vector<ComparisonReport> reports;
};

Figure3Result ReproduceFigure3(const ExperimentConfig& config);
// panel,estimator,replicate,tau_hat,tte
void WriteFigure3Csv(std::ostream& out, const Figure3Result& result);

const char* ToString(ModelKind kind);
const char* ToString(ClusteringKind kind);

}  // namespace cbexp

#endif  // CBEXP_HARNESS_H_
