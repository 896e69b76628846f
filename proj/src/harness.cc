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

#include "cbexp/harness.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <type_traits>

#include "cbexp/designs.h"
#include "cbexp/random.h"

namespace cbexp {
namespace {

using nlohmann::json;

// Child streams of the master seed, one per pipeline stage.
constexpr std::uint64_t kStreamClustering = 11;  // + clustering index
constexpr std::uint64_t kStreamModel = 21;
constexpr std::uint64_t kStreamNoise = 22;
constexpr std::uint64_t kStreamDirect = 31;  // + clustering index
constexpr std::uint64_t kStreamEoE = 41;
constexpr std::uint64_t kStreamSingle = 42;
constexpr std::uint64_t kStreamFigure2 = 51;

// Walks one JSON object, filling defaults and collecting problems.
class Reader {
 public:
  Reader(const json* node, std::string path, std::vector<std::string>* problems,
         std::vector<std::string>* defaults)
      : node_(node), path_(std::move(path)), problems_(problems),
        defaults_(defaults) {
    if (node_ != nullptr && !node_->is_object()) {
      Problem(path_.empty() ? "config" : path_, "expected an object");
      node_ = nullptr;
    }
  }

  bool Has(const std::string& key) const {
    return node_ != nullptr && node_->contains(key);
  }

  template <typename T>
  T Get(const std::string& key, const T& fallback) {
    used_.insert(key);
    if (!Has(key)) {
      defaults_->push_back(Path(key) + " = " + json(fallback).dump());
      return fallback;
    }
    return Convert<T>(key, fallback);
  }

  template <typename T>
  std::optional<T> Require(const std::string& key) {
    used_.insert(key);
    if (!Has(key)) {
      Problem(Path(key), "missing required key");
      return std::nullopt;
    }
    return Convert<T>(key, T{});
  }

  Reader Child(const std::string& key) {
    used_.insert(key);
    return Reader(Has(key) ? &node_->at(key) : nullptr, Path(key), problems_,
                  defaults_);
  }

  // Array elements as readers; an absent key yields nullopt.
  std::optional<std::vector<Reader>> Elements(const std::string& key) {
    used_.insert(key);
    if (!Has(key)) return std::nullopt;
    const json& arr = node_->at(key);
    if (!arr.is_array()) {
      Problem(Path(key), "expected an array");
      return std::vector<Reader>{};
    }
    std::vector<Reader> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      out.emplace_back(&arr[i], Path(key) + "[" + std::to_string(i) + "]",
                       problems_, defaults_);
    }
    return out;
  }

  void Finish() const {
    if (node_ == nullptr) return;
    for (const auto& [key, value] : node_->items()) {
      if (!used_.count(key)) Problem(Path(key), "unknown key");
    }
  }

  void Problem(const std::string& where, const std::string& what) const {
    problems_->push_back(where + ": " + what);
  }

  std::string Path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  template <typename T>
  T Convert(const std::string& key, const T& fallback) {
    const json& v = node_->at(key);
    bool ok = true;
    if constexpr (std::is_same_v<T, bool>) {
      ok = v.is_boolean();
    } else if constexpr (std::is_integral_v<T>) {
      ok = v.is_number_integer() &&
           (!std::is_unsigned_v<T> || v.is_number_unsigned() || v.get<std::int64_t>() >= 0);
    } else if constexpr (std::is_floating_point_v<T>) {
      ok = v.is_number();
    } else if constexpr (std::is_same_v<T, std::string>) {
      ok = v.is_string();
    }
    if (ok) {
      try {
        return v.get<T>();
      } catch (const json::exception&) {
        ok = false;
      }
    }
    Problem(Path(key), "wrong type (" + std::string(v.type_name()) + ")");
    return fallback;
  }

  const json* node_;
  std::string path_;
  std::vector<std::string>* problems_;
  std::vector<std::string>* defaults_;
  std::set<std::string> used_;
};

template <typename Enum>
Enum ParseEnum(Reader& r, const std::string& key, Enum fallback,
               const std::map<std::string, Enum>& names, bool required) {
  std::optional<std::string> name;
  if (required) {
    name = r.Require<std::string>(key);
  } else {
    std::string def;
    for (const auto& [n, e] : names) {
      if (e == fallback) def = n;
    }
    name = r.Get<std::string>(key, def);
  }
  if (!name) return fallback;
  const auto it = names.find(*name);
  if (it == names.end()) {
    std::string options;
    for (const auto& [n, e] : names) options += (options.empty() ? "" : ", ") + n;
    r.Problem(r.Path(key), "unknown value '" + *name + "' (expected " + options + ")");
    return fallback;
  }
  return it->second;
}

const std::map<std::string, GraphMetric> kMetricNames = {
    {"bid", GraphMetric::kBid},
    {"impressions", GraphMetric::kImpressions},
    {"clicks", GraphMetric::kClicks},
    {"rank", GraphMetric::kRank}};

const std::map<std::string, ClusteringKind> kClusteringNames = {
    {"rldg", ClusteringKind::kRldg},
    {"random", ClusteringKind::kRandom},
    {"file", ClusteringKind::kFile}};

const std::map<std::string, ModelKind> kModelNames = {
    {"linear", ModelKind::kLinear},
    {"second_price", ModelKind::kSecondPrice},
    {"vcg_positional", ModelKind::kVcgPositional}};

const std::map<std::string, DatasetSource> kSourceNames = {
    {"synthetic", DatasetSource::kSynthetic}, {"file", DatasetSource::kFile}};

ClusteringSpec ParseClusteringSpec(Reader r) {
  ClusteringSpec spec;
  spec.kind = ParseEnum(r, "kind", spec.kind, kClusteringNames, true);
  if (spec.kind == ClusteringKind::kFile) {
    spec.path = r.Require<std::string>("path").value_or("");
  } else {
    spec.k = r.Get<std::size_t>("k", spec.k);
    if (spec.k < 1) r.Problem(r.Path("k"), "must be >= 1");
  }
  if (spec.kind == ClusteringKind::kRldg) {
    spec.metric = ParseEnum(r, "metric", spec.metric, kMetricNames, false);
    spec.passes = r.Get<std::size_t>("passes", spec.passes);
    if (spec.passes < 1) r.Problem(r.Path("passes"), "must be >= 1");
  }
  r.Finish();
  return spec;
}

std::array<ClusteringSpec, 2> ParseClusteringPair(Reader& r,
                                                  const std::string& key) {
  std::array<ClusteringSpec, 2> out;
  auto elements = r.Elements(key);
  if (!elements) {
    r.Problem(r.Path(key), "missing required key");
    return out;
  }
  if (elements->size() != 2) {
    r.Problem(r.Path(key), "expected exactly two clustering specs");
    return out;
  }
  for (std::size_t i = 0; i < 2; ++i) out[i] = ParseClusteringSpec((*elements)[i]);
  return out;
}

SyntheticParams ParseSynthetic(Reader r) {
  SyntheticParams p;
  p.n_bidders = r.Get("n_bidders", p.n_bidders);
  p.n_keyphrases = r.Get("n_keyphrases", p.n_keyphrases);
  p.n_days = r.Get("n_days", p.n_days);
  p.n_communities = r.Get("n_communities", p.n_communities);
  p.within_community = r.Get("within_community", p.within_community);
  p.portfolio_median = r.Get("portfolio_median", p.portfolio_median);
  p.portfolio_log_sd = r.Get("portfolio_log_sd", p.portfolio_log_sd);
  p.daily_activity = r.Get("daily_activity", p.daily_activity);
  p.popularity_exponent = r.Get("popularity_exponent", p.popularity_exponent);
  p.bid_median_cents = r.Get("bid_median_cents", p.bid_median_cents);
  p.bidder_log_sd = r.Get("bidder_log_sd", p.bidder_log_sd);
  p.keyphrase_log_sd = r.Get("keyphrase_log_sd", p.keyphrase_log_sd);
  p.daily_log_sd = r.Get("daily_log_sd", p.daily_log_sd);
  r.Finish();
  return p;
}

PlantedBipartiteParams ParsePlanted(Reader r) {
  PlantedBipartiteParams p;
  p.n_left = r.Get("n_left", p.n_left);
  p.n_right = r.Get("n_right", p.n_right);
  p.blocks = r.Get("blocks", p.blocks);
  p.degree = r.Get("degree", p.degree);
  p.within_probability = r.Get("within_probability", p.within_probability);
  p.within_weight = r.Get("within_weight", p.within_weight);
  p.cross_weight = r.Get("cross_weight", p.cross_weight);
  r.Finish();
  return p;
}

// (unit, cluster) pairs from a clustering file, without a unit count.
std::set<int> UnitsInClusteringFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::set<int> units;
  int unit = 0;
  int cluster = 0;
  while (in >> unit >> cluster) units.insert(unit);
  return units;
}

std::vector<Figure3Panel> DefaultFigure3Panels() {
  ClusteringSpec rldg50;
  ClusteringSpec random50{ClusteringKind::kRandom, GraphMetric::kBid, 50, 10, ""};
  ClusteringSpec rldg10 = rldg50;
  rldg10.k = 10;
  ClusteringSpec rldg400 = rldg50;
  rldg400.k = 400;
  ClusteringSpec impressions50 = rldg50;
  impressions50.metric = GraphMetric::kImpressions;
  return {{"quality", {rldg50, random50}},
          {"partitions", {rldg10, rldg400}},
          {"metric", {rldg50, impressions50}}};
}

json ToJson(const ClusteringSpec& spec) {
  json j = {{"kind", ToString(spec.kind)}};
  if (spec.kind == ClusteringKind::kFile) {
    j["path"] = spec.path;
  } else {
    j["k"] = spec.k;
  }
  if (spec.kind == ClusteringKind::kRldg) {
    j["metric"] = ToString(spec.metric);
    j["passes"] = spec.passes;
  }
  return j;
}

json ToJson(const PlantedBipartiteParams& p) {
  return {{"n_left", p.n_left},
          {"n_right", p.n_right},
          {"blocks", p.blocks},
          {"degree", p.degree},
          {"within_probability", p.within_probability},
          {"within_weight", p.within_weight},
          {"cross_weight", p.cross_weight}};
}

json ToJson(const ComparisonVerdict& v) {
  return {{"statistic", v.statistic},
          {"p_value", v.p_value},
          {"better", ToString(v.better)},
          {"direction", ToString(v.direction)},
          {"alpha", v.alpha}};
}

json ToJson(const EstimateSummary& s, double tte) {
  json j = {{"name", s.name},
            {"mean", s.mean},
            {"stderr", s.stderr_mean},
            {"bias", s.mean - tte},
            {"kept", s.kept},
            {"excluded", s.excluded}};
  if (s.closed_form) j["closed_form_expectation"] = *s.closed_form;
  return j;
}

std::vector<double> PositionValues(const AuctionSpec& spec) {
  if (!spec.position_curve.empty()) return spec.position_curve;
  std::vector<double> pos(spec.slots);
  for (std::size_t j = 0; j < spec.slots; ++j) pos[j] = std::pow(0.6, static_cast<double>(j));
  return pos;
}

EstimateSummary Summarize(const MonteCarloResult& result, std::size_t arm) {
  return {result.arms[arm].name, result.arms[arm].mean,
          result.arms[arm].stderr_mean, result.kept.size(),
          result.excluded.size(), std::nullopt};
}

// Shared setup of every simulation pipeline.
struct Prepared {
  Population population;
  std::array<BuiltClustering, 2> clusterings;
  BuiltModel model;
  double tte = 0.0;
  MonotonicityKind monotonicity = MonotonicityKind::kIndeterminate;
  std::string monotonicity_basis;
};

Prepared Prepare(const ExperimentConfig& config, const Population* population) {
  Prepared p;
  p.population = population ? *population : LoadPopulation(config.dataset);
  for (std::size_t i = 0; i < 2; ++i) {
    p.clusterings[i] = BuildClustering(config.clusterings[i], p.population,
                                       ClusteringSeed(config.master_seed, i));
  }
  if (p.clusterings[0].clustering.num_units() != p.clusterings[1].clustering.num_units()) {
    throw Error(ErrorCode::kConfig, "clusterings cover different bidder sets");
  }
  p.model = BuildModel(config.model, p.population, config.master_seed);
  p.tte = TotalTreatmentEffect(*p.model.model, p.model.noise_seed);

  switch (config.model.kind) {
    case ModelKind::kLinear: {
      const auto& linear = dynamic_cast<const LinearInterferenceModel&>(*p.model.model);
      const auto k1 = ClassifyMonotonicity(linear, p.clusterings[0].clustering).kind;
      const auto k2 = ClassifyMonotonicity(linear, p.clusterings[1].clustering).kind;
      p.monotonicity = k1 == k2 ? k1 : MonotonicityKind::kIndeterminate;
      p.monotonicity_basis = "sign of sum_i gamma_i (1 - theta_i) under both clusterings";
      break;
    }
    case ModelKind::kSecondPrice:
      p.monotonicity = MonotonicityKind::kIncreasing;
      p.monotonicity_basis = "second-price reserve experiments are self-exciting";
      break;
    case ModelKind::kVcgPositional: {
      const PositionCurve curve(PositionValues(config.model.auction));
      const bool convex = CheckPositionConvexity(curve).convex;
      p.monotonicity = convex ? MonotonicityKind::kIncreasing
                              : MonotonicityKind::kIndeterminate;
      p.monotonicity_basis = convex ? "VCG with a convex position curve is self-exciting"
                                    : "position curve is not convex";
      break;
    }
  }
  return p;
}

json PopulationJson(const Prepared& p) {
  json j = {{"records", p.population.records.size()},
            {"bidders", p.population.graph.left_names.size()},
            {"keyphrases", p.population.graph.right_names.size()},
            {"edges", p.population.graph.graph.edges().size()}};
  j["model"] = p.model.info;
  return j;
}

void WriteFile(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

void WriteSamples(const std::filesystem::path& path, const MonteCarloResult& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  WriteSamplesCsv(out, r);
}

std::string CsvNumber(double x) {
  std::ostringstream s;
  s.precision(17);
  s << x;
  return s.str();
}

}  // namespace

const char* ToString(ModelKind kind) {
  for (const auto& [name, k] : kModelNames) {
    if (k == kind) return name.c_str();
  }
  return "";
}

const char* ToString(ClusteringKind kind) {
  for (const auto& [name, k] : kClusteringNames) {
    if (k == kind) return name.c_str();
  }
  return "";
}

LoadedConfig ParseConfig(const json& root) {
  LoadedConfig loaded;
  std::vector<std::string> problems;
  ExperimentConfig& c = loaded.config;
  Reader r(&root, "", &problems, &loaded.defaults);

  if (const auto v = r.Require<int>("schema_version")) {
    c.schema_version = *v;
    if (*v != kSchemaVersion) {
      r.Problem("schema_version", "unsupported version " + std::to_string(*v) +
                                      " (expected " + std::to_string(kSchemaVersion) + ")");
    }
  }

  if (!r.Has("dataset")) {
    r.Problem("dataset", "missing required key");
    r.Child("dataset");
  } else {
    Reader d = r.Child("dataset");
    c.dataset.source = ParseEnum(d, "source", c.dataset.source, kSourceNames, true);
    if (c.dataset.source == DatasetSource::kFile) {
      c.dataset.path = d.Require<std::string>("path").value_or("");
    } else {
      c.dataset.synthetic = ParseSynthetic(d.Child("synthetic"));
      c.dataset.seed = d.Get("seed", c.dataset.seed);
    }
    d.Finish();
  }

  {
    Reader m = r.Child("model");
    c.model.kind = ParseEnum(m, "kind", c.model.kind, kModelNames, false);
    if (c.model.kind == ModelKind::kLinear) {
      Reader l = m.Child("linear");
      LinearSpec& s = c.model.linear;
      s.params_csv = l.Get("params_csv", s.params_csv);
      if (s.params_csv.empty()) {
        s.alpha_mean = l.Get("alpha_mean", s.alpha_mean);
        s.alpha_sd = l.Get("alpha_sd", s.alpha_sd);
        s.beta_mean = l.Get("beta_mean", s.beta_mean);
        s.beta_sd = l.Get("beta_sd", s.beta_sd);
        s.gamma_mean = l.Get("gamma_mean", s.gamma_mean);
        s.gamma_sd = l.Get("gamma_sd", s.gamma_sd);
      }
      s.noise_sd = l.Get("noise_sd", s.noise_sd);
      if (s.alpha_sd < 0 || s.beta_sd < 0 || s.gamma_sd < 0 || s.noise_sd < 0) {
        l.Problem(l.Path("*_sd"), "standard deviations must be >= 0");
      }
      l.Finish();
    } else {
      Reader a = m.Child("auction");
      AuctionSpec& s = c.model.auction;
      s.reserve_spread = a.Get("reserve_spread", s.reserve_spread);
      s.max_participants = a.Get("max_participants", s.max_participants);
      if (c.model.kind == ModelKind::kVcgPositional) {
        s.slots = a.Get("slots", s.slots);
        s.position_curve = a.Get("position_curve", s.position_curve);
        if (!s.position_curve.empty() && s.position_curve.size() != s.slots) {
          a.Problem(a.Path("position_curve"), "length must equal slots");
        }
        if (s.slots < 1) a.Problem(a.Path("slots"), "must be >= 1");
        try {
          PositionCurve curve(PositionValues(s));
        } catch (const Error& e) {
          a.Problem(a.Path("position_curve"), e.what());
        }
      }
      const std::vector<double> band =
          a.Get("reserve_band", std::vector<double>(s.reserve_band.begin(), s.reserve_band.end()));
      if (band.size() != 2 || band[0] < 0.0 || band[0] > band[1] || band[1] > 1.0) {
        a.Problem(a.Path("reserve_band"), "expected [lo, hi] with 0 <= lo <= hi <= 1");
      } else {
        s.reserve_band = {band[0], band[1]};
      }
      if (s.reserve_spread < 0) a.Problem(a.Path("reserve_spread"), "must be >= 0");
      if (s.max_participants < 1) a.Problem(a.Path("max_participants"), "must be >= 1");
      a.Finish();
    }
    m.Finish();
  }

  c.clusterings = ParseClusteringPair(r, "clusterings");
  c.replications = r.Get("replications", c.replications);
  if (c.replications < 2) r.Problem("replications", "must be >= 2");
  c.master_seed = r.Get("master_seed", c.master_seed);
  c.alpha = r.Get("alpha", c.alpha);
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) r.Problem("alpha", "must lie in (0, 1)");
  c.output_dir = r.Get("output_dir", c.output_dir);
  c.simulate_direct = r.Get("simulate_direct", c.simulate_direct);

  {
    Reader f = r.Child("figure2");
    c.figure2.planted = f.Get("planted", c.figure2.planted);
    if (c.figure2.planted) c.figure2.planted_params = ParsePlanted(f.Child("planted_params"));
    c.figure2.metric = ParseEnum(f, "metric", c.figure2.metric, kMetricNames, false);
    c.figure2.ks = f.Get("ks", c.figure2.ks);
    c.figure2.passes = f.Get("passes", c.figure2.passes);
    for (std::size_t k : c.figure2.ks) {
      if (k < 1) f.Problem(f.Path("ks"), "partition counts must be >= 1");
    }
    f.Finish();
  }

  if (auto panels = r.Elements("figure3")) {
    for (std::size_t i = 0; i < panels->size(); ++i) {
      Reader& p = (*panels)[i];
      Figure3Panel panel;
      panel.name = p.Get<std::string>("name", "panel-" + std::to_string(i + 1));
      panel.clusterings = ParseClusteringPair(p, "clusterings");
      p.Finish();
      c.figure3.push_back(std::move(panel));
    }
  } else {
    c.figure3 = DefaultFigure3Panels();
    loaded.defaults.push_back("figure3 = quality, partitions, metric panels");
  }
  r.Finish();

  // Both file clusterings must partition the same bidder set.
  if (problems.empty() && c.clusterings[0].kind == ClusteringKind::kFile &&
      c.clusterings[1].kind == ClusteringKind::kFile) {
    try {
      if (UnitsInClusteringFile(c.clusterings[0].path) !=
          UnitsInClusteringFile(c.clusterings[1].path)) {
        problems.push_back("clusterings: the two clustering files cover different bidder sets");
      }
    } catch (const Error& e) {
      problems.push_back(std::string("clusterings: ") + e.what());
    }
  }

  if (!problems.empty()) {
    std::string message = std::to_string(problems.size()) + " config problem(s):";
    for (const auto& p : problems) message += "\n  " + p;
    throw Error(ErrorCode::kConfig, message);
  }
  return loaded;
}

LoadedConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot read config " + path.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfig, path.string() + ": " + e.what());
  }
  return ParseConfig(root);
}

json ToJson(const ExperimentConfig& c) {
  json dataset = {{"source", c.dataset.source == DatasetSource::kFile ? "file" : "synthetic"}};
  if (c.dataset.source == DatasetSource::kFile) {
    dataset["path"] = c.dataset.path;
  } else {
    dataset["synthetic"] = ToJson(c.dataset.synthetic);
    dataset["seed"] = c.dataset.seed;
  }
  json model = {{"kind", ToString(c.model.kind)}};
  if (c.model.kind == ModelKind::kLinear) {
    const LinearSpec& s = c.model.linear;
    model["linear"] = {{"alpha_mean", s.alpha_mean}, {"alpha_sd", s.alpha_sd},
                       {"beta_mean", s.beta_mean},   {"beta_sd", s.beta_sd},
                       {"gamma_mean", s.gamma_mean}, {"gamma_sd", s.gamma_sd},
                       {"noise_sd", s.noise_sd},     {"params_csv", s.params_csv}};
  } else {
    const AuctionSpec& s = c.model.auction;
    model["auction"] = {{"reserve_spread", s.reserve_spread},
                        {"max_participants", s.max_participants},
                        {"reserve_band", s.reserve_band}};
    if (c.model.kind == ModelKind::kVcgPositional) {
      model["auction"]["slots"] = s.slots;
      model["auction"]["position_curve"] = PositionValues(s);
    }
  }
  json figure2 = {{"planted", c.figure2.planted},
                  {"metric", ToString(c.figure2.metric)},
                  {"ks", c.figure2.ks},
                  {"passes", c.figure2.passes}};
  if (c.figure2.planted) figure2["planted_params"] = ToJson(c.figure2.planted_params);
  json figure3 = json::array();
  for (const auto& panel : c.figure3) {
    figure3.push_back({{"name", panel.name},
                       {"clusterings", {ToJson(panel.clusterings[0]), ToJson(panel.clusterings[1])}}});
  }
  return {{"schema_version", c.schema_version},
          {"dataset", dataset},
          {"model", model},
          {"clusterings", {ToJson(c.clusterings[0]), ToJson(c.clusterings[1])}},
          {"replications", c.replications},
          {"master_seed", c.master_seed},
          {"alpha", c.alpha},
          {"output_dir", c.output_dir},
          {"simulate_direct", c.simulate_direct},
          {"figure2", figure2},
          {"figure3", figure3}};
}

Population LoadPopulation(const DatasetSpec& spec) {
  Population p;
  if (spec.source == DatasetSource::kFile) {
    std::ifstream in(spec.path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open bid log " + spec.path);
    ParseResult parsed = ParseRecords(in);
    p.records = std::move(parsed.records);
  } else {
    p.records = GenerateSyntheticDataset(spec.synthetic, spec.seed);
  }
  if (p.records.empty()) throw Error(ErrorCode::kData, "dataset has no valid records");
  p.graph = BuildBipartiteGraph(p.records, GraphMetric::kBid);
  return p;
}

std::uint64_t ClusteringSeed(std::uint64_t master_seed, std::size_t index) {
  return DeriveSeed(master_seed, kStreamClustering + index);
}

NeighborhoodGraph CoBiddingGraph(const BipartiteGraph& graph) {
  std::vector<std::pair<int, int>> edges;
  for (std::size_t r = 0; r < graph.num_right(); ++r) {
    const auto nbs = graph.neighbors(graph.right_node(static_cast<int>(r)));
    for (std::size_t a = 0; a < nbs.size(); ++a) {
      for (std::size_t b = a + 1; b < nbs.size(); ++b) {
        edges.emplace_back(nbs[a].node, nbs[b].node);
      }
    }
  }
  return NeighborhoodGraph::FromEdges(graph.num_left(), edges);
}

BuiltClustering BuildClustering(const ClusteringSpec& spec,
                                const Population& population,
                                std::uint64_t seed) {
  const std::size_t n = population.graph.left_names.size();
  BuiltClustering out;
  out.info = ToJson(spec);
  switch (spec.kind) {
    case ClusteringKind::kRldg: {
      const LabeledBipartiteGraph metric_graph =
          spec.metric == GraphMetric::kBid
              ? LabeledBipartiteGraph{}
              : BuildBipartiteGraph(population.records, spec.metric);
      const BipartiteGraph& g = spec.metric == GraphMetric::kBid
                                    ? population.graph.graph
                                    : metric_graph.graph;
      RldgOptions options;
      options.k = spec.k;
      options.passes = spec.passes;
      options.seed = seed;
      const RldgResult result = RldgPartition(g, options);
      out.clustering = ProjectBidderPartition(result.state, g);
      out.info["weighted_cut_ratio"] = result.report.weighted_cut_ratio;
      out.info["history"] = result.report.history;
      break;
    }
    case ClusteringKind::kRandom: {
      if (spec.k > n) {
        throw Error(ErrorCode::kConfig, "random clustering k=" + std::to_string(spec.k) +
                                            " exceeds " + std::to_string(n) + " bidders");
      }
      Rng rng = MakeRng(seed);
      const PartitionState state = RandomBalancedPartition(n, spec.k, rng);
      out.clustering = Clustering::FromLabels(state.part_of);
      break;
    }
    case ClusteringKind::kFile: {
      std::ifstream in(spec.path);
      if (!in) throw Error(ErrorCode::kConfig, "cannot open clustering " + spec.path);
      try {
        out.clustering = ReadClustering(in, n);
      } catch (const Error& e) {
        throw Error(ErrorCode::kConfig, spec.path + ": " + e.what());
      }
      break;
    }
  }
  const std::size_t m = out.clustering.num_clusters();
  if (m < 2) {
    throw Error(ErrorCode::kConfig, "clustering " + out.info.dump() + " has " +
                                        std::to_string(m) + " cluster(s); need at least 2");
  }
  std::size_t smallest = n;
  std::size_t largest = 0;
  for (std::size_t j = 0; j < m; ++j) {
    smallest = std::min(smallest, out.clustering.members(j).size());
    largest = std::max(largest, out.clustering.members(j).size());
  }
  out.info["clusters"] = m;
  out.info["smallest"] = smallest;
  out.info["largest"] = largest;
  return out;
}

BuiltModel BuildModel(const ModelSpec& spec, const Population& population,
                      std::uint64_t master_seed) {
  const std::size_t n = population.graph.left_names.size();
  BuiltModel out;
  out.info = {{"kind", ToString(spec.kind)}};
  Rng rng = MakeRng(DeriveSeed(master_seed, kStreamModel));
  std::normal_distribution<double> normal(0.0, 1.0);

  if (spec.kind == ModelKind::kLinear) {
    const LinearSpec& s = spec.linear;
    LinearParams params;
    if (!s.params_csv.empty()) {
      std::ifstream in(s.params_csv);
      if (!in) throw Error(ErrorCode::kConfig, "cannot open " + s.params_csv);
      params = ReadLinearParamsCsv(in);
      if (params.alpha.size() != n) {
        throw Error(ErrorCode::kConfig, s.params_csv + " has " +
                                            std::to_string(params.alpha.size()) +
                                            " units; dataset has " + std::to_string(n));
      }
    } else {
      params.alpha.resize(n);
      params.beta.resize(n);
      params.gamma.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        params.alpha[i] = s.alpha_mean + s.alpha_sd * normal(rng);
        params.beta[i] = s.beta_mean + s.beta_sd * normal(rng);
        params.gamma[i] = s.gamma_mean + s.gamma_sd * normal(rng);
      }
    }
    NeighborhoodGraph graph = CoBiddingGraph(population.graph.graph);
    out.info["units"] = n;
    out.info["interference_edges"] = graph.num_edges();
    out.info["noise_sd"] = s.noise_sd;
    out.model = std::make_unique<LinearInterferenceModel>(std::move(params), s.noise_sd,
                                                          std::move(graph));
    out.noise_seed = DeriveSeed(master_seed, kStreamNoise);
    return out;
  }

  const AuctionSpec& s = spec.auction;
  std::vector<Auction> auctions =
      BuildAuctions(population.records, population.graph, s.max_participants);
  if (auctions.empty()) {
    throw Error(ErrorCode::kData, "no auction has at most " +
                                      std::to_string(s.max_participants) + " participants");
  }
  std::vector<double> medians = MedianBidPerBidder(population.records, population.graph);
  std::vector<double> positive;
  for (double m : medians) {
    if (m > 0.0) positive.push_back(m);
  }
  if (positive.empty()) throw Error(ErrorCode::kData, "every logged bid is zero");
  std::nth_element(positive.begin(), positive.begin() + positive.size() / 2, positive.end());
  const double fallback = positive[positive.size() / 2];

  std::vector<BidderProfile> profiles(n);
  for (std::size_t b = 0; b < n; ++b) {
    const double center = medians[b] > 0.0 ? medians[b] : fallback;
    profiles[b].control_reserve = 0.0;
    profiles[b].treatment_reserve = center * std::exp(s.reserve_spread * normal(rng));
  }
  Mechanism mechanism = SecondPrice{};
  if (spec.kind == ModelKind::kVcgPositional) {
    const PositionCurve curve(PositionValues(s));
    out.info["position_curve"] = curve.values();
    out.info["convex"] = CheckPositionConvexity(curve).convex;
    mechanism = VcgPositional{curve};
  }
  const std::size_t n_auctions = auctions.size();
  auto model = std::make_unique<AuctionOutcomeModel>(std::move(auctions),
                                                     std::move(profiles), mechanism);
  const double rejection = model->TreatedRejectionRate();
  if (rejection < s.reserve_band[0] || rejection > s.reserve_band[1]) {
    std::ostringstream msg;
    msg << "treated reserves reject " << rejection * 100.0
        << "% of participations, outside the band [" << s.reserve_band[0] << ", "
        << s.reserve_band[1] << "]; adjust model.auction.reserve_spread";
    throw Error(ErrorCode::kConfig, msg.str());
  }
  out.info["auctions"] = n_auctions;
  out.info["max_participants"] = s.max_participants;
  out.info["treated_rejection_rate"] = rejection;
  out.model = std::move(model);
  return out;
}

namespace {

ComparisonReport RunComparisonPipelineWith(const ExperimentConfig& config,
                                           const Population* population) {
  const Prepared p = Prepare(config, population);
  const PotentialOutcomeModel& model = *p.model.model;
  const Clustering& c1 = p.clusterings[0].clustering;
  const Clustering& c2 = p.clusterings[1].clustering;
  const Direction direction = p.monotonicity == MonotonicityKind::kDecreasing
                                  ? Direction::kDecreasing
                                  : Direction::kIncreasing;

  ComparisonReport report;
  report.config = ToJson(config);
  report.population = PopulationJson(p);
  report.clusterings = {p.clusterings[0].info, p.clusterings[1].info};
  report.tte = p.tte;
  report.monotonicity = p.monotonicity;
  report.monotonicity_basis = p.monotonicity_basis;

  const auto* linear = dynamic_cast<const LinearInterferenceModel*>(&model);
  if (config.simulate_direct) {
    std::array<EstimateSummary, 2> direct;
    for (std::size_t i = 0; i < 2; ++i) {
      const ClusterDesign design(p.clusterings[i].clustering, "direct-" + std::to_string(i + 1));
      report.direct_samples[i] = MonteCarloExpectation(
          design, model, config.replications,
          DeriveSeed(config.master_seed, kStreamDirect + i), p.model.noise_seed);
      direct[i] = Summarize(*report.direct_samples[i], 0);
      if (linear) direct[i].closed_form = LinearClosedFormExpectation(*linear, p.clusterings[i].clustering);
    }
    report.direct = direct;
  }

  const ExperimentOfExperiments eoe(c1, c2);
  report.eoe_samples = MonteCarloExpectation(eoe, model, config.replications,
                                             DeriveSeed(config.master_seed, kStreamEoE),
                                             p.model.noise_seed);
  report.eoe = {Summarize(report.eoe_samples, 0), Summarize(report.eoe_samples, 1)};

  // One realization, as an experimenter would run it.
  {
    const std::uint64_t seed = DeriveSeed(config.master_seed, kStreamSingle);
    json single = {{"seed", seed}};
    try {
      const EoEDesign design = EoEAssign(c1, c2, seed);
      const auto y = model.Outcomes(design.z, p.model.noise_seed);
      std::array<HTEstimate, 2> est;
      std::array<VarianceEstimate, 2> var;
      json arms = json::array();
      for (std::size_t k = 0; k < 2; ++k) {
        const ArmDesign& arm = design.arms[k];
        std::vector<double> arm_y(arm.induced.units.size());
        for (std::size_t pos = 0; pos < arm_y.size(); ++pos) arm_y[pos] = y[arm.induced.units[pos]];
        est[k] = HtEstimate(arm_y, arm.z_clusters, arm.induced.clustering);
        var[k] = NeymannVariance(arm_y, arm.z_clusters, arm.induced.clustering);
        arms.push_back({{"tau_hat", est[k].tau_hat},
                        {"sigma_hat", var[k].sigma_hat},
                        {"units", est[k].n_units},
                        {"m_treated", est[k].m_treated},
                        {"m_control", est[k].m_control}});
      }
      single["arms"] = arms;
      single["verdict"] = ToJson(CompareClusterings(est[0], var[0], est[1], var[1],
                                                    config.alpha, direction));
    } catch (const Error& e) {
      single["error"] = e.what();
    }
    report.single_realization = single;
  }

  // The same test on the Monte-Carlo means, with their sampling covariance.
  {
    const auto& a = report.eoe_samples.arms;
    const std::size_t r = a[0].tau_hat.size();
    double cov = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
      cov += (a[0].tau_hat[i] - a[0].mean) * (a[1].tau_hat[i] - a[1].mean);
    }
    cov /= static_cast<double>(r - 1) * static_cast<double>(r);
    const double s1 = a[0].stderr_mean * a[0].stderr_mean;
    const double s2 = a[1].stderr_mean * a[1].stderr_mean;
    const double rho = s1 > 0.0 && s2 > 0.0 ? std::clamp(cov / std::sqrt(s1 * s2), -1.0, 1.0) : 0.0;
    HTEstimate e1;
    HTEstimate e2;
    e1.tau_hat = a[0].mean;
    e2.tau_hat = a[1].mean;
    VarianceEstimate v1;
    VarianceEstimate v2;
    v1.sigma_hat = s1;
    v2.sigma_hat = s2;
    try {
      report.aggregate_verdict = CompareClusterings(e1, v1, e2, v2, config.alpha, direction, rho);
    } catch (const Error&) {
      report.aggregate_verdict.reset();
    }
  }

  if (report.direct) {
    const auto sign = [](double x) { return (x > 0.0) - (x < 0.0); };
    report.ordering_consistent = sign((*report.direct)[0].mean - (*report.direct)[1].mean) ==
                                 sign(report.eoe[0].mean - report.eoe[1].mean);
  }
  if (p.monotonicity != MonotonicityKind::kIndeterminate) {
    const bool increasing = p.monotonicity == MonotonicityKind::kIncreasing;
    bool consistent = true;
    auto check = [&](const EstimateSummary& s) {
      consistent &= increasing ? s.mean <= p.tte + 3.0 * s.stderr_mean
                               : s.mean >= p.tte - 3.0 * s.stderr_mean;
    };
    if (report.direct) {
      for (const auto& s : *report.direct) check(s);
    }
    for (const auto& s : report.eoe) check(s);
    report.monotonicity_consistent = consistent;
  }
  return report;
}

}  // namespace

ComparisonReport RunComparisonPipeline(const ExperimentConfig& config) {
  return RunComparisonPipelineWith(config, nullptr);
}

json ToJson(const ComparisonReport& r) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["config"] = r.config;
  j["population"] = r.population;
  j["clusterings"] = {r.clusterings[0], r.clusterings[1]};
  j["tte"] = r.tte;
  j["monotonicity"] = {{"kind", ToString(r.monotonicity)}, {"basis", r.monotonicity_basis}};
  if (r.direct) {
    j["direct"] = {ToJson((*r.direct)[0], r.tte), ToJson((*r.direct)[1], r.tte)};
  } else {
    j["direct"] = nullptr;
  }
  j["eoe"] = {ToJson(r.eoe[0], r.tte), ToJson(r.eoe[1], r.tte)};
  j["single_realization"] = r.single_realization;
  j["aggregate_verdict"] = r.aggregate_verdict ? ToJson(*r.aggregate_verdict) : json(nullptr);
  j["ordering_consistent"] = r.ordering_consistent ? json(*r.ordering_consistent) : json(nullptr);
  j["monotonicity_consistent"] =
      r.monotonicity_consistent ? json(*r.monotonicity_consistent) : json(nullptr);
  return j;
}

void WriteComparisonArtifacts(const ComparisonReport& report,
                              const std::filesystem::path& dir, bool csv) {
  std::filesystem::create_directories(dir);
  if (csv) {
    std::string text = "estimator,mean,stderr,bias,tte\n";
    auto row = [&](const EstimateSummary& s) {
      text += s.name + "," + CsvNumber(s.mean) + "," + CsvNumber(s.stderr_mean) + "," +
              CsvNumber(s.mean - report.tte) + "," + CsvNumber(report.tte) + "\n";
    };
    if (report.direct) {
      for (const auto& s : *report.direct) row(s);
    }
    for (const auto& s : report.eoe) row(s);
    WriteFile(dir / "report.csv", text);
  } else {
    WriteFile(dir / "report.json", ToJson(report).dump(2) + "\n");
  }
  for (std::size_t i = 0; i < 2; ++i) {
    if (report.direct_samples[i]) {
      WriteSamples(dir / ("samples_direct_" + std::to_string(i + 1) + ".csv"),
                   *report.direct_samples[i]);
    }
  }
  WriteSamples(dir / "samples_eoe.csv", report.eoe_samples);
}

SimulationReport RunSimulation(const ExperimentConfig& config) {
  const Prepared p = Prepare(config, nullptr);
  SimulationReport out;
  json direct = json::array();
  const auto* linear = dynamic_cast<const LinearInterferenceModel*>(p.model.model.get());
  for (std::size_t i = 0; i < 2; ++i) {
    const ClusterDesign design(p.clusterings[i].clustering, "direct-" + std::to_string(i + 1));
    out.samples[i] = MonteCarloExpectation(design, *p.model.model, config.replications,
                                           DeriveSeed(config.master_seed, kStreamDirect + i),
                                           p.model.noise_seed);
    EstimateSummary s = Summarize(out.samples[i], 0);
    if (linear) s.closed_form = LinearClosedFormExpectation(*linear, p.clusterings[i].clustering);
    direct.push_back(ToJson(s, p.tte));
  }
  out.summary = {{"schema_version", kSchemaVersion},
                 {"config", ToJson(config)},
                 {"population", PopulationJson(p)},
                 {"clusterings", {p.clusterings[0].info, p.clusterings[1].info}},
                 {"tte", p.tte},
                 {"monotonicity", {{"kind", ToString(p.monotonicity)},
                                   {"basis", p.monotonicity_basis}}},
                 {"direct", direct}};
  return out;
}

std::vector<Figure2Row> ReproduceFigure2(const ExperimentConfig& config) {
  const Figure2Spec& spec = config.figure2;
  BipartiteGraph graph;
  if (spec.planted) {
    graph = MakePlantedBipartite(spec.planted_params,
                                 DeriveSeed(config.master_seed, kStreamFigure2))
                .graph;
  } else {
    const Population population = LoadPopulation(config.dataset);
    graph = spec.metric == GraphMetric::kBid
                ? population.graph.graph
                : BuildBipartiteGraph(population.records, spec.metric).graph;
  }
  std::vector<Figure2Row> rows;
  for (std::size_t idx = 0; idx < spec.ks.size(); ++idx) {
    const std::size_t k = spec.ks[idx];
    if (k > graph.num_left()) {
      throw Error(ErrorCode::kConfig, "figure2 k=" + std::to_string(k) + " exceeds " +
                                          std::to_string(graph.num_left()) + " bidders");
    }
    Rng rng = MakeRng(DeriveSeed(DeriveSeed(config.master_seed, kStreamFigure2), idx + 1));
    const PartitionState random =
        RandomBalancedPartition(graph.num_nodes(), k, rng, graph.num_left());
    rows.push_back({k, "random", 0, WeightedCutRatio(graph, random)});
    RldgOptions options;
    options.k = k;
    options.passes = spec.passes;
    const RldgResult result = RldgPartition(graph, options);
    for (std::size_t pass = 0; pass < result.report.history.size(); ++pass) {
      rows.push_back({k, "rldg", pass + 1, result.report.history[pass]});
    }
  }
  return rows;
}

void WriteFigure2Csv(std::ostream& out, const std::vector<Figure2Row>& rows) {
  out << "k,method,pass,cut_ratio\n";
  for (const auto& r : rows) {
    out << r.k << ',' << r.method << ',' << r.pass << ',' << CsvNumber(r.cut_ratio) << '\n';
  }
}

Figure3Result ReproduceFigure3(const ExperimentConfig& config) {
  Figure3Result result;
  const Population population = LoadPopulation(config.dataset);
  const std::vector<Figure3Panel> panels =
      config.figure3.empty() ? DefaultFigure3Panels() : config.figure3;
  for (const auto& panel : panels) {
    ExperimentConfig panel_config = config;
    panel_config.clusterings = panel.clusterings;
    panel_config.simulate_direct = true;
    result.panels.push_back(panel.name);
    result.reports.push_back(RunComparisonPipelineWith(panel_config, &population));
  }
  return result;
}

void WriteFigure3Csv(std::ostream& out, const Figure3Result& result) {
  out << "panel,estimator,replicate,tau_hat,tte\n";
  for (std::size_t p = 0; p < result.reports.size(); ++p) {
    const ComparisonReport& report = result.reports[p];
    auto emit = [&](const MonteCarloResult& mc) {
      for (const auto& arm : mc.arms) {
        for (std::size_t i = 0; i < arm.tau_hat.size(); ++i) {
          out << result.panels[p] << ',' << arm.name << ',' << mc.kept[i] << ','
              << CsvNumber(arm.tau_hat[i]) << ',' << CsvNumber(report.tte) << '\n';
        }
      }
    };
    for (const auto& d : report.direct_samples) {
      if (d) emit(*d);
    }
    emit(report.eoe_samples);
  }
}

}  // namespace cbexp
