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

// cbexp: command-line front end for the experiment harness.
//
//   cbexp gen-data  [--config c.json] [--seed S] [--out DIR] [--format csv|json]
//   cbexp partition --config c.json [--seed S] [--out DIR]
//   cbexp simulate  --config c.json [--replications R] [--out DIR]
//   cbexp compare   --config c.json [--check]
//   cbexp figure2   --config c.json [--check]
//   cbexp figure3   --config c.json [--check]
//
// Exit codes: 0 success, 1 config error, 2 runtime error, 3 check failure.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "cbexp/core.h"
#include "cbexp/data_io.h"
#include "cbexp/harness.h"

namespace {

using cbexp::ErrorCode;
using nlohmann::json;

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;
constexpr int kCheckFailed = 3;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replications;
  std::optional<std::string> out;
  std::string format = "json";
  bool check = false;
};

cbexp::ExperimentConfig Resolve(const Options& opt, bool config_required) {
  cbexp::LoadedConfig loaded;
  if (!opt.config.empty()) {
    loaded = cbexp::LoadConfig(opt.config);
  } else if (config_required) {
    throw cbexp::Error(ErrorCode::kConfig, "--config is required");
  } else {
    loaded = cbexp::ParseConfig(
        {{"schema_version", cbexp::kSchemaVersion},
         {"dataset", {{"source", "synthetic"}}},
         {"clusterings", {{{"kind", "rldg"}}, {{"kind", "random"}}}}});
  }
  for (const auto& d : loaded.defaults) std::cerr << "default: " << d << '\n';
  cbexp::ExperimentConfig config = loaded.config;
  if (opt.seed) config.master_seed = *opt.seed;
  if (opt.replications) {
    if (*opt.replications < 2) {
      throw cbexp::Error(ErrorCode::kConfig, "--replications must be >= 2");
    }
    config.replications = *opt.replications;
  }
  if (opt.out) config.output_dir = *opt.out;
  return config;
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw cbexp::Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

std::filesystem::path OutputDir(const cbexp::ExperimentConfig& config) {
  std::filesystem::path dir(config.output_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Flattens nested objects into "a.b.c,value" rows.
void FlattenCsv(const json& j, const std::string& prefix, std::string& out) {
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) {
      FlattenCsv(value, prefix.empty() ? key : prefix + "." + key, out);
    }
  } else {
    out += prefix + "," + j.dump() + "\n";
  }
}

int GenData(const Options& opt) {
  cbexp::ExperimentConfig config = Resolve(opt, false);
  if (opt.seed) config.dataset.seed = *opt.seed;
  const cbexp::Population population = cbexp::LoadPopulation(config.dataset);
  const auto dir = OutputDir(config);
  {
    std::ofstream out(dir / "bids.txt", std::ios::binary);
    cbexp::WriteRecords(out, population.records);
  }
  for (auto metric : {cbexp::GraphMetric::kBid, cbexp::GraphMetric::kImpressions,
                      cbexp::GraphMetric::kClicks, cbexp::GraphMetric::kRank}) {
    std::ofstream out(dir / (std::string("graph_") + cbexp::ToString(metric) + ".csv"),
                      std::ios::binary);
    cbexp::WriteBipartiteCsv(out, cbexp::BuildBipartiteGraph(population.records, metric));
  }
  const json summary = cbexp::SummarizeDataset(population.records);
  if (opt.format == "csv") {
    std::string text = "statistic,value\n";
    FlattenCsv(summary, "", text);
    WriteText(dir / "dataset_summary.csv", text);
  } else {
    WriteText(dir / "dataset_summary.json", summary.dump(2) + "\n");
  }
  std::cout << population.records.size() << " records, "
            << population.graph.left_names.size() << " bidders, "
            << population.graph.right_names.size() << " keyphrases -> " << dir.string()
            << '\n';
  if (!opt.check) return kOk;
  const double kp_bids = summary["per_keyphrase"]["bids"]["median"];
  const double bidder_bids = summary["per_bidder"]["bids"]["median"];
  const double kp_value = summary["per_keyphrase"]["mean_bid_cents"]["median"];
  const double bidder_value = summary["per_bidder"]["mean_bid_cents"]["median"];
  bool ok = true;
  auto expect = [&](const char* name, double value, double lo, double hi) {
    const bool pass = value >= lo && value <= hi;
    std::cout << (pass ? "PASS " : "FAIL ") << name << " = " << value << " in [" << lo
              << ", " << hi << "]\n";
    ok &= pass;
  };
  expect("per-keyphrase median bid count", kp_bids, 1.0, 3.0);
  expect("per-bidder median bid count", bidder_bids, 8.0, 10.0);
  expect("per-keyphrase median bid (cents)", kp_value, 54.0, 72.6);
  expect("per-bidder median bid (cents)", bidder_value, 54.0, 72.6);
  return ok ? kOk : kCheckFailed;
}

int Partition(const Options& opt) {
  const cbexp::ExperimentConfig config = Resolve(opt, true);
  const cbexp::Population population = cbexp::LoadPopulation(config.dataset);
  const auto dir = OutputDir(config);
  json report = json::array();
  for (std::size_t i = 0; i < 2; ++i) {
    const auto built = cbexp::BuildClustering(
        config.clusterings[i], population,
        cbexp::ClusteringSeed(config.master_seed, i));
    std::ofstream out(dir / ("clustering_" + std::to_string(i + 1) + ".tsv"),
                      std::ios::binary);
    cbexp::WriteClustering(out, built.clustering);
    report.push_back(built.info);
  }
  {
    std::ofstream out(dir / "bidders.txt", std::ios::binary);
    for (const auto& name : population.graph.left_names) out << name << '\n';
  }
  WriteText(dir / "partition_report.json", report.dump(2) + "\n");
  std::cout << report.dump(2) << '\n';
  return kOk;
}

int Simulate(const Options& opt) {
  const cbexp::ExperimentConfig config = Resolve(opt, true);
  const cbexp::SimulationReport report = cbexp::RunSimulation(config);
  const auto dir = OutputDir(config);
  WriteText(dir / "simulation.json", report.summary.dump(2) + "\n");
  for (std::size_t i = 0; i < 2; ++i) {
    std::ofstream out(dir / ("samples_direct_" + std::to_string(i + 1) + ".csv"),
                      std::ios::binary);
    cbexp::WriteSamplesCsv(out, report.samples[i]);
  }
  std::cout << "tte " << report.summary["tte"] << '\n';
  for (const auto& d : report.summary["direct"]) {
    std::cout << d["name"].get<std::string>() << " mean " << d["mean"] << " stderr "
              << d["stderr"] << '\n';
  }
  return kOk;
}

bool ReportChecks(const cbexp::ComparisonReport& report, const std::string& label) {
  bool ok = true;
  auto expect = [&](const char* what, const std::optional<bool>& flag) {
    if (!flag) {
      std::cout << "SKIP " << label << what << " (not computable)\n";
      return;
    }
    std::cout << (*flag ? "PASS " : "FAIL ") << label << what << '\n';
    ok &= *flag;
  };
  expect("monotonicity consistent", report.monotonicity_consistent);
  expect("EoE ordering matches direct ordering", report.ordering_consistent);
  return ok;
}

void PrintReport(const cbexp::ComparisonReport& report) {
  std::cout << "tte " << report.tte << " (" << cbexp::ToString(report.monotonicity)
            << ")\n";
  auto line = [&](const cbexp::EstimateSummary& s) {
    std::cout << "  " << s.name << " mean " << s.mean << " stderr " << s.stderr_mean
              << " bias " << s.mean - report.tte << '\n';
  };
  if (report.direct) {
    for (const auto& s : *report.direct) line(s);
  }
  for (const auto& s : report.eoe) line(s);
  if (report.aggregate_verdict) {
    std::cout << "  verdict " << cbexp::ToString(report.aggregate_verdict->better)
              << " (statistic " << report.aggregate_verdict->statistic << ")\n";
  }
}

int Compare(const Options& opt) {
  const cbexp::ExperimentConfig config = Resolve(opt, true);
  const cbexp::ComparisonReport report = cbexp::RunComparisonPipeline(config);
  cbexp::WriteComparisonArtifacts(report, config.output_dir, opt.format == "csv");
  PrintReport(report);
  if (!opt.check) return kOk;
  return ReportChecks(report, "") ? kOk : kCheckFailed;
}

int Figure2(const Options& opt) {
  const cbexp::ExperimentConfig config = Resolve(opt, true);
  const auto rows = cbexp::ReproduceFigure2(config);
  const auto dir = OutputDir(config);
  if (opt.format == "csv") {
    std::ofstream out(dir / "figure2.csv", std::ios::binary);
    cbexp::WriteFigure2Csv(out, rows);
  } else {
    json j = json::array();
    for (const auto& r : rows) {
      j.push_back({{"k", r.k}, {"method", r.method}, {"pass", r.pass},
                   {"cut_ratio", r.cut_ratio}});
    }
    WriteText(dir / "figure2.json", j.dump(2) + "\n");
  }
  cbexp::WriteFigure2Csv(std::cout, rows);
  if (!opt.check) return kOk;
  bool ok = true;
  for (const auto& r : rows) {
    if (r.method != "random") continue;
    const double expected = (static_cast<double>(r.k) - 1.0) / static_cast<double>(r.k);
    const bool pass = std::abs(r.cut_ratio - expected) <= 0.02;
    std::cout << (pass ? "PASS " : "FAIL ") << "random k=" << r.k << " cut " << r.cut_ratio
              << " vs " << expected << '\n';
    ok &= pass;
  }
  return ok ? kOk : kCheckFailed;
}

int Figure3(const Options& opt) {
  const cbexp::ExperimentConfig config = Resolve(opt, true);
  const cbexp::Figure3Result result = cbexp::ReproduceFigure3(config);
  const auto dir = OutputDir(config);
  {
    std::ofstream out(dir / "figure3.csv", std::ios::binary);
    cbexp::WriteFigure3Csv(out, result);
  }
  json reports = json::object();
  bool ok = true;
  for (std::size_t p = 0; p < result.reports.size(); ++p) {
    reports[result.panels[p]] = cbexp::ToJson(result.reports[p]);
    std::cout << "[" << result.panels[p] << "] ";
    PrintReport(result.reports[p]);
    if (opt.check) ok &= ReportChecks(result.reports[p], result.panels[p] + ": ");
  }
  WriteText(dir / "figure3_reports.json", reports.dump(2) + "\n");
  return ok ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cluster-based experiment design and experiment-of-experiments tools"};
  app.require_subcommand(1);
  Options opt;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replications;
  std::optional<std::string> out;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", opt.config, "JSON experiment config");
    if (config_required) c->required();
    c->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the master seed");
    sub->add_option("--replications", replications, "override Monte-Carlo replications");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--format", opt.format, "summary format")
        ->check(CLI::IsMember({"csv", "json"}));
    sub->add_flag("--check", opt.check, "verify expected properties; exit 3 on failure");
  };

  int (*run)(const Options&) = nullptr;
  struct Command {
    const char* name;
    const char* help;
    bool config_required;
    int (*fn)(const Options&);
  };
  const Command commands[] = {
      {"gen-data", "generate a synthetic bid log and its graphs", false, GenData},
      {"partition", "build the two configured clusterings", true, Partition},
      {"simulate", "Monte-Carlo the direct cluster-based designs", true, Simulate},
      {"compare", "run the experiment-of-experiments comparison", true, Compare},
      {"figure2", "cut ratio per R-LDG pass against a random baseline", true, Figure2},
      {"figure3", "estimator distributions for the three comparison panels", true, Figure3},
  };
  for (const auto& cmd : commands) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    add_common(sub, cmd.config_required);
    sub->callback([&run, fn = cmd.fn] { run = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  opt.seed = seed;
  opt.replications = replications;
  opt.out = out;

  try {
    return run(opt);
  } catch (const cbexp::Error& e) {
    std::cerr << "error [" << cbexp::ErrorCodeName(e.code()) << "]: " << e.what() << '\n';
    return e.code() == ErrorCode::kConfig ? kConfigError : kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}
