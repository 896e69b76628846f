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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cbexp/auctions.h"
#include "cbexp/data_io.h"
#include "cbexp/harness.h"
#include "cbexp/interference.h"
#include "cbexp/monte_carlo.h"
#include "cbexp/partitioning.h"
#include "test_util.h"

namespace cbexp {
namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;
using Vec = std::vector<double>;

double Seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Fails the criterion, keeping the first reason.
void Fail(Outcome& o, const std::string& why) {
  if (o.pass) o.detail = why;
  o.pass = false;
}

std::string Fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c);
  return buf;
}

NeighborhoodGraph RandomGraph(std::size_t n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution edge(p);
  std::vector<std::pair<int, int>> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (edge(rng)) edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
  }
  return NeighborhoodGraph::FromEdges(n, edges);
}

// 1. Exhaustive HT mean equals the TTE under SUTVA.
Outcome HtUnbiasedUnderSutva() {
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  std::normal_distribution<double> normal(0.0, 3.0);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + trial % 11;
    const std::size_t m = 2 + rng() % (n - 1);
    const std::size_t mt = 1 + rng() % (m - 1);
    Vec a(n), b(n);
    for (auto& x : a) x = normal(rng);
    for (auto& x : b) x = normal(rng);
    const testing::SutvaModel model(a, b);
    const Clustering c = Clustering::FromLabels(testing::RandomLabels(n, m, rng));
    const double mean = ExhaustiveClusterDesign(c, model, mt, std::nullopt).mean_tau;
    worst = std::max(worst, std::abs(mean - model.Tte()));
  }
  const double t = Seconds(start);
  if (worst > 1e-10) Fail(o, Fmt("max |E - TTE| = %.3g", worst));
  if (t >= 10.0) Fail(o, Fmt("took %.1f s", t));
  if (o.pass) o.detail = Fmt("50 instances, max |E - TTE| = %.3g, %.2f s", worst, t);
  return o;
}

// 2. Linear model: MC mean vs the closed form, plus the homogeneous formula.
Outcome LinearClosedForm() {
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 rng(202);
  std::normal_distribution<double> normal;
  const std::size_t n = 100, m = 10;
  double worst_z = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    LinearParams p;
    const double gamma_mean = trial % 2 ? 1.0 : -0.5;
    for (std::size_t i = 0; i < n; ++i) {
      p.alpha.push_back(normal(rng));
      p.beta.push_back(1.0 + 0.5 * normal(rng));
      p.gamma.push_back(gamma_mean + 0.5 * normal(rng));
    }
    const LinearInterferenceModel model(p, 0.5, RandomGraph(n, 0.04 + 0.01 * (trial % 5), rng));
    const Clustering c = Clustering::FromLabels(testing::RandomLabels(n, m, rng));
    const double closed = LinearClosedFormExpectation(model, c);
    const auto mc = MonteCarloExpectation(ClusterDesign(c), model, 10000, 1000 + trial, 77);
    const double z = std::abs(mc.arms[0].mean - closed) / mc.arms[0].stderr_mean;
    worst_z = std::max(worst_z, z);
    if (z > 3.0) Fail(o, Fmt("trial %.0f off by %.2f SE", trial, z));
  }
  // Homogeneous gamma: bias is gamma M/(M-1) (1 - mean theta), with theta
  // counted here straight from the edge lists.
  double worst_h = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const double gamma = 0.3 + 0.1 * trial;
    LinearParams p;
    for (std::size_t i = 0; i < n; ++i) {
      p.alpha.push_back(normal(rng));
      p.beta.push_back(normal(rng));
      p.gamma.push_back(gamma);
    }
    const NeighborhoodGraph g = RandomGraph(n, 0.05, rng);
    const LinearInterferenceModel model(p, 0.0, g);
    const auto labels = testing::RandomLabels(n, m, rng);
    const Clustering c = Clustering::FromLabels(labels);
    double theta = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto nb = g.neighbors(i);
      if (nb.empty()) {
        theta += 1.0;
        continue;
      }
      double same = 0.0;
      for (int j : nb) same += labels[j] == labels[i];
      theta += same / static_cast<double>(nb.size());
    }
    theta /= static_cast<double>(n);
    const double md = static_cast<double>(m);
    const double expected = gamma * md / (md - 1.0) * (1.0 - theta);
    const double tte = TotalTreatmentEffect(model, std::nullopt);
    const double exhaustive = ExhaustiveClusterDesign(c, model, m / 2, std::nullopt).mean_tau;
    worst_h = std::max({worst_h, std::abs(LinearClosedFormBias(model, c) - expected),
                        std::abs(tte - exhaustive - expected)});
  }
  if (worst_h > 1e-10) Fail(o, Fmt("homogeneous formula off by %.3g", worst_h));
  const double t = Seconds(start);
  if (t >= 60.0) Fail(o, Fmt("took %.1f s", t));
  if (o.pass) {
    o.detail = Fmt("20 models, max |MC - closed| = %.2f SE; homogeneous max err %.3g; %.1f s",
                   worst_z, worst_h, t);
  }
  return o;
}

// Random reserve-price market: n bidders, a few auctions with random
// participation, treated reserves above control ones.
AuctionOutcomeModel RandomMarket(std::size_t n, std::mt19937_64& rng, Mechanism mech) {
  std::uniform_real_distribution<double> res(0.0, 10.0);
  std::uniform_real_distribution<double> bump(0.5, 8.0);
  std::uniform_int_distribution<int> value(1, 20);
  std::bernoulli_distribution joins(0.6);
  std::vector<BidderProfile> profiles(n);
  for (auto& p : profiles) {
    p.control_reserve = res(rng);
    p.treatment_reserve = p.control_reserve + bump(rng);
  }
  std::vector<Auction> auctions(1 + rng() % 4);
  for (auto& a : auctions) {
    for (std::size_t i = 0; i < n; ++i) {
      if (joins(rng)) {
        a.bidders.push_back(static_cast<int>(i));
        a.values.push_back(value(rng));
      }
    }
    if (a.bidders.empty()) {
      a.bidders.push_back(0);
      a.values.push_back(value(rng));
    }
  }
  return AuctionOutcomeModel(std::move(auctions), std::move(profiles), std::move(mech));
}

// 3. Second-price reserve experiments are pointwise self-exciting.
Outcome SecondPriceSelfExciting() {
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 rng(303);
  std::size_t comparisons = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto model = RandomMarket(1 + trial % 8, rng, SecondPrice{});
    const auto report = PointwiseMonotonicityCheck(model, 8);
    comparisons += report.comparisons;
    if (!report.holds) Fail(o, Fmt("violation on instance %.0f", trial));
  }
  const double t = Seconds(start);
  if (t >= 30.0) Fail(o, Fmt("took %.1f s", t));
  if (o.pass) o.detail = Fmt("200 instances, %.0f comparisons, 0 violations, %.2f s", comparisons, t);
  return o;
}

// Strictly decreasing curve with non-increasing drops, so second differences
// are non-negative.
PositionCurve RandomConvexCurve(std::size_t m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Vec drops(m - 1);
  for (auto& d : drops) d = u(rng);
  std::sort(drops.rbegin(), drops.rend());
  const double top = std::uniform_real_distribution<double>(0.5, 1.0)(rng);
  const double total = std::accumulate(drops.begin(), drops.end(), 0.0);
  const double scale = top * std::uniform_real_distribution<double>(0.3, 0.95)(rng) / total;
  Vec pos = {top};
  for (double d : drops) pos.push_back(pos.back() - d * scale);
  return PositionCurve(pos);
}

// Ranking of valid bidders by value, ties to the lower index.
std::vector<int> Ranking(const Vec& v, const Vec& r, int exclude) {
  std::vector<int> order;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (static_cast<int>(i) != exclude && v[i] >= r[i]) order.push_back(static_cast<int>(i));
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return v[a] > v[b]; });
  return order;
}

double OthersWelfare(const Vec& v, const Vec& r, const Vec& pos, int exclude, int skip) {
  const auto order = Ranking(v, r, exclude);
  double w = 0.0;
  for (std::size_t k = 0; k < order.size() && k < pos.size(); ++k) {
    if (order[k] != skip) w += pos[k] * v[order[k]];
  }
  return w;
}

// 4. VCG positional auctions with convex curves are self-exciting, and
// payments equal externalities.
Outcome VcgSelfExciting() {
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 rng(404);
  double worst_pay = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + trial % 4;
    const PositionCurve curve = RandomConvexCurve(m, rng);
    if (!CheckPositionConvexity(curve).convex) {
      Fail(o, "generated curve is not convex");
      continue;
    }
    const auto model = RandomMarket(1 + rng() % 8, rng, VcgPositional{curve});
    if (!PointwiseMonotonicityCheck(model, 8).holds) {
      Fail(o, Fmt("violation on instance %.0f", trial));
    }
    const Vec pos(curve.values().begin(), curve.values().end());
    for (const auto& a : model.auctions()) {
      for (int treated = 0; treated < 2; ++treated) {
        Vec r;
        for (int b : a.bidders) {
          const auto& p = model.profiles()[b];
          r.push_back(treated ? p.treatment_reserve : p.control_reserve);
        }
        const auto out = RunVcgPositional(a.values, r, curve);
        for (std::size_t i = 0; i < a.values.size(); ++i) {
          const int ii = static_cast<int>(i);
          const double oracle = OthersWelfare(a.values, r, pos, ii, -1) -
                                OthersWelfare(a.values, r, pos, -1, ii);
          worst_pay = std::max(worst_pay, std::abs(out.payments[i] - oracle));
        }
      }
    }
  }
  if (worst_pay > 1e-9) Fail(o, Fmt("payment differs from externality by %.3g", worst_pay));
  const double t = Seconds(start);
  if (t >= 60.0) Fail(o, Fmt("took %.1f s", t));
  if (o.pass) {
    o.detail = Fmt("200 instances, 0 violations, max payment error %.3g, %.2f s", worst_pay, t);
  }
  return o;
}

json DeskConfig(const char* model, std::size_t k) {
  return {{"schema_version", 1},
          {"dataset", {{"source", "synthetic"}, {"seed", 1}}},
          {"model", {{"kind", model}}},
          {"clusterings", {{{"kind", "rldg"}, {"k", k}}, {{"kind", "random"}, {"k", k}}}},
          {"replications", 2000},
          {"master_seed", 7}};
}

// 5. Every estimate of the reserve-price pipeline lies below the TTE.
Outcome ReservePipelineUnderestimates() {
  Outcome o;
  const auto start = Clock::now();
  const auto report = RunComparisonPipeline(ParseConfig(DeskConfig("second_price", 50)).config);
  std::vector<EstimateSummary> all(report.eoe.begin(), report.eoe.end());
  if (report.direct) all.insert(all.begin(), report.direct->begin(), report.direct->end());
  if (all.size() != 4) Fail(o, "expected four estimates");
  double least = 1e300;
  for (const auto& s : all) {
    const double gap = (report.tte - s.mean) / s.stderr_mean;
    least = std::min(least, gap);
    if (gap <= 2.0) Fail(o, s.name + Fmt(" only %.2f SE below TTE", gap));
  }
  if (o.pass) {
    o.detail = Fmt("TTE %.4f, all 4 means below by >= %.1f SE, %.1f s", report.tte, least,
                   Seconds(start));
  }
  return o;
}

// 6. Community clustering beats random both directly and within EoE, with
// the EoE gap about half the direct gap.
Outcome BiasOrdering() {
  Outcome o;
  const auto start = Clock::now();
  const auto report = RunComparisonPipeline(ParseConfig(DeskConfig("linear", 10)).config);
  if (!report.direct) {
    Fail(o, "direct designs were not simulated");
    return o;
  }
  auto gap = [&](const EstimateSummary& a, const EstimateSummary& b, const std::string& what) {
    const double g = a.mean - b.mean;
    const double se = std::hypot(a.stderr_mean, b.stderr_mean);
    if (g <= 2.0 * se) Fail(o, what + Fmt(" gap %.4f not above 2 SE = %.4f", g, 2.0 * se));
    return g;
  };
  const double direct = gap((*report.direct)[0], (*report.direct)[1], "direct");
  const double eoe = gap(report.eoe[0], report.eoe[1], "eoe");
  const double ratio = eoe / direct;
  if (ratio < 0.35 || ratio > 0.65) Fail(o, Fmt("gap ratio %.3f outside [0.35, 0.65]", ratio));
  const double t = Seconds(start);
  if (t >= 300.0) Fail(o, Fmt("took %.1f s", t));
  if (o.pass) {
    o.detail = Fmt("direct gap %.4f, eoe gap %.4f, ratio %.3f", direct, eoe, ratio) +
               Fmt(", %.1f s", t);
  }
  return o;
}

// 7. Neymann variance is conservative under SUTVA with balanced clusters.
Outcome NeymannUpperBound() {
  Outcome o;
  std::mt19937_64 rng(707);
  std::normal_distribution<double> normal(0.0, 2.0);
  double least_slack = 1e300;
  int done = 0;
  for (int trial = 0; done < 50; ++trial) {
    const std::size_t n = 4 + trial % 7;
    std::vector<std::size_t> ms;
    for (std::size_t m = 4; m <= n; ++m) {
      if (n % m == 0) ms.push_back(m);
    }
    if (ms.empty()) continue;
    const std::size_t m = ms[rng() % ms.size()];
    Vec a(n), b(n);
    for (auto& x : a) x = normal(rng);
    for (auto& x : b) x = normal(rng);
    const testing::SutvaModel model(a, b);
    const Clustering c = Clustering::FromLabels(testing::RandomLabels(n, m, rng));
    const auto ex = ExhaustiveClusterDesign(c, model, m / 2, std::nullopt);
    const double slack = ex.mean_sigma - ex.var_tau;
    least_slack = std::min(least_slack, slack);
    if (!(slack >= -1e-10)) Fail(o, Fmt("E[sigma] below var by %.3g", -slack));
    ++done;
  }
  if (o.pass) o.detail = Fmt("50 instances, min E[sigma] - var = %.3g", least_slack);
  return o;
}

// 8. Random partitions cut (k-1)/k; R-LDG recovers a planted split.
Outcome Partitioning() {
  Outcome o;
  std::vector<BipartiteGraph> graphs;
  graphs.push_back(MakePlantedBipartite({}, 1).graph);
  graphs.push_back(BuildBipartiteGraph(GenerateSyntheticDataset({}, 1), GraphMetric::kBid).graph);
  double worst = 0.0;
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    Rng rng = MakeRng(800 + g);
    const auto state = RandomBalancedPartition(graphs[g].num_nodes(), 50, rng,
                                               graphs[g].num_left());
    const double cut = WeightedCutRatio(graphs[g], state);
    worst = std::max(worst, std::abs(cut - 0.98));
  }
  if (worst > 0.02) Fail(o, Fmt("random k=50 cut off by %.4f", worst));
  int recovered = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto planted = MakePlantedBipartite({}, seed);
    RldgOptions options;
    options.k = 2;
    options.passes = 10;
    if (RldgPartition(planted.graph, options).report.weighted_cut_ratio <= 0.2) ++recovered;
  }
  if (recovered < 95) Fail(o, Fmt("planted split recovered on %.0f/100 seeds", recovered));
  if (o.pass) {
    o.detail = Fmt("random k=50 within %.4f of 0.98; planted cut <= 0.2 on %.0f/100 seeds",
                   worst, recovered);
  }
  return o;
}

std::string Slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// 9. Two `compare` runs give byte-identical reports, across thread counts.
Outcome Determinism() {
  Outcome o;
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "cbexp_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  json config = DeskConfig("linear", 10);
  config["replications"] = 500;
  std::ofstream(dir / "config.json") << config.dump(2);
  // Same output directory both times: the report echoes it.
  const fs::path out = dir / "run";
  std::vector<std::string> reports;
  for (int threads : {1, 4}) {
    const std::string cmd = "OMP_NUM_THREADS=" + std::to_string(threads) + " '" CBEXP_CLI_PATH
                            "' compare --config '" + (dir / "config.json").string() +
                            "' --out '" + out.string() + "' > /dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) {
      Fail(o, "compare exited with an error");
      return o;
    }
    reports.push_back(Slurp(out / "report.json"));
    fs::remove(out / "report.json");
  }
  if (reports[0].empty()) Fail(o, "empty report");
  if (reports[0] != reports[1]) Fail(o, "reports differ between runs");
  if (o.pass) o.detail = Fmt("2 runs (1 and 4 threads), %.0f identical bytes", reports[0].size());
  return o;
}

}  // namespace
}  // namespace cbexp

int main() {
  using Check = std::function<cbexp::Outcome()>;
  const std::vector<std::pair<const char*, Check>> checks = {
      {"1 HT unbiased under SUTVA", cbexp::HtUnbiasedUnderSutva},
      {"2 linear closed-form bias", cbexp::LinearClosedForm},
      {"3 second-price self-excitation", cbexp::SecondPriceSelfExciting},
      {"4 VCG self-excitation under convexity", cbexp::VcgSelfExciting},
      {"5 reserve pipeline underestimates", cbexp::ReservePipelineUnderestimates},
      {"6 bias ordering and transitivity", cbexp::BiasOrdering},
      {"7 Neymann upper bound", cbexp::NeymannUpperBound},
      {"8 partitioning", cbexp::Partitioning},
      {"9 determinism", cbexp::Determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : checks) {
    cbexp::Outcome outcome;
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (outcome.pass ? "PASS " : "FAIL ") << name << ": " << outcome.detail
              << std::endl;
    failed += !outcome.pass;
  }
  return failed == 0 ? 0 : 1;
}
