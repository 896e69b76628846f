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

#include "cbexp/data_io.h"

#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>
#include <sstream>

namespace cbexp {
namespace {

ParseResult Parse(const std::string& text) {
  std::istringstream in(text);
  return ParseRecords(in);
}

BidRecord Rec(int day, std::string id, int rank, std::string kp, double bid, double imp,
              double clicks) {
  return {day, std::move(id), rank, std::move(kp), bid, imp, clicks};
}

TEST(ParseRecordsTest, SampleLine) {
  const auto r = Parse("1 a3d2 2 f3e4,j6r3 100.0 1.0 0.0\n");
  ASSERT_TRUE(r.issues.empty());
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0], Rec(1, "a3d2", 2, "f3e4,j6r3", 100.0, 1.0, 0.0));
}

TEST(ParseRecordsTest, EmptyStream) {
  const auto r = Parse("");
  EXPECT_TRUE(r.records.empty());
  EXPECT_TRUE(r.issues.empty());
}

TEST(ParseRecordsTest, BadLinesAreReportedAndSkipped) {
  const auto r = Parse(
      "1 a 1 k 10 1 0\n"
      "1 a 1 k 10 1\n"
      "2 b x k 10 1 0\n"
      "2 b 1 k -5 1 0\n"
      "3 c 2 k2 7.5 4 1\n");
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.records[1].account_id, "c");
  ASSERT_EQ(r.issues.size(), 3u);
  EXPECT_EQ(r.issues[0].line, 2);
  EXPECT_NE(r.issues[0].message.find("expected 7 columns, got 6"), std::string::npos);
  EXPECT_EQ(r.issues[1].line, 3);
  EXPECT_EQ(r.issues[2].line, 4);
}

TEST(ParseRecordsTest, TabsAndBlankLines) {
  const auto r = Parse("\n1\ta\t1\tk\t10\t1\t0\n\n");
  EXPECT_EQ(r.records.size(), 1u);
  EXPECT_TRUE(r.issues.empty());
}

TEST(ParseRecordsTest, RoundTrip) {
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> u(0.0, 1e4);
  std::vector<BidRecord> records;
  for (int i = 0; i < 300; ++i) {
    records.push_back(Rec(1 + i % 9, "acct" + std::to_string(i % 13), 1 + i % 5,
                          "k" + std::to_string(i) + ",w" + std::to_string(i % 3), u(rng),
                          std::floor(u(rng)), i % 4 == 0 ? 0.0 : 1.0 / 3.0));
  }
  std::stringstream s;
  WriteRecords(s, records);
  const auto back = ParseRecords(s);
  EXPECT_TRUE(back.issues.empty());
  EXPECT_EQ(back.records, records);
  EXPECT_EQ(SerializeRecord(records[0]).find('\n'), std::string::npos);
}

TEST(BuildBipartiteGraphTest, SumsAndDropsZeros) {
  const std::vector<BidRecord> records = {
      Rec(1, "a", 1, "k1", 100, 3, 0), Rec(2, "a", 3, "k1", 50, 1, 0),
      Rec(1, "b", 2, "k1", 20, 5, 0), Rec(1, "b", 1, "k2", 7, 2, 2)};
  const auto bid = BuildBipartiteGraph(records, GraphMetric::kBid);
  EXPECT_EQ(bid.left_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(bid.right_names, (std::vector<std::string>{"k1", "k2"}));
  ASSERT_EQ(bid.graph.edges().size(), 3u);
  EXPECT_EQ(bid.graph.edges()[0].weight, 150.0);
  EXPECT_EQ(bid.graph.total_weight(), 177.0);

  const auto rank = BuildBipartiteGraph(records, GraphMetric::kRank);
  EXPECT_EQ(rank.graph.edges()[0].weight, 2.0);

  const auto clicks = BuildBipartiteGraph(records, GraphMetric::kClicks);
  ASSERT_EQ(clicks.graph.edges().size(), 1u);
  EXPECT_EQ(clicks.graph.edges()[0].weight, 2.0);
  // Same ids under every metric.
  EXPECT_EQ(clicks.left_names, bid.left_names);
}

TEST(BuildBipartiteGraphTest, SingleRecord) {
  const auto g = BuildBipartiteGraph({Rec(1, "x", 1, "k", 12.5, 4, 1)}, GraphMetric::kImpressions);
  ASSERT_EQ(g.graph.edges().size(), 1u);
  EXPECT_EQ(g.graph.edges()[0].weight, 4.0);
}

TEST(BuildBipartiteGraphTest, BidMassIsConserved) {
  const auto records = GenerateSyntheticDataset(SyntheticParams{}, 3);
  double total = 0.0;
  for (const auto& r : records) total += r.bid;
  const auto g = BuildBipartiteGraph(records, GraphMetric::kBid);
  double edge_sum = 0.0;
  for (const auto& e : g.graph.edges()) edge_sum += e.weight;
  EXPECT_NEAR(edge_sum, total, 1e-9 * total);
}

TEST(BuildAuctionsTest, KeyphraseDaysAndParticipantCap) {
  const std::vector<BidRecord> records = {
      Rec(1, "a", 1, "k1", 100, 3, 0), Rec(1, "b", 2, "k1", 50, 1, 0),
      Rec(2, "a", 1, "k1", 80, 1, 0),  Rec(1, "c", 1, "k2", 10, 1, 0),
      Rec(1, "a", 2, "k2", 9, 1, 0),   Rec(1, "b", 3, "k2", 8, 1, 0)};
  const auto g = BuildBipartiteGraph(records, GraphMetric::kBid);
  const auto all = BuildAuctions(records, g, 10);
  EXPECT_EQ(all.size(), 3u);
  std::size_t participations = 0;
  for (const auto& a : all) participations += a.bidders.size();
  EXPECT_EQ(participations, records.size());
  const auto capped = BuildAuctions(records, g, 2);
  EXPECT_EQ(capped.size(), 2u);
  const auto other = BuildBipartiteGraph({Rec(1, "z", 1, "k", 1, 1, 0)}, GraphMetric::kBid);
  EXPECT_THROW(BuildAuctions(records, other, 10), Error);
}

TEST(GraphMetricTest, Names) {
  for (auto m : {GraphMetric::kBid, GraphMetric::kImpressions, GraphMetric::kClicks,
                 GraphMetric::kRank}) {
    EXPECT_EQ(ParseGraphMetric(ToString(m)), m);
  }
  EXPECT_THROW(ParseGraphMetric("ctr"), Error);
}

TEST(GeneratorTest, DeterministicAndSeedSensitive) {
  SyntheticParams p;
  p.n_bidders = 80;
  p.n_keyphrases = 300;
  const auto a = GenerateSyntheticDataset(p, 5);
  const auto b = GenerateSyntheticDataset(p, 5);
  const auto c = GenerateSyntheticDataset(p, 6);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(GeneratorTest, EmptyAndInvalid) {
  SyntheticParams p;
  p.n_bidders = 0;
  EXPECT_TRUE(GenerateSyntheticDataset(p, 1).empty());
  p = SyntheticParams{};
  p.within_community = 1.5;
  EXPECT_THROW(GenerateSyntheticDataset(p, 1), Error);
  p = SyntheticParams{};
  p.n_communities = 0;
  EXPECT_THROW(GenerateSyntheticDataset(p, 1), Error);
}

TEST(GeneratorTest, RecordsAreWellFormed) {
  const auto records = GenerateSyntheticDataset(SyntheticParams{}, 2);
  std::map<std::pair<int, std::string>, std::set<int>> ranks;
  for (const auto& r : records) {
    EXPECT_GE(r.day, 1);
    EXPECT_LE(r.day, 5);
    EXPECT_GT(r.bid, 0.0);
    EXPECT_GE(r.impressions, 1.0);
    EXPECT_GE(r.clicks, 0.0);
    const bool fresh = ranks[std::make_pair(r.day, r.keyphrase)].insert(r.rank).second;
    EXPECT_TRUE(fresh) << "duplicate rank";
  }
  // Ranks within an auction are 1..n.
  for (const auto& [key, set] : ranks) {
    EXPECT_EQ(*set.begin(), 1);
    EXPECT_EQ(*set.rbegin(), static_cast<int>(set.size()));
  }
}

TEST(GeneratorTest, CalibratedToTableTargets) {
  // Bid-count medians within +-1 of 2 and 9; per-entity bid medians inside
  // the 60-66 cent band widened by 10% either way.
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto summary = SummarizeDataset(GenerateSyntheticDataset(SyntheticParams{}, seed));
    const double kp_count = summary["per_keyphrase"]["bids"]["median"];
    const double bd_count = summary["per_bidder"]["bids"]["median"];
    EXPECT_NEAR(kp_count, 2.0, 1.0) << seed;
    EXPECT_NEAR(bd_count, 9.0, 1.0) << seed;
    for (const char* panel : {"per_keyphrase", "per_bidder"}) {
      const double cents = summary[panel]["mean_bid_cents"]["median"];
      EXPECT_GE(cents, 54.0) << panel;
      EXPECT_LE(cents, 72.6) << panel;
    }
  }
}

TEST(GeneratorTest, PlantedCommunitiesAreRecovered) {
  SyntheticParams p;
  p.n_bidders = 200;
  p.n_keyphrases = 800;
  p.n_communities = 2;
  p.within_community = 0.95;
  const auto records = GenerateSyntheticDataset(p, 4);
  const auto g = BuildBipartiteGraph(records, GraphMetric::kBid);
  RldgOptions opt;
  opt.k = 2;
  const auto r = RldgPartition(g.graph, opt);
  EXPECT_LE(r.report.weighted_cut_ratio, 0.2);
}

TEST(SummaryTest, HandExample) {
  const std::vector<BidRecord> records = {
      Rec(1, "a", 1, "k1", 6000, 3, 0), Rec(1, "b", 2, "k1", 4000, 5, 2),
      Rec(2, "a", 1, "k1", 8000, 1, 1)};
  const auto s = SummarizeDataset(records);
  EXPECT_EQ(s["records"], 3);
  // Keyphrase-days: (1,k1) with two bids averaging 50c, (2,k1) with one 80c bid.
  EXPECT_EQ(s["per_keyphrase"]["count"], 2);
  EXPECT_EQ(s["per_keyphrase"]["bids"]["max"], 2.0);
  EXPECT_EQ(s["per_keyphrase"]["mean_bid_cents"]["min"], 50.0);
  EXPECT_EQ(s["per_keyphrase"]["mean_bid_cents"]["max"], 80.0);
  EXPECT_EQ(s["per_keyphrase"]["clicks"]["cdf1_percent"], 50.0);
  // Bidder-days: (1,a), (1,b), (2,a).
  EXPECT_EQ(s["per_bidder"]["count"], 3);
  EXPECT_EQ(s["per_bidder"]["impressions"]["median"], 3.0);
}

TEST(MedianBidPerBidderTest, Values) {
  const std::vector<BidRecord> records = {
      Rec(1, "a", 1, "k1", 10, 1, 0), Rec(2, "a", 1, "k1", 30, 1, 0),
      Rec(3, "a", 1, "k2", 20, 1, 0), Rec(1, "b", 2, "k1", 5, 1, 0)};
  const auto g = BuildBipartiteGraph(records, GraphMetric::kBid);
  EXPECT_EQ(MedianBidPerBidder(records, g), (std::vector<double>{20, 5}));
}

}  // namespace
}  // namespace cbexp
