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

// Sponsored-search bid logs: one line per (day, account, keyphrase) with the
// average bid and the impressions and clicks received that day.
//
//   day account_id rank keyphrase bid impressions clicks
//   1   a3d2       2    f3e4,j6r3 100.0 1.0   0.0
//
// Bids are in 1/100 cent throughout; reports convert to cents.

#ifndef CBEXP_DATA_IO_H_
#define CBEXP_DATA_IO_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cbexp/auctions.h"
#include "cbexp/partitioning.h"
#include "json.hpp"

namespace cbexp {

struct BidRecord {
  int day = 1;
  std::string account_id;
  int rank = 1;
  std::string keyphrase;
  double bid = 0.0;
  double impressions = 0.0;
  double clicks = 0.0;

  friend bool operator==(const BidRecord&, const BidRecord&) = default;
};

struct ParseIssue {
  int line = 0;
  std::string message;
};

struct ParseResult {
  std::vector<BidRecord> records;
  std::vector<ParseIssue> issues;
};

// Malformed lines are reported and skipped; the rest are still parsed.
ParseResult ParseRecords(std::istream& in);

std::string SerializeRecord(const BidRecord& record);
void WriteRecords(std::ostream& out, const std::vector<BidRecord>& records);

enum class GraphMetric { kBid, kImpressions, kClicks, kRank };

GraphMetric ParseGraphMetric(const std::string& name);
const char* ToString(GraphMetric metric);

// Edge (bidder, keyphrase) weighted by the metric summed over days, or the
// mean rank for kRank. Zero-weight edges are dropped. Node ids follow first
// appearance in `records`, so every metric yields the same id assignment.
LabeledBipartiteGraph BuildBipartiteGraph(const std::vector<BidRecord>& records,
                                          GraphMetric metric);

// Each keyphrase-day is one auction; participants bid their logged bids.
// Auctions with more than `max_participants` bidders are skipped. Bidder
// indices follow `graph.left_names`.
std::vector<Auction> BuildAuctions(const std::vector<BidRecord>& records,
                                   const LabeledBipartiteGraph& graph,
                                   std::size_t max_participants);

struct SyntheticParams {
  std::size_t n_bidders = 500;
  std::size_t n_keyphrases = 2000;
  std::size_t n_days = 5;
  std::size_t n_communities = 10;
  double within_community = 0.9;    // portfolio share from own community
  double portfolio_median = 14.0;   // keyphrases a bidder follows
  double portfolio_log_sd = 0.6;
  double daily_activity = 0.65;     // chance a followed keyphrase gets a bid
  double popularity_exponent = 1.0; // Zipf exponent within a community
  double bid_median_cents = 57.0;  // per-entity averages land near 60-66
  double bidder_log_sd = 0.7;
  double keyphrase_log_sd = 0.5;
  double daily_log_sd = 0.1;
};

nlohmann::json ToJson(const SyntheticParams& params);

// Deterministic in `seed`. Records are ordered by day, keyphrase, rank.
std::vector<BidRecord> GenerateSyntheticDataset(const SyntheticParams& params,
                                                std::uint64_t seed);

// Per keyphrase-day and per bidder-day aggregates (bid count, average bid in
// cents, impressions, clicks) with min/median/max, plus the percent of
// entities with at most one click.
nlohmann::json SummarizeDataset(const std::vector<BidRecord>& records);

// Median bid (1/100 cent) per bidder, indexed like graph.left_names.
std::vector<double> MedianBidPerBidder(const std::vector<BidRecord>& records,
                                       const LabeledBipartiteGraph& graph);

}  // namespace cbexp

#endif  // CBEXP_DATA_IO_H_
