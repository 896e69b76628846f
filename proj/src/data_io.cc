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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "cbexp/random.h"

namespace cbexp {
namespace {

template <typename T>
bool ParseNumber(const std::string& text, T& value) {
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  return ec == std::errc() && ptr == end;
}

std::string FormatNumber(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  std::string s(buf, ptr);
  // Keep a decimal point so the log stays recognizably real-valued.
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

double Median(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const std::size_t mid = xs.size() / 2;
  return xs.size() % 2 ? xs[mid] : 0.5 * (xs[mid - 1] + xs[mid]);
}

nlohmann::json Stats(const std::vector<double>& xs) {
  if (xs.empty()) return {{"min", 0.0}, {"median", 0.0}, {"max", 0.0}};
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  return {{"min", *lo}, {"median", Median(xs)}, {"max", *hi}};
}

struct Aggregate {
  double bids = 0.0;
  double bid_value = 0.0;
  double impressions = 0.0;
  double clicks = 0.0;
};

nlohmann::json Panel(const std::map<std::pair<int, std::string>, Aggregate>& groups) {
  std::vector<double> bids;
  std::vector<double> value_cents;
  std::vector<double> impressions;
  std::vector<double> clicks;
  std::size_t at_most_one_click = 0;
  for (const auto& [key, agg] : groups) {
    bids.push_back(agg.bids);
    value_cents.push_back(agg.bid_value / agg.bids / 100.0);
    impressions.push_back(agg.impressions);
    clicks.push_back(agg.clicks);
    if (agg.clicks <= 1.0) ++at_most_one_click;
  }
  nlohmann::json click_stats = Stats(clicks);
  click_stats.erase("median");
  click_stats["cdf1_percent"] =
      groups.empty() ? 0.0
                     : 100.0 * static_cast<double>(at_most_one_click) /
                           static_cast<double>(groups.size());
  return {{"count", groups.size()},
          {"bids", Stats(bids)},
          {"mean_bid_cents", Stats(value_cents)},
          {"impressions", Stats(impressions)},
          {"clicks", click_stats}};
}

std::string AccountId(std::size_t bidder) {
  // Bijective scramble of the index into 20 bits, printed as hex.
  const std::uint32_t x = static_cast<std::uint32_t>((bidder * 0x9E3B5u) & 0xFFFFFu);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "a%05x", x);
  return buf;
}

std::string KeyphraseText(std::size_t keyphrase, Rng& rng,
                          std::size_t vocabulary) {
  std::ostringstream out;
  out << 'k' << std::hex << keyphrase;
  const std::size_t extra = 1 + rng() % 2;
  for (std::size_t t = 0; t < extra; ++t) {
    out << ",w" << std::hex << (rng() % vocabulary);
  }
  return out.str();
}

// Discrete Zipf sampler over ranks 0..n-1.
class Zipf {
 public:
  Zipf(std::size_t n, double exponent) : cdf_(n) {
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      total += 1.0 / std::pow(static_cast<double>(r + 1), exponent);
      cdf_[r] = total;
    }
    for (double& c : cdf_) c /= total;
  }

  std::size_t operator()(Rng& rng) const {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(it - cdf_.begin(), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

}  // namespace

ParseResult ParseRecords(std::istream& in) {
  ParseResult result;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::vector<std::string> cols;
    std::string col;
    while (fields >> col) cols.push_back(col);
    if (cols.empty()) continue;
    if (cols.size() != 7) {
      result.issues.push_back({line_no, "expected 7 columns, got " +
                                            std::to_string(cols.size())});
      continue;
    }
    BidRecord r;
    r.account_id = cols[1];
    r.keyphrase = cols[3];
    if (!ParseNumber(cols[0], r.day) || !ParseNumber(cols[2], r.rank) ||
        !ParseNumber(cols[4], r.bid) || !ParseNumber(cols[5], r.impressions) ||
        !ParseNumber(cols[6], r.clicks)) {
      result.issues.push_back({line_no, "non-numeric field"});
      continue;
    }
    if (r.day < 1 || r.rank < 1 || r.bid < 0.0 || r.impressions < 0.0 ||
        r.clicks < 0.0) {
      result.issues.push_back({line_no, "negative or zero-based field"});
      continue;
    }
    result.records.push_back(std::move(r));
  }
  return result;
}

std::string SerializeRecord(const BidRecord& r) {
  return std::to_string(r.day) + ' ' + r.account_id + ' ' +
         std::to_string(r.rank) + ' ' + r.keyphrase + ' ' + FormatNumber(r.bid) +
         ' ' + FormatNumber(r.impressions) + ' ' + FormatNumber(r.clicks);
}

void WriteRecords(std::ostream& out, const std::vector<BidRecord>& records) {
  for (const auto& r : records) out << SerializeRecord(r) << '\n';
}

GraphMetric ParseGraphMetric(const std::string& name) {
  if (name == "bid") return GraphMetric::kBid;
  if (name == "impressions") return GraphMetric::kImpressions;
  if (name == "clicks") return GraphMetric::kClicks;
  if (name == "rank") return GraphMetric::kRank;
  throw Error(ErrorCode::kConfig, "unknown graph metric '" + name + "'");
}

const char* ToString(GraphMetric metric) {
  switch (metric) {
    case GraphMetric::kBid: return "bid";
    case GraphMetric::kImpressions: return "impressions";
    case GraphMetric::kClicks: return "clicks";
    case GraphMetric::kRank: return "rank";
  }
  return "bid";
}

LabeledBipartiteGraph BuildBipartiteGraph(const std::vector<BidRecord>& records,
                                          GraphMetric metric) {
  LabeledBipartiteGraph out;
  std::unordered_map<std::string, int> left_ids;
  std::unordered_map<std::string, int> right_ids;
  struct Accum {
    double sum = 0.0;
    int count = 0;
  };
  std::vector<std::pair<std::uint64_t, Accum>> pairs;
  std::unordered_map<std::uint64_t, std::size_t> pair_index;
  for (const auto& r : records) {
    auto [li, lnew] = left_ids.emplace(r.account_id, static_cast<int>(left_ids.size()));
    if (lnew) out.left_names.push_back(r.account_id);
    auto [ri, rnew] = right_ids.emplace(r.keyphrase, static_cast<int>(right_ids.size()));
    if (rnew) out.right_names.push_back(r.keyphrase);
    const std::uint64_t key = (static_cast<std::uint64_t>(li->second) << 32) |
                              static_cast<std::uint32_t>(ri->second);
    auto [it, inserted] = pair_index.emplace(key, pairs.size());
    if (inserted) pairs.push_back({key, {}});
    Accum& acc = pairs[it->second].second;
    switch (metric) {
      case GraphMetric::kBid: acc.sum += r.bid; break;
      case GraphMetric::kImpressions: acc.sum += r.impressions; break;
      case GraphMetric::kClicks: acc.sum += r.clicks; break;
      case GraphMetric::kRank: acc.sum += r.rank; break;
    }
    ++acc.count;
  }
  std::vector<BipartiteGraph::Edge> edges;
  edges.reserve(pairs.size());
  for (const auto& [key, acc] : pairs) {
    const double w = metric == GraphMetric::kRank ? acc.sum / acc.count : acc.sum;
    if (w == 0.0) continue;
    edges.push_back({static_cast<int>(key >> 32),
                     static_cast<int>(key & 0xFFFFFFFFu), w});
  }
  out.graph = BipartiteGraph::FromEdges(out.left_names.size(),
                                        out.right_names.size(), edges);
  return out;
}

std::vector<Auction> BuildAuctions(const std::vector<BidRecord>& records,
                                   const LabeledBipartiteGraph& graph,
                                   std::size_t max_participants) {
  std::unordered_map<std::string, int> bidder;
  for (std::size_t b = 0; b < graph.left_names.size(); ++b) {
    bidder.emplace(graph.left_names[b], static_cast<int>(b));
  }
  std::map<std::pair<std::string, int>, Auction> by_key;
  for (const auto& r : records) {
    const auto it = bidder.find(r.account_id);
    if (it == bidder.end()) {
      throw Error(ErrorCode::kData, "account " + r.account_id + " not in graph");
    }
    auto& auction = by_key[{r.keyphrase, r.day}];
    auction.bidders.push_back(it->second);
    auction.values.push_back(r.bid);
  }
  std::vector<Auction> auctions;
  for (auto& [key, auction] : by_key) {
    if (auction.bidders.size() <= max_participants) {
      auctions.push_back(std::move(auction));
    }
  }
  return auctions;
}

nlohmann::json ToJson(const SyntheticParams& p) {
  return {{"n_bidders", p.n_bidders},
          {"n_keyphrases", p.n_keyphrases},
          {"n_days", p.n_days},
          {"n_communities", p.n_communities},
          {"within_community", p.within_community},
          {"portfolio_median", p.portfolio_median},
          {"portfolio_log_sd", p.portfolio_log_sd},
          {"daily_activity", p.daily_activity},
          {"popularity_exponent", p.popularity_exponent},
          {"bid_median_cents", p.bid_median_cents},
          {"bidder_log_sd", p.bidder_log_sd},
          {"keyphrase_log_sd", p.keyphrase_log_sd},
          {"daily_log_sd", p.daily_log_sd}};
}

std::vector<BidRecord> GenerateSyntheticDataset(const SyntheticParams& p,
                                                std::uint64_t seed) {
  if (p.n_bidders == 0) return {};
  if (p.n_keyphrases == 0 || p.n_days == 0 || p.n_communities == 0 ||
      p.n_communities > p.n_keyphrases || p.n_communities > p.n_bidders) {
    throw Error(ErrorCode::kInvalidParameter,
                "need keyphrases, days and 1 <= communities <= min(bidders, "
                "keyphrases)");
  }
  if (p.within_community < 0.0 || p.within_community > 1.0 ||
      p.daily_activity <= 0.0 || p.daily_activity > 1.0 ||
      p.portfolio_median < 1.0 || p.bid_median_cents <= 0.0) {
    throw Error(ErrorCode::kInvalidParameter, "synthetic parameter out of range");
  }
  Rng rng = MakeRng(seed);
  const std::size_t c = p.n_communities;

  // Keyphrases are dealt round-robin to communities after a shuffle.
  std::vector<std::size_t> kp_perm(p.n_keyphrases);
  std::iota(kp_perm.begin(), kp_perm.end(), std::size_t{0});
  std::shuffle(kp_perm.begin(), kp_perm.end(), rng);
  std::vector<std::vector<std::size_t>> community_kps(c);
  for (std::size_t pos = 0; pos < kp_perm.size(); ++pos) {
    community_kps[pos % c].push_back(kp_perm[pos]);
  }
  std::vector<std::string> kp_text(p.n_keyphrases);
  const std::size_t vocabulary = std::max<std::size_t>(16, p.n_keyphrases / 2);
  for (std::size_t k = 0; k < p.n_keyphrases; ++k) {
    kp_text[k] = KeyphraseText(k, rng, vocabulary);
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> kp_scale(p.n_keyphrases);
  std::vector<double> kp_traffic(p.n_keyphrases);
  for (std::size_t k = 0; k < p.n_keyphrases; ++k) {
    kp_scale[k] = std::exp(p.keyphrase_log_sd * normal(rng));
    kp_traffic[k] = 2.0 * std::exp(0.8 * normal(rng));
  }

  std::vector<Zipf> popularity;
  for (const auto& kps : community_kps) {
    popularity.emplace_back(kps.size(), p.popularity_exponent);
  }

  std::vector<std::vector<std::size_t>> portfolio(p.n_bidders);
  std::vector<double> bidder_scale(p.n_bidders);
  std::bernoulli_distribution own(p.within_community);
  for (std::size_t b = 0; b < p.n_bidders; ++b) {
    const std::size_t home = b % c;
    bidder_scale[b] = std::exp(p.bidder_log_sd * normal(rng));
    const double size_draw =
        p.portfolio_median * std::exp(p.portfolio_log_sd * normal(rng));
    const std::size_t size = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(size_draw)), 1, p.n_keyphrases);
    auto& items = portfolio[b];
    for (std::size_t attempt = 0; items.size() < size && attempt < 20 * size;
         ++attempt) {
      const std::size_t comm = own(rng) ? home : rng() % c;
      const std::size_t k = community_kps[comm][popularity[comm](rng)];
      if (std::find(items.begin(), items.end(), k) == items.end()) {
        items.push_back(k);
      }
    }
  }

  const double bid_median = p.bid_median_cents * 100.0;
  const double ctr[] = {0.05, 0.03, 0.02, 0.015};
  std::bernoulli_distribution active(p.daily_activity);
  std::vector<BidRecord> records;
  for (std::size_t day = 1; day <= p.n_days; ++day) {
    std::vector<std::vector<std::pair<double, std::size_t>>> bids(p.n_keyphrases);
    for (std::size_t b = 0; b < p.n_bidders; ++b) {
      for (std::size_t k : portfolio[b]) {
        if (!active(rng)) continue;
        const double bid = bid_median * bidder_scale[b] * kp_scale[k] *
                           std::exp(p.daily_log_sd * normal(rng));
        // Logs carry two decimals of 1/100 cent.
        bids[k].push_back({std::round(bid * 100.0) / 100.0, b});
      }
    }
    for (std::size_t k = 0; k < p.n_keyphrases; ++k) {
      auto& entries = bids[k];
      std::stable_sort(entries.begin(), entries.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      for (std::size_t r = 0; r < entries.size(); ++r) {
        const double exposure = kp_traffic[k] / static_cast<double>(r + 1);
        const double impressions =
            1.0 + static_cast<double>(std::poisson_distribution<int>(exposure)(rng));
        const double rate = r < 4 ? ctr[r] : 0.01;
        const double clicks = static_cast<double>(std::binomial_distribution<int>(
            static_cast<int>(impressions), rate)(rng));
        records.push_back({static_cast<int>(day), AccountId(entries[r].second),
                           static_cast<int>(r + 1), kp_text[k], entries[r].first,
                           impressions, clicks});
      }
    }
  }
  return records;
}

nlohmann::json SummarizeDataset(const std::vector<BidRecord>& records) {
  std::map<std::pair<int, std::string>, Aggregate> per_keyphrase;
  std::map<std::pair<int, std::string>, Aggregate> per_bidder;
  for (const auto& r : records) {
    for (auto* agg : {&per_keyphrase[{r.day, r.keyphrase}],
                      &per_bidder[{r.day, r.account_id}]}) {
      agg->bids += 1.0;
      agg->bid_value += r.bid;
      agg->impressions += r.impressions;
      agg->clicks += r.clicks;
    }
  }
  return {{"records", records.size()},
          {"per_keyphrase", Panel(per_keyphrase)},
          {"per_bidder", Panel(per_bidder)}};
}

std::vector<double> MedianBidPerBidder(const std::vector<BidRecord>& records,
                                       const LabeledBipartiteGraph& graph) {
  std::unordered_map<std::string, std::size_t> bidder;
  for (std::size_t b = 0; b < graph.left_names.size(); ++b) {
    bidder.emplace(graph.left_names[b], b);
  }
  std::vector<std::vector<double>> bids(graph.left_names.size());
  for (const auto& r : records) {
    const auto it = bidder.find(r.account_id);
    if (it != bidder.end()) bids[it->second].push_back(r.bid);
  }
  std::vector<double> medians(bids.size());
  for (std::size_t b = 0; b < bids.size(); ++b) medians[b] = Median(bids[b]);
  return medians;
}

}  // namespace cbexp
