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

#include "cbexp/auctions.h"

#include <algorithm>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

namespace cbexp {
namespace {

// Scratch-buffer versions of the two mechanisms; `payments` and `utilities`
// must be zeroed by the caller and `slots` filled with kUnallocated.
void SecondPriceInto(std::span<const double> values,
                     std::span<const double> reserves, std::span<int> slots,
                     std::span<double> payments, std::span<double> utilities) {
  int winner = -1;
  double second = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < reserves[i]) continue;
    if (winner < 0 || values[i] > values[winner]) {
      if (winner >= 0) second = std::max(second, values[winner]);
      winner = static_cast<int>(i);
    } else {
      second = std::max(second, values[i]);
    }
  }
  if (winner < 0) return;
  const double price = std::max(reserves[winner], second);
  slots[winner] = 0;
  payments[winner] = price;
  utilities[winner] = values[winner] - price;
}

void VcgInto(std::span<const double> values, std::span<const double> reserves,
             const PositionCurve& curve, std::vector<int>& order,
             std::span<int> slots, std::span<double> payments,
             std::span<double> utilities) {
  order.clear();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] >= reserves[i]) order.push_back(static_cast<int>(i));
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return values[a] > values[b]; });
  const std::size_t m = curve.num_slots();
  const std::size_t n_valid = order.size();
  auto pos = [&](std::size_t slot) { return slot < m ? curve[slot] : 0.0; };
  for (std::size_t k = 0; k < std::min(m, n_valid); ++k) {
    const int bidder = order[k];
    double price = 0.0;
    const std::size_t last = std::min(m, n_valid - 1);
    for (std::size_t j = k + 1; j <= last; ++j) {
      price += (pos(j - 1) - pos(j)) * values[order[j]];
    }
    slots[bidder] = static_cast<int>(k);
    payments[bidder] = price;
    utilities[bidder] = pos(k) * values[bidder] - price;
  }
}

AuctionResult EmptyResult(std::size_t n) {
  AuctionResult r;
  r.slot.assign(n, AuctionResult::kUnallocated);
  r.payments.assign(n, 0.0);
  r.utilities.assign(n, 0.0);
  return r;
}

void CheckSizes(std::span<const double> values, std::span<const double> reserves) {
  if (values.size() != reserves.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "values and reserves differ in length");
  }
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> cells;
  std::istringstream fields(line);
  std::string cell;
  while (std::getline(fields, cell, ',')) cells.push_back(cell);
  return cells;
}

template <typename RowFn>
void ReadCsv(std::istream& in, const std::string& header, std::size_t columns,
             RowFn&& row) {
  std::string line;
  if (!std::getline(in, line) || line.rfind(header, 0) != 0) {
    throw Error(ErrorCode::kParse, "expected header '" + header + "'");
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = SplitCsv(line);
    if (cells.size() != columns) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) +
                                         ": expected " +
                                         std::to_string(columns) + " columns");
    }
    try {
      row(cells);
    } catch (const std::invalid_argument&) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) +
                                         ": non-numeric field");
    } catch (const std::out_of_range&) {
      throw Error(ErrorCode::kParse,
                  "line " + std::to_string(line_no) + ": value out of range");
    }
  }
}

}  // namespace

PositionCurve::PositionCurve(std::vector<double> pos) : pos_(std::move(pos)) {
  if (pos_.empty()) {
    throw Error(ErrorCode::kInvalidParameter, "position curve has no slots");
  }
  for (std::size_t k = 0; k < pos_.size(); ++k) {
    if (!(pos_[k] > 0.0 && pos_[k] <= 1.0)) {
      throw Error(ErrorCode::kInvalidParameter,
                  "slot rate " + std::to_string(k + 1) + " outside (0, 1]");
    }
    if (k > 0 && !(pos_[k] < pos_[k - 1])) {
      throw Error(ErrorCode::kInvalidParameter,
                  "slot rates must be strictly decreasing");
    }
  }
}

AuctionResult RunSecondPrice(std::span<const double> values,
                             std::span<const double> reserves) {
  CheckSizes(values, reserves);
  auto r = EmptyResult(values.size());
  SecondPriceInto(values, reserves, r.slot, r.payments, r.utilities);
  return r;
}

AuctionResult RunVcgPositional(std::span<const double> values,
                               std::span<const double> reserves,
                               const PositionCurve& curve) {
  CheckSizes(values, reserves);
  auto r = EmptyResult(values.size());
  std::vector<int> order;
  VcgInto(values, reserves, curve, order, r.slot, r.payments, r.utilities);
  return r;
}

ConvexityCheck CheckPositionConvexity(const PositionCurve& curve) {
  ConvexityCheck check;
  const auto pos = curve.values();
  for (std::size_t k = 2; k < pos.size(); ++k) {
    if (pos[k - 2] + pos[k] - 2.0 * pos[k - 1] < 0.0) {
      check.convex = false;
      check.violated_index = static_cast<int>(k + 1);
      break;
    }
  }
  return check;
}

AuctionOutcomeModel::AuctionOutcomeModel(std::vector<Auction> auctions,
                                         std::vector<BidderProfile> profiles,
                                         Mechanism mechanism)
    : auctions_(std::move(auctions)),
      profiles_(std::move(profiles)),
      mechanism_(std::move(mechanism)) {
  for (std::size_t b = 0; b < profiles_.size(); ++b) {
    if (!(profiles_[b].treatment_reserve > profiles_[b].control_reserve)) {
      throw Error(ErrorCode::kData,
                  "bidder " + std::to_string(b) +
                      ": treatment reserve must exceed control reserve");
    }
  }
  for (std::size_t a = 0; a < auctions_.size(); ++a) {
    const auto& auction = auctions_[a];
    if (auction.bidders.size() != auction.values.size()) {
      throw Error(ErrorCode::kData, "auction " + std::to_string(a) +
                                        ": bidders and values differ");
    }
    for (int b : auction.bidders) {
      if (b < 0 || static_cast<std::size_t>(b) >= profiles_.size()) {
        throw Error(ErrorCode::kData, "auction " + std::to_string(a) +
                                          " references bidder " +
                                          std::to_string(b) +
                                          " without a profile");
      }
    }
  }
}

void AuctionOutcomeModel::Evaluate(const Assignment& z,
                                   std::optional<std::uint64_t> /*noise_seed*/,
                                   std::span<double> out) const {
  if (z.size() != num_units() || out.size() != num_units()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "assignment length differs from bidder count");
  }
  std::fill(out.begin(), out.end(), 0.0);
  std::vector<double> reserves;
  std::vector<int> slots;
  std::vector<double> payments;
  std::vector<double> utilities;
  std::vector<int> order;
  for (const auto& auction : auctions_) {
    const std::size_t n = auction.bidders.size();
    reserves.resize(n);
    for (std::size_t p = 0; p < n; ++p) {
      const auto& profile = profiles_[auction.bidders[p]];
      reserves[p] = z[auction.bidders[p]] ? profile.treatment_reserve
                                          : profile.control_reserve;
    }
    slots.assign(n, AuctionResult::kUnallocated);
    payments.assign(n, 0.0);
    utilities.assign(n, 0.0);
    if (const auto* vcg = std::get_if<VcgPositional>(&mechanism_)) {
      VcgInto(auction.values, reserves, vcg->curve, order, slots, payments,
              utilities);
    } else {
      SecondPriceInto(auction.values, reserves, slots, payments, utilities);
    }
    for (std::size_t p = 0; p < n; ++p) out[auction.bidders[p]] += utilities[p];
  }
}

double AuctionOutcomeModel::TreatedRejectionRate() const {
  std::size_t total = 0;
  std::size_t rejected = 0;
  for (const auto& auction : auctions_) {
    for (std::size_t p = 0; p < auction.bidders.size(); ++p) {
      ++total;
      if (auction.values[p] < profiles_[auction.bidders[p]].treatment_reserve) {
        ++rejected;
      }
    }
  }
  return total == 0 ? 0.0
                    : static_cast<double>(rejected) / static_cast<double>(total);
}

PointwiseMonotonicityReport PointwiseMonotonicityCheck(
    const AuctionOutcomeModel& model, std::size_t n_max, double tolerance) {
  const std::size_t n = model.num_units();
  if (n_max > 24 || n > n_max) {
    throw Error(ErrorCode::kInvalidParameter,
                "pointwise check enumerates 2^N assignments; N = " +
                    std::to_string(n) + ", n_max = " + std::to_string(n_max));
  }
  PointwiseMonotonicityReport report;
  std::vector<std::uint8_t> bits(n);
  std::vector<double> base(n);
  std::vector<double> flipped(n);
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    for (std::size_t i = 0; i < n; ++i) bits[i] = (mask >> i) & 1u;
    model.Evaluate(Assignment(bits), std::nullopt, base);
    for (std::size_t j = 0; j < n; ++j) {
      if (bits[j]) continue;
      bits[j] = 1;
      model.Evaluate(Assignment(bits), std::nullopt, flipped);
      bits[j] = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (i == j) continue;
        ++report.comparisons;
        if (flipped[i] < base[i] - tolerance * std::max(1.0, std::abs(base[i]))) {
          report.holds = false;
          report.witness = MonotonicityWitness{static_cast<int>(i),
                                               static_cast<int>(j), bits,
                                               base[i], flipped[i]};
          return report;
        }
      }
    }
  }
  return report;
}

std::vector<Auction> ReadAuctionsCsv(std::istream& in) {
  std::map<long long, Auction> by_id;
  ReadCsv(in, "auction_id,bidder_id,value", 3,
          [&](const std::vector<std::string>& cells) {
            auto& auction = by_id[std::stoll(cells[0])];
            auction.bidders.push_back(std::stoi(cells[1]));
            auction.values.push_back(std::stod(cells[2]));
          });
  std::vector<Auction> auctions;
  auctions.reserve(by_id.size());
  for (auto& [id, auction] : by_id) auctions.push_back(std::move(auction));
  return auctions;
}

std::vector<BidderProfile> ReadProfilesCsv(std::istream& in) {
  std::map<int, BidderProfile> by_id;
  ReadCsv(in, "bidder_id,control_reserve,treatment_reserve", 3,
          [&](const std::vector<std::string>& cells) {
            by_id[std::stoi(cells[0])] =
                BidderProfile{std::stod(cells[1]), std::stod(cells[2])};
          });
  std::vector<BidderProfile> profiles;
  int expected = 0;
  for (const auto& [id, profile] : by_id) {
    if (id != expected++) {
      throw Error(ErrorCode::kData, "profile bidder ids must be 0..B-1");
    }
    profiles.push_back(profile);
  }
  return profiles;
}

void WriteAuctionsCsv(std::ostream& out, const std::vector<Auction>& auctions) {
  const auto old_precision = out.precision(17);
  out << "auction_id,bidder_id,value\n";
  for (std::size_t a = 0; a < auctions.size(); ++a) {
    for (std::size_t p = 0; p < auctions[a].bidders.size(); ++p) {
      out << a << ',' << auctions[a].bidders[p] << ',' << auctions[a].values[p]
          << '\n';
    }
  }
  out.precision(old_precision);
}

void WriteProfilesCsv(std::ostream& out,
                      const std::vector<BidderProfile>& profiles) {
  const auto old_precision = out.precision(17);
  out << "bidder_id,control_reserve,treatment_reserve\n";
  for (std::size_t b = 0; b < profiles.size(); ++b) {
    out << b << ',' << profiles[b].control_reserve << ','
        << profiles[b].treatment_reserve << '\n';
  }
  out.precision(old_precision);
}

}  // namespace cbexp
