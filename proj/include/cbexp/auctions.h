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

// Reserve-price experiments on sealed-bid auctions.
//
// Bidders bid their values. A bid is valid when value >= the reserve the
// bidder faces; treated bidders face their treatment reserve, control bidders
// their control reserve. Outcomes are bidder utilities summed over auctions.

#ifndef CBEXP_AUCTIONS_H_
#define CBEXP_AUCTIONS_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "cbexp/core.h"

namespace cbexp {

struct BidderProfile {
  double control_reserve = 0.0;
  double treatment_reserve = 0.0;  // must exceed control_reserve
};

// Slot click-through rates, strictly decreasing, each in (0, 1].
class PositionCurve {
 public:
  explicit PositionCurve(std::vector<double> pos);

  std::size_t num_slots() const { return pos_.size(); }
  double operator[](std::size_t slot) const { return pos_[slot]; }
  std::span<const double> values() const { return pos_; }

 private:
  std::vector<double> pos_;
};

struct AuctionResult {
  static constexpr int kUnallocated = -1;
  std::vector<int> slot;  // per participant, 0-based
  std::vector<double> payments;
  std::vector<double> utilities;
};

// Highest valid bid wins (ties to the lowest index) and pays
// max(own reserve, second-highest valid bid).
AuctionResult RunSecondPrice(std::span<const double> values,
                             std::span<const double> reserves);

// Valid bidders ranked by value fill the slots; the slot-k winner pays
// sum_{j>k} (pos_{j-1} - pos_j) v_(j) over valid bidders ranked below, with
// pos_{m+1} = 0 so the first unallocated bidder prices slot m.
AuctionResult RunVcgPositional(std::span<const double> values,
                               std::span<const double> reserves,
                               const PositionCurve& curve);

struct ConvexityCheck {
  bool convex = true;
  int violated_index = -1;  // 1-based k with pos_{k-2} + pos_k - 2 pos_{k-1} < 0
};

ConvexityCheck CheckPositionConvexity(const PositionCurve& curve);

struct Auction {
  std::vector<int> bidders;
  std::vector<double> values;
};

struct SecondPrice {};
struct VcgPositional {
  PositionCurve curve;
};
using Mechanism = std::variant<SecondPrice, VcgPositional>;

// Y_i(Z) = sum over auctions of bidder i's utility.
class AuctionOutcomeModel final : public PotentialOutcomeModel {
 public:
  AuctionOutcomeModel(std::vector<Auction> auctions,
                      std::vector<BidderProfile> profiles, Mechanism mechanism);

  std::size_t num_units() const override { return profiles_.size(); }
  // Noise seed is ignored; auction outcomes are deterministic.
  void Evaluate(const Assignment& z, std::optional<std::uint64_t> noise_seed,
                std::span<double> out) const override;

  const std::vector<Auction>& auctions() const { return auctions_; }
  const std::vector<BidderProfile>& profiles() const { return profiles_; }
  const Mechanism& mechanism() const { return mechanism_; }

  // Fraction of (bidder, auction) participations with value < treatment
  // reserve.
  double TreatedRejectionRate() const;

 private:
  std::vector<Auction> auctions_;
  std::vector<BidderProfile> profiles_;
  Mechanism mechanism_;
};

struct MonotonicityWitness {
  int affected = -1;  // i
  int flipped = -1;   // j
  std::vector<std::uint8_t> z;
  double before = 0.0;
  double after = 0.0;
};

struct PointwiseMonotonicityReport {
  bool holds = true;
  std::optional<MonotonicityWitness> witness;
  std::size_t comparisons = 0;
};

// For every Z, every j with Z_j = 0 and every i != j: treating j never lowers
// Y_i. Enumerates all 2^N assignments; throws unless N <= n_max <= 24.
PointwiseMonotonicityReport PointwiseMonotonicityCheck(
    const AuctionOutcomeModel& model, std::size_t n_max,
    double tolerance = 1e-9);

// CSV readers: instances "auction_id,bidder_id,value"; profiles
// "bidder_id,control_reserve,treatment_reserve". Bidder ids are dense
// integers 0..B-1.
std::vector<Auction> ReadAuctionsCsv(std::istream& in);
std::vector<BidderProfile> ReadProfilesCsv(std::istream& in);
void WriteAuctionsCsv(std::ostream& out, const std::vector<Auction>& auctions);
void WriteProfilesCsv(std::ostream& out,
                      const std::vector<BidderProfile>& profiles);

}  // namespace cbexp

#endif  // CBEXP_AUCTIONS_H_
