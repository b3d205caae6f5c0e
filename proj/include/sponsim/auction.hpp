#pragma once

// Slot allocation and per-click pricing for sponsored-search auctions under
// first-price (GFP) and second-price (GSP) rules, plus GFP best-response
// dynamics and cycle detection.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "sponsim/core.hpp"

namespace sponsim {

struct Bid {
  AdvertiserId advertiser;
  Cents amount = 0;
};

enum class Ranking { by_bid, by_ctr_weighted };

enum class Mechanism { gfp, gsp };

struct AuctionConfig {
  int num_slots = 1;
  Cents reserve_price = 0;
  Ranking ranking = Ranking::by_bid;
};

struct RankedBid {
  Bid bid;
  double rank_score = 0.0;
  /// CTR used for the score; 1 in by_bid mode.
  double ctr = 1.0;
};

struct SlotAllocation {
  int slot = 1;
  AdvertiserId advertiser;
  Cents bid = 0;
  Cents price_per_click = 0;
  double rank_score = 0.0;

  friend bool operator==(const SlotAllocation&, const SlotAllocation&) = default;
};

using CtrTable = std::map<AdvertiserId, double>;
using BidVector = std::map<AdvertiserId, Cents>;

/// Orders bids by descending rank score (amount, or amount x ctr), ties by
/// advertiser id. Throws MissingCtr in by_ctr_weighted mode when a bidder has
/// no entry in `ctrs`, std::invalid_argument for a negative bid.
std::vector<RankedBid> rank(std::span<const Bid> bids, const CtrTable& ctrs,
                            const AuctionConfig& cfg);

/// Next-bidder pricing. Bids below the reserve are not eligible. The last
/// allocated bidder pays the reserve when nobody ranks below it.
std::vector<SlotAllocation> gsp_allocate(std::span<const RankedBid> ranked,
                                         const AuctionConfig& cfg);

/// Pay-your-bid pricing with the same allocation as gsp_allocate.
std::vector<SlotAllocation> gfp_allocate(std::span<const RankedBid> ranked,
                                         const AuctionConfig& cfg);

std::vector<SlotAllocation> allocate(Mechanism mechanism, std::span<const RankedBid> ranked,
                                     const AuctionConfig& cfg);

Cents revenue_per_round(std::span<const SlotAllocation> allocation);

/// The mover's cheapest bid that secures the best slot it can afford under
/// GFP. Positions are bought by beating the competitor currently holding
/// them by `epsilon`; the position below every competitor costs the reserve.
/// A mover that can afford no slot bids min(value, reserve).
/// Throws UnknownMover if the mover has no bid or no value.
Cents gfp_best_response_step(const BidVector& bids, const BidVector& values,
                             const AdvertiserId& mover, Cents epsilon, const AuctionConfig& cfg);

/// Smallest p such that the final state of `history` already occurred p
/// entries earlier; only multiples of `period_multiple` are considered. For a
/// deterministic process this is the period of the cycle it has entered.
/// nullopt when the final state is new.
std::optional<std::size_t> detect_cycle(std::span<const std::vector<Cents>> history,
                                        std::size_t period_multiple = 1);

struct DynamicsResult {
  std::vector<AdvertiserId> order;
  /// history[0] is the starting state; history[k] the bids after move k.
  std::vector<std::vector<Cents>> history;
  std::vector<AdvertiserId> movers;
  std::optional<std::size_t> period;
  /// True when the detected period is a fixed point (no bid changes).
  bool converged = false;

  std::size_t steps() const noexcept { return movers.size(); }
};

/// Strictly alternating best-response dynamics in advertiser-id order. Stops
/// as soon as a cycle whose period is a multiple of the number of bidders is
/// detected, or after `max_steps` moves.
DynamicsResult run_gfp_dynamics(const BidVector& initial, const BidVector& values, Cents epsilon,
                                const AuctionConfig& cfg, std::size_t max_steps);

}  // namespace sponsim
