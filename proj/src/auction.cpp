#include "sponsim/auction.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sponsim/error.hpp"

namespace sponsim {

namespace {

// ceil(numerator / denominator) for the weighted-price rule; a quotient within
// rounding noise of an integer is taken as that integer so that exact
// reconstructions (e.g. 0.5 * 300 / 0.5) do not overcharge by a cent.
Cents ceil_div(double numerator, double denominator) {
  const double q = numerator / denominator;
  const double nearest = std::round(q);
  if (std::abs(q - nearest) <= 1e-9 * std::max(1.0, std::abs(q))) {
    return static_cast<Cents>(nearest);
  }
  return static_cast<Cents>(std::ceil(q));
}

std::vector<const RankedBid*> eligible(std::span<const RankedBid> ranked,
                                       const AuctionConfig& cfg) {
  std::vector<const RankedBid*> out;
  for (const auto& r : ranked) {
    if (r.bid.amount >= cfg.reserve_price) out.push_back(&r);
  }
  return out;
}

void check_config(const AuctionConfig& cfg) {
  if (cfg.num_slots < 1) throw std::invalid_argument("num_slots must be >= 1");
  if (cfg.reserve_price < 0) throw std::invalid_argument("reserve_price must be >= 0");
}

}  // namespace

std::vector<RankedBid> rank(std::span<const Bid> bids, const CtrTable& ctrs,
                            const AuctionConfig& cfg) {
  std::vector<RankedBid> out;
  out.reserve(bids.size());
  for (const auto& b : bids) {
    if (b.amount < 0) throw std::invalid_argument("negative bid for " + b.advertiser.str());
    double ctr = 1.0;
    if (cfg.ranking == Ranking::by_ctr_weighted) {
      auto it = ctrs.find(b.advertiser);
      if (it == ctrs.end()) throw MissingCtr("no CTR for advertiser " + b.advertiser.str());
      ctr = it->second;
    }
    out.push_back({b, static_cast<double>(b.amount) * ctr, ctr});
  }
  std::sort(out.begin(), out.end(), [](const RankedBid& a, const RankedBid& b) {
    if (a.rank_score != b.rank_score) return a.rank_score > b.rank_score;
    return a.bid.advertiser < b.bid.advertiser;
  });
  return out;
}

std::vector<SlotAllocation> gsp_allocate(std::span<const RankedBid> ranked,
                                         const AuctionConfig& cfg) {
  check_config(cfg);
  const auto pool = eligible(ranked, cfg);
  const std::size_t winners = std::min<std::size_t>(pool.size(), cfg.num_slots);
  std::vector<SlotAllocation> out;
  out.reserve(winners);
  for (std::size_t i = 0; i < winners; ++i) {
    const RankedBid& me = *pool[i];
    Cents price = cfg.reserve_price;
    if (i + 1 < pool.size()) {
      const RankedBid& next = *pool[i + 1];
      if (cfg.ranking == Ranking::by_bid) {
        price = std::max(next.bid.amount, cfg.reserve_price);
      } else if (me.ctr > 0.0) {
        price = std::max(ceil_div(next.rank_score, me.ctr), cfg.reserve_price);
      }
    }
    price = std::min(price, me.bid.amount);
    out.push_back({static_cast<int>(i) + 1, me.bid.advertiser, me.bid.amount, price,
                   me.rank_score});
  }
  return out;
}

std::vector<SlotAllocation> gfp_allocate(std::span<const RankedBid> ranked,
                                         const AuctionConfig& cfg) {
  check_config(cfg);
  const auto pool = eligible(ranked, cfg);
  const std::size_t winners = std::min<std::size_t>(pool.size(), cfg.num_slots);
  std::vector<SlotAllocation> out;
  out.reserve(winners);
  for (std::size_t i = 0; i < winners; ++i) {
    const RankedBid& me = *pool[i];
    out.push_back({static_cast<int>(i) + 1, me.bid.advertiser, me.bid.amount, me.bid.amount,
                   me.rank_score});
  }
  return out;
}

std::vector<SlotAllocation> allocate(Mechanism mechanism, std::span<const RankedBid> ranked,
                                     const AuctionConfig& cfg) {
  return mechanism == Mechanism::gsp ? gsp_allocate(ranked, cfg) : gfp_allocate(ranked, cfg);
}

Cents revenue_per_round(std::span<const SlotAllocation> allocation) {
  Cents sum = 0;
  for (const auto& a : allocation) sum += a.price_per_click;
  return sum;
}

Cents gfp_best_response_step(const BidVector& bids, const BidVector& values,
                             const AdvertiserId& mover, Cents epsilon, const AuctionConfig& cfg) {
  if (epsilon < 1) throw std::invalid_argument("epsilon must be >= 1");
  check_config(cfg);
  if (!bids.contains(mover)) throw UnknownMover("no bid for mover " + mover.str());
  auto vit = values.find(mover);
  if (vit == values.end()) throw UnknownMover("no value for mover " + mover.str());
  const Cents value = vit->second;

  std::vector<Cents> others;
  for (const auto& [adv, amount] : bids) {
    if (adv != mover && amount >= cfg.reserve_price) others.push_back(amount);
  }
  std::sort(others.begin(), others.end(), std::greater<>());

  // Position j (1-based) costs the j-th highest competing bid plus epsilon;
  // the position below all competitors costs the reserve.
  const std::size_t positions = std::min<std::size_t>(cfg.num_slots, others.size() + 1);
  for (std::size_t j = 1; j <= positions; ++j) {
    const Cents required =
        j <= others.size() ? std::max(others[j - 1] + epsilon, cfg.reserve_price)
                           : cfg.reserve_price;
    if (required <= value) return required;
  }
  return std::min(value, cfg.reserve_price);
}

std::optional<std::size_t> detect_cycle(std::span<const std::vector<Cents>> history,
                                        std::size_t period_multiple) {
  if (period_multiple == 0) throw std::invalid_argument("period_multiple must be >= 1");
  const std::size_t n = history.size();
  if (n < 2) return std::nullopt;
  for (std::size_t p = period_multiple; p < n; p += period_multiple) {
    if (history[n - 1] == history[n - 1 - p]) return p;
  }
  return std::nullopt;
}

DynamicsResult run_gfp_dynamics(const BidVector& initial, const BidVector& values, Cents epsilon,
                                const AuctionConfig& cfg, std::size_t max_steps) {
  DynamicsResult result;
  if (initial.empty()) return result;
  BidVector bids = initial;
  for (const auto& [adv, _] : bids) result.order.push_back(adv);

  auto snapshot = [&] {
    std::vector<Cents> v;
    v.reserve(result.order.size());
    for (const auto& adv : result.order) v.push_back(bids.at(adv));
    return v;
  };

  const std::size_t n = result.order.size();
  result.history.push_back(snapshot());
  for (std::size_t step = 0; step < max_steps; ++step) {
    const AdvertiserId& mover = result.order[step % n];
    bids[mover] = gfp_best_response_step(bids, values, mover, epsilon, cfg);
    result.movers.push_back(mover);
    result.history.push_back(snapshot());
    // Only states separated by whole rounds are comparable: the next mover
    // must be the same for the repeat to imply a cycle.
    if (auto p = detect_cycle(result.history, n)) {
      result.period = p;
      const auto& last = result.history.back();
      result.converged = std::all_of(result.history.end() - static_cast<std::ptrdiff_t>(*p) - 1,
                                     result.history.end(),
                                     [&](const auto& s) { return s == last; });
      break;
    }
  }
  return result;
}

}  // namespace sponsim
