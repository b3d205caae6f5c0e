#pragma once

// Shared test helpers: random log generation and brute-force re-scan oracles
// that recompute every estimator from the raw event vector without any of
// the library's incremental state.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sponsim/core.hpp"
#include "sponsim/estimators.hpp"

namespace sponsim::testing {

inline AdvertiserId adv(const std::string& s) { return AdvertiserId(s); }

inline std::vector<AdvertiserId> ids(std::initializer_list<const char*> names) {
  std::vector<AdvertiserId> out;
  for (const char* n : names) out.emplace_back(n);
  return out;
}

/// Random valid log over advertisers A.. with `n_events` appends. Times
/// advance by 0..max_step ms (ties included); clicks pick a random unclicked
/// earlier impression of a random advertiser, so click latency varies.
inline EventLog random_log(Rng& rng, std::size_t n_events, int n_advertisers = 3,
                           Millis max_step = 40, double click_share = 0.35) {
  std::vector<AdvertiserId> advs;
  for (int i = 0; i < n_advertisers; ++i) advs.emplace_back(std::string(1, char('A' + i)));
  std::map<AdvertiserId, std::vector<std::uint64_t>> unclicked;
  std::map<std::uint64_t, int> slot_of;
  EventLog log;
  Millis t = 0;
  std::uint64_t next_id = 0;
  std::int64_t query = 0;
  while (log.size() < n_events) {
    t += rng.uniform_int(0, max_step);
    const auto& a = advs[static_cast<std::size_t>(rng.uniform_int(0, n_advertisers - 1))];
    auto& pending = unclicked[a];
    // Events at one timestamp must respect the log key, so a tie with the
    // tail is only allowed when it keeps the order.
    auto fits = [&](const Event& e) {
      return log.empty() || !event_key_less(e, log.events().back());
    };
    if (!pending.empty() && rng.bernoulli(click_share)) {
      const auto k = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(pending.size()) - 1));
      const auto id = pending[k];
      Event e = ClickEvent{t, a, slot_of[id], query, id, ClickSource::organic};
      if (!fits(e)) continue;
      pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(k));
      log.append(std::move(e));
    } else {
      const int slot = static_cast<int>(rng.uniform_int(1, 3));
      Event e = ImpressionEvent{t, a, slot, query++, next_id};
      if (!fits(e)) continue;
      slot_of[next_id] = slot;
      pending.push_back(next_id++);
      log.append(std::move(e));
    }
  }
  return log;
}

// ---------------------------------------------------------------------------
// Oracles. Each returns (clicks, denominator); denominator 0 means undefined.

struct Ratio {
  std::int64_t clicks = 0;
  std::int64_t denominator = 0;

  bool defined() const { return denominator > 0; }
  double value() const { return static_cast<double>(clicks) / static_cast<double>(denominator); }
};

inline std::map<AdvertiserId, std::int64_t> oracle_tally(const ObservedLog& log, Millis from,
                                                         Millis to) {
  std::map<AdvertiserId, std::int64_t> out;
  for (const auto& e : log) {
    if (e.is_click() && e.t >= from && e.t < to) ++out[e.advertiser];
  }
  return out;
}

inline Ratio oracle_time_window(const ObservedLog& log, const AdvertiserId& a, Millis window,
                                Millis now) {
  Ratio r;
  for (const auto& e : log) {
    if (e.advertiser != a || e.t < now - window || e.t >= now) continue;
    (e.is_click() ? r.clicks : r.denominator) += 1;
  }
  return r;
}

inline Ratio oracle_impression_window(const ObservedLog& log, const AdvertiserId& a,
                                      std::int64_t window, Millis now) {
  std::vector<std::uint64_t> imps;
  for (const auto& e : log) {
    if (e.advertiser == a && e.is_impression() && e.t <= now) imps.push_back(e.impression_id);
  }
  const auto keep = std::min<std::int64_t>(window, static_cast<std::int64_t>(imps.size()));
  std::vector<std::uint64_t> last(imps.end() - keep, imps.end());
  Ratio r;
  r.denominator = keep;
  for (const auto& e : log) {
    if (e.advertiser == a && e.is_click() && e.t <= now &&
        std::find(last.begin(), last.end(), e.impression_id) != last.end()) {
      ++r.clicks;
    }
  }
  return r;
}

inline Ratio oracle_click_window(const ObservedLog& log, const AdvertiserId& a,
                                 std::int64_t window, Millis now) {
  std::vector<std::uint64_t> imps, click_refs;
  for (const auto& e : log) {
    if (e.advertiser != a || e.t > now) continue;
    (e.is_click() ? click_refs : imps).push_back(e.impression_id);
  }
  if (static_cast<std::int64_t>(click_refs.size()) < window) return {};
  const auto ref = click_refs[click_refs.size() - static_cast<std::size_t>(window)];
  const auto pos = std::find(imps.begin(), imps.end(), ref);
  return {window, static_cast<std::int64_t>(imps.end() - pos)};
}

inline Ratio oracle_relative(const ObservedLog& log, const AdvertiserId& a, Millis interval,
                             Millis now) {
  const Millis from = interval == 0 ? std::numeric_limits<Millis>::min() : now - interval;
  Ratio r;
  for (const auto& e : log) {
    if (!e.is_click() || e.t < from || e.t >= now) continue;
    ++r.denominator;
    if (e.advertiser == a) ++r.clicks;
  }
  return r;
}

inline bool same(const CtrEstimate& got, const Ratio& want) {
  if (got.defined != want.defined()) return false;
  if (!want.defined()) return true;
  return got.clicks_in_window == want.clicks && got.denominator == want.denominator &&
         got.value == want.value();
}

}  // namespace sponsim::testing
