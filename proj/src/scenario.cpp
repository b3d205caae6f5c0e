#include <algorithm>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "sponsim/bench.hpp"
#include "sponsim/error.hpp"

namespace sponsim {

void ScenarioConfig::validate() const {
  if (advertisers.empty()) throw ConfigError("advertiser", "at least one advertiser is required");
  std::set<AdvertiserId> ids;
  for (const auto& a : advertisers) {
    const std::string base = "advertiser." + a.id.str();
    if (!ids.insert(a.id).second) throw ConfigError(base, "duplicate advertiser");
    if (a.bid < 0) throw ConfigError(base + ".bid_cents", "must be >= 0");
    if (a.value < 0) throw ConfigError(base + ".value_cents", "must be >= 0");
    if (!(a.base_ctr >= 0.0 && a.base_ctr <= 1.0)) {
      throw ConfigError(base + ".base_ctr", "must lie in [0, 1]");
    }
  }
  if (tick_ms < 1) throw ConfigError("scenario.tick_ms", "must be >= 1");
  if (horizon_ms < 1) throw ConfigError("scenario.horizon_ms", "must be >= 1");
  if (!(cold_start_ctr >= 0.0 && cold_start_ctr <= 1.0)) {
    throw ConfigError("scenario.cold_start_ctr", "must lie in [0, 1]");
  }
  if (focus && !ids.contains(*focus)) throw ConfigError("scenario.focus", "unknown advertiser");
  if (auction.num_slots < 1) throw ConfigError("auction.num_slots", "must be >= 1");
  if (auction.reserve_price < 0) throw ConfigError("auction.reserve_cents", "must be >= 0");
  if (!(queries_per_second > 0.0)) throw ConfigError("traffic.queries_per_second", "must be > 0");
  if (!(position_decay > 0.0 && position_decay <= 1.0)) {
    throw ConfigError("traffic.position_decay", "must lie in (0, 1]");
  }
  for (const auto& [name, plan] : fraud) {
    const std::string base = "fraud." + name;
    if (!ids.contains(plan.target)) throw ConfigError(base + ".target", "unknown advertiser");
    try {
      plan.validate();
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(base, ex.what());
    }
    const auto times = fraud_click_times(plan);
    if (times.back() >= horizon_ms) {
      throw ConfigError(base + ".count", "last fraudulent click at t=" +
                                             std::to_string(times.back()) + " passes the horizon");
    }
  }
  if (estimators.empty()) throw ConfigError("estimators.list", "no estimators selected");
  for (const auto& w : estimators) {
    try {
      w.validate();
    } catch (const std::invalid_argument& ex) {
      throw ConfigError("estimators", ex.what());
    }
  }
  try {
    ranking_estimator.validate();
  } catch (const std::invalid_argument& ex) {
    throw ConfigError("scenario.ranking_estimator", ex.what());
  }
  try {
    detector.validate();
  } catch (const std::invalid_argument& ex) {
    throw ConfigError("detector", ex.what());
  }
}

TrafficConfig ScenarioConfig::traffic() const {
  TrafficConfig t;
  t.queries_per_second = queries_per_second;
  t.position_decay = position_decay;
  t.horizon_ms = horizon_ms;
  t.seed = Seed{mix_seed(seed.value, 0)};
  for (const auto& a : advertisers) t.base_ctr.emplace(a.id, a.base_ctr);
  return t;
}

AdvertiserId ScenarioConfig::focus_advertiser() const {
  if (focus) return *focus;
  if (!fraud.empty()) return fraud.front().plan.target;
  if (advertisers.empty()) throw ConfigError("advertiser", "at least one advertiser is required");
  return advertisers.front().id;
}

std::vector<AdvertiserId> ScenarioConfig::cohort() const {
  std::vector<AdvertiserId> out;
  for (const auto& a : advertisers) out.push_back(a.id);
  std::sort(out.begin(), out.end());
  return out;
}

ObservedLog estimator_view(const EventLog& log, FlaggedClicks mode,
                           const DetectorConfig& detector) {
  ObservedLog view = log.observed();
  if (mode == FlaggedClicks::count) return view;
  std::unordered_set<std::uint64_t> flagged;
  for (const auto& f : detect_scripted(view, detector)) {
    flagged.insert(f.flagged_click_ids.begin(), f.flagged_click_ids.end());
  }
  std::erase_if(view, [&](const ObservedEvent& e) {
    return e.is_click() && flagged.contains(e.impression_id);
  });
  return view;
}

SeriesRow series_row(const ObservedLog& view, int time_index, Millis now,
                     const AdvertiserId& focus, std::span<const AdvertiserId> cohort,
                     std::span<const WindowSpec> estimators) {
  // Every column describes the events strictly before the end of the tick.
  const auto end = std::lower_bound(view.begin(), view.end(), now,
                                    [](const ObservedEvent& e, Millis t) { return e.t < t; });
  const ObservedLog before(view.begin(), end);
  SeriesRow row;
  row.time_index = time_index;
  for (const auto& e : before) {
    if (e.advertiser != focus) continue;
    ++(e.is_click() ? row.clicks : row.impressions);
  }
  row.total_clicks = tally(before, 0, now, cohort).total;
  for (const auto& w : estimators) {
    row.ctrs.emplace_back(w.column_name(),
                          estimate(before, focus, w, now, cohort).value_if_defined());
  }
  return row;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const auto cohort = cfg.cohort();
  const auto focus = cfg.focus_advertiser();

  std::vector<Bid> bids;
  for (const auto& a : cfg.advertisers) bids.push_back({a.id, a.bid});

  std::vector<std::vector<Millis>> fraud_times;
  std::vector<std::size_t> fraud_next(cfg.fraud.size(), 0);
  for (const auto& f : cfg.fraud) fraud_times.push_back(fraud_click_times(f.plan));

  ScenarioResult result{{}, EventLog(cfg.horizon_ms), {}};
  EventLog& log = result.log;
  OrganicGenerator organic(cfg.traffic());
  IdCounter ids;
  ObservedLog view;

  const Millis ticks = (cfg.horizon_ms + cfg.tick_ms - 1) / cfg.tick_ms;
  for (Millis k = 1; k <= ticks; ++k) {
    const Millis start = (k - 1) * cfg.tick_ms;
    const Millis end = std::min(k * cfg.tick_ms, cfg.horizon_ms);

    CtrTable ctrs;
    for (const auto& adv : cohort) {
      const auto est = estimate(view, adv, cfg.ranking_estimator, start, cohort);
      ctrs[adv] = est.defined ? est.value : cfg.cold_start_ctr;
    }
    const auto ranked = rank(bids, ctrs, cfg.auction);
    const auto allocation = allocate(cfg.mechanism, ranked, cfg.auction);

    auto events = organic.generate(end, allocation, ids);
    for (std::size_t i = 0; i < cfg.fraud.size(); ++i) {
      const auto& times = fraud_times[i];
      const std::size_t first = fraud_next[i];
      std::size_t last = first;
      while (last < times.size() && times[last] < end) ++last;
      if (last == first) continue;
      fraud_next[i] = last;
      const auto& target = cfg.fraud[i].plan.target;
      auto slot_of = [&](Millis) {
        for (const auto& a : allocation) {
          if (a.advertiser == target) return a.slot;
        }
        return 1;
      };
      auto extra = fraud_events(cfg.fraud[i].plan,
                                std::span(times).subspan(first, last - first), slot_of, ids);
      events.insert(events.end(), std::make_move_iterator(extra.begin()),
                    std::make_move_iterator(extra.end()));
    }
    std::stable_sort(events.begin(), events.end(), event_key_less);
    for (auto& e : events) log.append(std::move(e));

    view = estimator_view(log, cfg.flagged, cfg.detector);
    result.rows.push_back(
        series_row(view, static_cast<int>(k), end, focus, cohort, cfg.estimators));
  }
  result.flags = detect_scripted(log.observed(), cfg.detector);
  return result;
}

std::vector<SeriesRow> replay_log(const EventLog& log, const ReplayOptions& options) {
  if (options.tick_ms < 1) throw std::invalid_argument("tick_ms must be >= 1");
  for (const auto& w : options.estimators) w.validate();
  std::vector<SeriesRow> rows;
  if (log.empty()) return rows;
  const auto cohort = log.advertisers();
  const AdvertiserId focus = options.focus.value_or(cohort.front());
  if (!std::binary_search(cohort.begin(), cohort.end(), focus)) {
    throw std::invalid_argument("focus advertiser " + focus.str() + " does not appear in the log");
  }
  const auto view = estimator_view(log, options.flagged, options.detector);
  const Millis last_t = event_time(log.events().back());
  const Millis ticks = last_t / options.tick_ms + 1;
  for (Millis k = 1; k <= ticks; ++k) {
    rows.push_back(series_row(view, static_cast<int>(k), k * options.tick_ms, focus, cohort,
                              options.estimators));
  }
  return rows;
}

}  // namespace sponsim
