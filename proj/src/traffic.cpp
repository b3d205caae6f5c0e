#include "sponsim/traffic.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "sponsim/error.hpp"

namespace sponsim {

void TrafficConfig::validate() const {
  if (!(queries_per_second > 0.0)) throw std::invalid_argument("queries_per_second must be > 0");
  if (!(position_decay > 0.0 && position_decay <= 1.0)) {
    throw std::invalid_argument("position_decay must lie in (0, 1]");
  }
  if (horizon_ms < 1) throw std::invalid_argument("horizon_ms must be >= 1");
  for (const auto& [adv, p] : base_ctr) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument("base_ctr for " + adv.str() + " must lie in [0, 1]");
    }
  }
}

void FraudPlan::validate() const {
  if (count < 1) throw std::invalid_argument("fraud count must be >= 1");
  if (start_ms < 0) throw std::invalid_argument("fraud start_ms must be >= 0");
  if (kind == FraudKind::scripted && interval_ms < 1) {
    throw std::invalid_argument("scripted interval_ms must be >= 1");
  }
  if (kind == FraudKind::human && !(dwell.sigma >= 0.0)) {
    throw std::invalid_argument("dwell sigma must be >= 0");
  }
}

void DetectorConfig::validate() const {
  if (min_run < 3) throw std::invalid_argument("min_run must be >= 3");
  if (tolerance_ms < 0) throw std::invalid_argument("tolerance_ms must be >= 0");
  if (max_skip < 1) throw std::invalid_argument("max_skip must be >= 1");
}

// ---------------------------------------------------------------------------

OrganicGenerator::OrganicGenerator(TrafficConfig cfg)
    : cfg_(std::move(cfg)), rng_(cfg_.seed), next_arrival_ms_(0.0) {
  cfg_.validate();
  next_arrival_ms_ = rng_.exponential(1000.0 / cfg_.queries_per_second);
}

std::vector<Event> OrganicGenerator::generate(Millis to_ms,
                                              std::span<const SlotAllocation> allocation,
                                              IdCounter& ids) {
  std::vector<double> click_prob;
  click_prob.reserve(allocation.size());
  for (const auto& a : allocation) {
    auto it = cfg_.base_ctr.find(a.advertiser);
    if (it == cfg_.base_ctr.end()) {
      throw std::invalid_argument("no base CTR for advertiser " + a.advertiser.str());
    }
    click_prob.push_back(it->second * std::pow(cfg_.position_decay, a.slot - 1));
  }

  std::vector<Event> out;
  const double mean_gap = 1000.0 / cfg_.queries_per_second;
  while (next_arrival_ms_ < static_cast<double>(to_ms)) {
    const auto t = static_cast<Millis>(std::floor(next_arrival_ms_));
    const std::int64_t query = ids.next_query++;
    for (std::size_t i = 0; i < allocation.size(); ++i) {
      const auto& a = allocation[i];
      const std::uint64_t imp = ids.next_impression++;
      out.push_back(ImpressionEvent{t, a.advertiser, a.slot, query, imp});
      if (rng_.bernoulli(click_prob[i])) {
        out.push_back(ClickEvent{t, a.advertiser, a.slot, query, imp, ClickSource::organic});
      }
    }
    next_arrival_ms_ += rng_.exponential(mean_gap);
  }
  return out;
}

EventLog gen_organic(const TrafficConfig& cfg, std::span<const SlotAllocation> allocation) {
  if (allocation.empty()) throw std::invalid_argument("gen_organic: empty allocation");
  OrganicGenerator gen(cfg);
  IdCounter ids;
  return EventLog::from_events(gen.generate(cfg.horizon_ms, allocation, ids), cfg.horizon_ms);
}

std::vector<Millis> fraud_click_times(const FraudPlan& plan) {
  plan.validate();
  std::vector<Millis> times;
  times.reserve(static_cast<std::size_t>(plan.count));
  if (plan.kind == FraudKind::scripted) {
    for (std::int64_t k = 0; k < plan.count; ++k) times.push_back(plan.start_ms + k * plan.interval_ms);
    return times;
  }
  Rng rng(plan.seed);
  Millis t = plan.start_ms;
  times.push_back(t);
  for (std::int64_t k = 1; k < plan.count; ++k) {
    const auto gap = std::llround(rng.lognormal(plan.dwell.mu, plan.dwell.sigma));
    t += std::max<Millis>(1, gap);
    times.push_back(t);
  }
  return times;
}

std::vector<Event> fraud_events(const FraudPlan& plan, std::span<const Millis> times,
                                const std::function<int(Millis)>& slot_of, IdCounter& ids) {
  const ClickSource source =
      plan.kind == FraudKind::scripted ? ClickSource::scripted_fraud : ClickSource::human_fraud;
  std::vector<Event> out;
  out.reserve(times.size() * 2);
  for (Millis t : times) {
    const int slot = slot_of(t);
    const std::int64_t query = ids.next_query++;
    const std::uint64_t imp = ids.next_impression++;
    out.push_back(ImpressionEvent{t, plan.target, slot, query, imp});
    out.push_back(ClickEvent{t, plan.target, slot, query, imp, source});
  }
  return out;
}

namespace {

EventLog inject(const EventLog& log, const FraudPlan& plan) {
  const auto times = fraud_click_times(plan);
  if (!times.empty() && times.back() >= log.horizon()) {
    throw HorizonExceeded("fraud click at t=" + std::to_string(times.back()) +
                          " passes log horizon " + std::to_string(log.horizon()));
  }

  // Most recent slot the target was shown in, by time.
  std::vector<std::pair<Millis, int>> shown;
  for (const auto& e : log.events()) {
    if (const auto* imp = std::get_if<ImpressionEvent>(&e); imp && imp->advertiser == plan.target) {
      shown.emplace_back(imp->t, imp->slot);
    }
  }
  auto slot_of = [&](Millis t) {
    auto it = std::upper_bound(shown.begin(), shown.end(), t,
                               [](Millis v, const auto& s) { return v < s.first; });
    return it == shown.begin() ? 1 : std::prev(it)->second;
  };

  IdCounter ids = IdCounter::after(log);
  std::vector<Event> all = log.events();
  auto extra = fraud_events(plan, times, slot_of, ids);
  all.insert(all.end(), std::make_move_iterator(extra.begin()),
             std::make_move_iterator(extra.end()));
  return EventLog::from_events(std::move(all), log.horizon());
}

}  // namespace

EventLog inject_scripted_fraud(const EventLog& log, const FraudPlan& plan) {
  if (plan.kind != FraudKind::scripted) throw std::invalid_argument("plan is not scripted");
  return inject(log, plan);
}

EventLog inject_human_fraud(const EventLog& log, const FraudPlan& plan) {
  if (plan.kind != FraudKind::human) throw std::invalid_argument("plan is not human");
  return inject(log, plan);
}

// ---------------------------------------------------------------------------

namespace {

double median_of(std::vector<Millis> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  if (v.size() % 2) return static_cast<double>(v[m]);
  return 0.5 * static_cast<double>(v[m - 1] + v[m]);
}

bool within_band(const std::vector<Millis>& gaps, Millis tolerance) {
  const double med = median_of(gaps);
  return std::all_of(gaps.begin(), gaps.end(), [&](Millis g) {
    return std::abs(static_cast<double>(g) - med) <= static_cast<double>(tolerance);
  });
}

struct ClickRef {
  Millis t;
  std::uint64_t id;
};

struct Chain {
  std::vector<std::size_t> members;
  Millis gap;
  double spread = 0.0;  // summed distance of the gaps from their median
};

// Follows clicks spaced `gap` apart (within tolerance) from clicks[first],
// then trims the tail until every gap sits in the median band.
Chain follow(const std::vector<ClickRef>& clicks, std::size_t first, Millis gap,
             const DetectorConfig& cfg) {
  Chain chain{{first}, gap};
  std::vector<Millis> gaps;
  while (true) {
    const Millis expected = clicks[chain.members.back()].t + gap;
    auto lo = std::lower_bound(
        clicks.begin() + static_cast<std::ptrdiff_t>(chain.members.back()) + 1, clicks.end(),
        std::max(expected - cfg.tolerance_ms, clicks[chain.members.back()].t + 1),
        [](const ClickRef& c, Millis t) { return c.t < t; });
    std::size_t pick = clicks.size();
    Millis pick_err = 0;
    for (auto it = lo; it != clicks.end() && it->t <= expected + cfg.tolerance_ms; ++it) {
      const Millis err = std::abs(it->t - expected);
      if (pick == clicks.size() || err < pick_err) {
        pick = static_cast<std::size_t>(it - clicks.begin());
        pick_err = err;
      }
    }
    if (pick == clicks.size()) break;
    gaps.push_back(clicks[pick].t - clicks[chain.members.back()].t);
    chain.members.push_back(pick);
  }
  while (gaps.size() > 1 && !within_band(gaps, cfg.tolerance_ms)) {
    chain.members.pop_back();
    gaps.pop_back();
  }
  if (gaps.empty()) return chain;

  // Extend backwards past seeds that sat more than max_skip clicks apart.
  const double med = median_of(gaps);
  std::vector<std::size_t> head;
  std::size_t at = first;
  while (at > 0) {
    const double expected = static_cast<double>(clicks[at].t) - med;
    std::size_t pick = at;
    double pick_err = 0;
    for (std::size_t k = at; k-- > 0;) {
      const double err = std::abs(static_cast<double>(clicks[k].t) - expected);
      if (static_cast<double>(clicks[k].t) < expected - static_cast<double>(cfg.tolerance_ms)) break;
      if (clicks[k].t == clicks[at].t) continue;
      if (err <= static_cast<double>(cfg.tolerance_ms) && (pick == at || err < pick_err)) {
        pick = k;
        pick_err = err;
      }
    }
    if (pick == at) break;
    head.push_back(pick);
    gaps.push_back(clicks[at].t - clicks[pick].t);
    at = pick;
  }
  chain.members.insert(chain.members.begin(), head.rbegin(), head.rend());
  std::vector<Millis> ordered(gaps.size());
  for (std::size_t k = 1; k < chain.members.size(); ++k) {
    ordered[k - 1] = clicks[chain.members[k]].t - clicks[chain.members[k - 1]].t;
  }
  while (!within_band(ordered, cfg.tolerance_ms)) {
    chain.members.erase(chain.members.begin());
    ordered.erase(ordered.begin());
  }
  const double settled = median_of(ordered);
  for (auto g : ordered) chain.spread += std::abs(static_cast<double>(g) - settled);
  return chain;
}

std::vector<std::vector<std::size_t>> runs_of(const std::vector<ClickRef>& clicks,
                                              const DetectorConfig& cfg) {
  const std::size_t n = clicks.size();
  const auto min_run = static_cast<std::size_t>(cfg.min_run);
  std::vector<Chain> candidates;
  // (first, second, gap) seeds already covered as consecutive members of an
  // earlier chain with the same gap; following them again yields a suffix.
  std::set<std::pair<std::size_t, std::size_t>> covered;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t last = std::min(n - 1, i + static_cast<std::size_t>(cfg.max_skip));
    for (std::size_t j = i + 1; j <= last; ++j) {
      const Millis gap = clicks[j].t - clicks[i].t;
      if (gap < 1 || covered.contains({i, j})) continue;
      auto chain = follow(clicks, i, gap, cfg);
      for (std::size_t k = 0; k + 1 < chain.members.size(); ++k) {
        const auto a = chain.members[k], b = chain.members[k + 1];
        if (clicks[b].t - clicks[a].t == gap) covered.insert({a, b});
      }
      if (chain.members.size() >= min_run) candidates.push_back(std::move(chain));
    }
  }

  // Longest chains win, then the most regular; a chain sharing a click with
  // an accepted one is dropped.
  std::stable_sort(candidates.begin(), candidates.end(), [&](const Chain& a, const Chain& b) {
    if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
    if (a.spread != b.spread) return a.spread < b.spread;
    if (a.members.front() != b.members.front()) return a.members.front() < b.members.front();
    return a.gap < b.gap;
  });
  std::vector<bool> assigned(n, false);
  std::vector<std::vector<std::size_t>> runs;
  for (auto& c : candidates) {
    if (std::any_of(c.members.begin(), c.members.end(), [&](std::size_t k) { return assigned[k]; })) {
      continue;
    }
    for (auto k : c.members) assigned[k] = true;
    runs.push_back(std::move(c.members));
  }
  // Clicks sharing a member's timestamp cannot be told apart from it.
  for (auto& run : runs) {
    std::vector<std::size_t> with_ties;
    for (auto k : run) {
      std::size_t lo = k, hi = k;
      while (lo > 0 && clicks[lo - 1].t == clicks[k].t) --lo;
      while (hi + 1 < n && clicks[hi + 1].t == clicks[k].t) ++hi;
      for (std::size_t m = lo; m <= hi; ++m) {
        if (m == k || !assigned[m]) {
          assigned[m] = true;
          with_ties.push_back(m);
        }
      }
    }
    run = std::move(with_ties);
  }
  return runs;
}

}  // namespace

std::vector<FraudFlag> detect_scripted(const ObservedLog& view, const DetectorConfig& cfg) {
  cfg.validate();
  std::map<AdvertiserId, std::vector<ClickRef>> streams;
  for (const auto& e : view) {
    if (e.is_click()) streams[e.advertiser].push_back({e.t, e.impression_id});
  }

  std::vector<FraudFlag> flags;
  for (const auto& [adv, clicks] : streams) {
    if (static_cast<std::int64_t>(clicks.size()) < cfg.min_run) continue;
    for (const auto& run : runs_of(clicks, cfg)) {
      FraudFlag flag{clicks[run.front()].t, clicks[run.back()].t, adv, {}};
      for (auto k : run) flag.flagged_click_ids.push_back(clicks[k].id);
      flags.push_back(std::move(flag));
    }
  }
  std::sort(flags.begin(), flags.end(), [](const FraudFlag& a, const FraudFlag& b) {
    if (a.start_ms != b.start_ms) return a.start_ms < b.start_ms;
    return a.advertiser < b.advertiser;
  });
  return flags;
}

}  // namespace sponsim
