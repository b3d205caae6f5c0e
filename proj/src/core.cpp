#include "sponsim/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include "sponsim/error.hpp"

namespace sponsim {

AdvertiserId::AdvertiserId(std::string token) : token_(std::move(token)) {
  if (token_.empty()) throw std::invalid_argument("advertiser id must be non-empty");
}

std::string_view to_string(ClickSource source) {
  switch (source) {
    case ClickSource::organic:
      return "organic";
    case ClickSource::scripted_fraud:
      return "scripted_fraud";
    case ClickSource::human_fraud:
      return "human_fraud";
  }
  return "organic";
}

ClickSource click_source_from_string(std::string_view name) {
  if (name == "organic") return ClickSource::organic;
  if (name == "scripted_fraud") return ClickSource::scripted_fraud;
  if (name == "human_fraud") return ClickSource::human_fraud;
  throw std::invalid_argument("unknown click source '" + std::string(name) + "'");
}

Millis event_time(const Event& e) {
  return std::visit([](const auto& ev) { return ev.t; }, e);
}

EventKind event_kind(const Event& e) {
  return std::holds_alternative<ImpressionEvent>(e) ? EventKind::impression : EventKind::click;
}

const AdvertiserId& event_advertiser(const Event& e) {
  return std::visit([](const auto& ev) -> const AdvertiserId& { return ev.advertiser; }, e);
}

bool event_key_less(const Event& a, const Event& b) {
  const Millis ta = event_time(a);
  const Millis tb = event_time(b);
  if (ta != tb) return ta < tb;
  const auto ka = event_kind(a);
  const auto kb = event_kind(b);
  if (ka != kb) return ka < kb;
  return event_advertiser(a) < event_advertiser(b);
}

EventLog::EventLog(Millis horizon) : horizon_(horizon) {
  if (horizon < 0) throw std::invalid_argument("horizon must be non-negative");
}

EventLog EventLog::from_events(std::vector<Event> events, Millis horizon) {
  std::stable_sort(events.begin(), events.end(), event_key_less);
  EventLog log(horizon);
  for (auto& e : events) log.append(std::move(e));
  return log;
}

void EventLog::append(Event e) {
  const Millis t = event_time(e);
  if (t < 0) throw OutOfOrder("event time " + std::to_string(t) + " is negative");
  if (t >= horizon_) {
    throw OutsideHorizon("event time " + std::to_string(t) + " is not below horizon " +
                         std::to_string(horizon_));
  }
  if (!events_.empty() && event_key_less(e, events_.back())) {
    throw OutOfOrder("event at t=" + std::to_string(t) + " sorts before log tail at t=" +
                     std::to_string(event_time(events_.back())));
  }

  if (auto* imp = std::get_if<ImpressionEvent>(&e)) {
    if (imp->slot < 1) throw std::invalid_argument("slot must be >= 1");
    auto [it, inserted] = impressions_.try_emplace(imp->id, ImpressionState{imp->advertiser});
    if (!inserted) {
      throw std::invalid_argument("duplicate impression id " + std::to_string(imp->id));
    }
    next_impression_id_ = std::max(next_impression_id_, imp->id + 1);
    next_query_id_ = std::max(next_query_id_, imp->query_id + 1);
  } else {
    auto& click = std::get<ClickEvent>(e);
    if (click.slot < 1) throw std::invalid_argument("slot must be >= 1");
    auto it = impressions_.find(click.impression_ref);
    if (it == impressions_.end() || it->second.advertiser != click.advertiser) {
      throw DanglingClick("click at t=" + std::to_string(t) + " for " + click.advertiser.str() +
                          " references no impression " + std::to_string(click.impression_ref));
    }
    if (it->second.clicked) {
      throw DuplicateClick("impression " + std::to_string(click.impression_ref) +
                           " already clicked");
    }
    it->second.clicked = true;
    next_query_id_ = std::max(next_query_id_, click.query_id + 1);
  }
  events_.push_back(std::move(e));
}

ObservedLog EventLog::observed() const {
  ObservedLog out;
  out.reserve(events_.size());
  for (const auto& e : events_) {
    if (const auto* imp = std::get_if<ImpressionEvent>(&e)) {
      out.push_back({EventKind::impression, imp->t, imp->advertiser, imp->slot, imp->query_id,
                     imp->id});
    } else {
      const auto& c = std::get<ClickEvent>(e);
      out.push_back({EventKind::click, c.t, c.advertiser, c.slot, c.query_id, c.impression_ref});
    }
  }
  return out;
}

std::vector<AdvertiserId> EventLog::advertisers() const {
  std::set<AdvertiserId> seen;
  for (const auto& e : events_) seen.insert(event_advertiser(e));
  return {seen.begin(), seen.end()};
}

std::int64_t ClickTally::count(const AdvertiserId& advertiser) const {
  auto it = per_advertiser.find(advertiser);
  return it == per_advertiser.end() ? 0 : it->second;
}

ClickTally& ClickTally::operator+=(const ClickTally& other) {
  for (const auto& [adv, n] : other.per_advertiser) per_advertiser[adv] += n;
  total += other.total;
  from_ms = std::min(from_ms, other.from_ms);
  to_ms = std::max(to_ms, other.to_ms);
  return *this;
}

ClickTally tally(const ObservedLog& log, Millis from_ms, Millis to_ms,
                 std::span<const AdvertiserId> cohort) {
  if (from_ms > to_ms) throw std::invalid_argument("tally: from_ms > to_ms");
  ClickTally out;
  out.from_ms = from_ms;
  out.to_ms = to_ms;
  for (const auto& adv : cohort) out.per_advertiser.emplace(adv, 0);

  auto first = std::lower_bound(log.begin(), log.end(), from_ms,
                                [](const ObservedEvent& e, Millis t) { return e.t < t; });
  for (auto it = first; it != log.end() && it->t < to_ms; ++it) {
    if (!it->is_click()) continue;
    if (!cohort.empty()) {
      auto member = out.per_advertiser.find(it->advertiser);
      if (member == out.per_advertiser.end()) continue;
      ++member->second;
    } else {
      ++out.per_advertiser[it->advertiser];
    }
    ++out.total;
  }
  return out;
}

ClickTally tally(const EventLog& log, Millis from_ms, Millis to_ms,
                 std::span<const AdvertiserId> cohort) {
  return tally(log.observed(), from_ms, to_ms, cohort);
}

std::uint64_t mix_seed(std::uint64_t value, std::uint64_t stream) {
  std::uint64_t z = value + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

bool Rng::bernoulli(double p) {
  return uniform01() < p;
}

double Rng::exponential(double mean) {
  return -mean * std::log1p(-uniform01());
}

double Rng::normal() {
  // Box-Muller, one variate per call so the stream position stays simple.
  const double u1 = 1.0 - uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::lognormal(double mu, double sigma) {
  return std::exp(mu + sigma * normal());
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(engine_());
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return lo + static_cast<std::int64_t>(x % span);
}

}  // namespace sponsim
