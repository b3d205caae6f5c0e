#pragma once

// Domain types shared by every module: advertiser ids, traffic events, the
// append-only event log, click tallies and the seeded random source.

#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace sponsim {

/// Simulation time in integer milliseconds.
using Millis = std::int64_t;
/// Money in integer minor units.
using Cents = std::int64_t;

inline constexpr Millis kUnboundedHorizon = std::numeric_limits<Millis>::max();

class AdvertiserId {
 public:
  /// Throws std::invalid_argument for an empty token.
  explicit AdvertiserId(std::string token);

  const std::string& str() const noexcept { return token_; }

  friend auto operator<=>(const AdvertiserId&, const AdvertiserId&) = default;
  friend bool operator==(const AdvertiserId&, const AdvertiserId&) = default;

 private:
  std::string token_;
};

enum class EventKind : std::uint8_t { impression = 0, click = 1 };

enum class ClickSource : std::uint8_t { organic, scripted_fraud, human_fraud };

std::string_view to_string(ClickSource source);
/// Throws std::invalid_argument on an unknown name.
ClickSource click_source_from_string(std::string_view name);

struct ImpressionEvent {
  Millis t = 0;
  AdvertiserId advertiser;
  int slot = 1;
  std::int64_t query_id = 0;
  std::uint64_t id = 0;

  friend bool operator==(const ImpressionEvent&, const ImpressionEvent&) = default;
};

struct ClickEvent {
  Millis t = 0;
  AdvertiserId advertiser;
  int slot = 1;
  std::int64_t query_id = 0;
  std::uint64_t impression_ref = 0;
  ClickSource source = ClickSource::organic;

  friend bool operator==(const ClickEvent&, const ClickEvent&) = default;
};

using Event = std::variant<ImpressionEvent, ClickEvent>;

Millis event_time(const Event& e);
EventKind event_kind(const Event& e);
const AdvertiserId& event_advertiser(const Event& e);

/// Total order used by the log: time, then impression before click, then
/// advertiser id.
bool event_key_less(const Event& a, const Event& b);

/// An event with the ground-truth fraud label removed. Estimators and the
/// fraud detector only ever see these.
struct ObservedEvent {
  EventKind kind = EventKind::impression;
  Millis t = 0;
  AdvertiserId advertiser;
  int slot = 1;
  std::int64_t query_id = 0;
  /// Own id for impressions, referenced impression for clicks.
  std::uint64_t impression_id = 0;

  bool is_click() const noexcept { return kind == EventKind::click; }
  bool is_impression() const noexcept { return kind == EventKind::impression; }
};

using ObservedLog = std::vector<ObservedEvent>;

class EventLog {
 public:
  explicit EventLog(Millis horizon = kUnboundedHorizon);

  /// Builds a log from events in any order; events are stably sorted by the
  /// log key and then appended one by one.
  static EventLog from_events(std::vector<Event> events, Millis horizon = kUnboundedHorizon);

  /// Throws OutOfOrder, DanglingClick, DuplicateClick or OutsideHorizon; the
  /// log is unchanged on error.
  void append(Event e);

  const std::vector<Event>& events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }
  bool empty() const noexcept { return events_.empty(); }
  Millis horizon() const noexcept { return horizon_; }

  std::uint64_t next_impression_id() const noexcept { return next_impression_id_; }
  std::int64_t next_query_id() const noexcept { return next_query_id_; }

  /// Label-stripped copy of the log.
  ObservedLog observed() const;

  /// Sorted distinct advertisers appearing in the log.
  std::vector<AdvertiserId> advertisers() const;

  friend bool operator==(const EventLog& a, const EventLog& b) {
    return a.horizon_ == b.horizon_ && a.events_ == b.events_;
  }

 private:
  struct ImpressionState {
    AdvertiserId advertiser;
    bool clicked = false;
  };

  std::vector<Event> events_;
  Millis horizon_;
  std::unordered_map<std::uint64_t, ImpressionState> impressions_;
  std::uint64_t next_impression_id_ = 0;
  std::int64_t next_query_id_ = 0;
};

struct ClickTally {
  std::map<AdvertiserId, std::int64_t> per_advertiser;
  std::int64_t total = 0;
  Millis from_ms = 0;
  Millis to_ms = 0;

  /// Zero for advertisers absent from the tally.
  std::int64_t count(const AdvertiserId& advertiser) const;

  /// Component-wise sum; the result covers the union of both intervals.
  ClickTally& operator+=(const ClickTally& other);
};

/// Clicks with from_ms <= t < to_ms. Throws std::invalid_argument if
/// from_ms > to_ms. When `cohort` is non-empty only its members are counted
/// and every member appears in the tally, possibly with zero.
ClickTally tally(const ObservedLog& log, Millis from_ms, Millis to_ms,
                 std::span<const AdvertiserId> cohort = {});
ClickTally tally(const EventLog& log, Millis from_ms, Millis to_ms,
                 std::span<const AdvertiserId> cohort = {});

struct Seed {
  std::uint64_t value = 0;
};

/// SplitMix64 finalizer, used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t value, std::uint64_t stream);

/// Seeded random source. The transforms on top of mt19937_64 are written out
/// here so that sequences do not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(Seed seed) : engine_(seed.value) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();
  bool bernoulli(double p);
  double exponential(double mean);
  double normal();
  double lognormal(double mu, double sigma);
  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sponsim

template <>
struct std::hash<sponsim::AdvertiserId> {
  std::size_t operator()(const sponsim::AdvertiserId& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
