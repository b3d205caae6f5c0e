#pragma once

// Synthetic sponsored-search traffic: Poisson query arrivals, one impression
// per allocated slot, Bernoulli clicks with a per-slot decay; scripted and
// human-paced click-fraud injection; and a detector for fixed-interval click
// runs.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sponsim/auction.hpp"
#include "sponsim/core.hpp"

namespace sponsim {

struct TrafficConfig {
  /// Mean query arrival rate; inter-arrival gaps are exponential.
  double queries_per_second = 1.0;
  std::map<AdvertiserId, double> base_ctr;
  /// Click probability multiplier per slot step below the top slot.
  double position_decay = 0.6;
  Millis horizon_ms = 60'000;
  Seed seed{};

  /// Throws std::invalid_argument.
  void validate() const;
};

enum class FraudKind { scripted, human };

/// Log-normal law of the gap between human fraud clicks, in ms.
struct DwellDistribution {
  double mu = std::log(3000.0);
  double sigma = 0.8;

  double mean() const { return std::exp(mu + 0.5 * sigma * sigma); }
};

struct FraudPlan {
  FraudKind kind = FraudKind::scripted;
  AdvertiserId target;
  Millis start_ms = 0;
  std::int64_t count = 1;
  /// Fixed gap between scripted clicks.
  Millis interval_ms = 100;
  /// Gap law for human clicks.
  DwellDistribution dwell{};
  Seed seed{};

  void validate() const;
};

struct FraudFlag {
  Millis start_ms = 0;
  Millis end_ms = 0;
  AdvertiserId advertiser;
  /// Clicks are identified by the impression they reference.
  std::vector<std::uint64_t> flagged_click_ids;
  std::string reason = "fixed_interval_run";
};

struct DetectorConfig {
  std::int64_t min_run = 5;
  Millis tolerance_ms = 10;
  /// How many later clicks are tried as the second element of a run, so that
  /// unrelated clicks interleaved with a script do not hide it.
  std::int64_t max_skip = 8;

  void validate() const;
};

/// Hands out impression and query ids that are fresh for a given log.
struct IdCounter {
  std::uint64_t next_impression = 0;
  std::int64_t next_query = 0;

  static IdCounter after(const EventLog& log) {
    return {log.next_impression_id(), log.next_query_id()};
  }
};

/// Stateful organic traffic source; successive calls continue the same
/// arrival process and random stream.
class OrganicGenerator {
 public:
  explicit OrganicGenerator(TrafficConfig cfg);

  /// Events of every query arriving before `to_ms` (and after the previous
  /// call) served with `allocation`. Clicks share their impression's time.
  /// Throws std::invalid_argument if an allocated advertiser has no base CTR.
  std::vector<Event> generate(Millis to_ms, std::span<const SlotAllocation> allocation,
                              IdCounter& ids);

 private:
  TrafficConfig cfg_;
  Rng rng_;
  double next_arrival_ms_;
};

/// Organic log over the configured horizon with a fixed allocation.
EventLog gen_organic(const TrafficConfig& cfg, std::span<const SlotAllocation> allocation);

/// Click times of a fraud plan: start, start + interval, ... for scripted
/// plans; seeded log-normal gaps (at least 1 ms) for human plans.
std::vector<Millis> fraud_click_times(const FraudPlan& plan);

/// Builds the impression + click pair for each fraudulent click. The slot is
/// `slot_of(t)`; ids come from `ids`.
std::vector<Event> fraud_events(const FraudPlan& plan, std::span<const Millis> times,
                                const std::function<int(Millis)>& slot_of, IdCounter& ids);

/// Each injected click comes with its own impression at the same time, in the
/// target's most recent slot (slot 1 when it has none). Throws
/// HorizonExceeded when a click would land at or past the log horizon.
EventLog inject_scripted_fraud(const EventLog& log, const FraudPlan& plan);
EventLog inject_human_fraud(const EventLog& log, const FraudPlan& plan);

/// Flags every run of at least `min_run` clicks of one advertiser whose
/// successive gaps all lie within +/- tolerance of the run's median gap.
/// Runs are chains through the advertiser's click stream: clicks between two
/// run members need not belong to the run. A flag also lists every click
/// sharing a timestamp with one of its members.
std::vector<FraudFlag> detect_scripted(const ObservedLog& view, const DetectorConfig& cfg = {});

}  // namespace sponsim
