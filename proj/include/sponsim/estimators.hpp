#pragma once

// Click-through-rate estimators. Three windowed clicks/impressions ratios
// (fixed time window, last Y impressions, impressions since the X-th last
// click) and the relative-clicks ratio C_i / sum_j C_j over an advertiser
// cohort.
//
// Each windowed estimator exists as a streaming fold (observe events in log
// order, ask for an estimate at any event boundary) and as a batch function
// over a label-stripped log; the batch functions run the streaming fold.

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sponsim/core.hpp"

namespace sponsim {

struct CtrEstimate {
  double value = 0.0;
  /// Numerator: clicks counted in the window.
  std::int64_t clicks_in_window = 0;
  /// Impressions in the window, or cohort total clicks for relative CTR.
  std::int64_t denominator = 0;
  /// False while the denominator is zero (cold start).
  bool defined = false;

  static CtrEstimate ratio(std::int64_t clicks, std::int64_t denominator);
  std::optional<double> value_if_defined() const {
    return defined ? std::optional<double>(value) : std::nullopt;
  }
};

enum class WindowKind { time, impressions, clicks, relative };

struct WindowSpec {
  WindowKind kind = WindowKind::relative;
  /// T in ms, Y impressions, X clicks, or the relative interval in ms
  /// (0 means cumulative from the start of the log).
  std::int64_t size = 0;

  static WindowSpec time_window(Millis t_ms);
  static WindowSpec impression_window(std::int64_t y);
  static WindowSpec click_window(std::int64_t x);
  static WindowSpec relative_cumulative();
  static WindowSpec relative_interval(Millis interval_ms);

  bool cumulative() const noexcept { return kind == WindowKind::relative && size == 0; }
  /// CSV column name: ctr_time, ctr_impr, ctr_click or ctr_relative.
  std::string column_name() const;
  /// Throws std::invalid_argument when the size is out of range.
  void validate() const;

  friend bool operator==(const WindowSpec&, const WindowSpec&) = default;
};

/// Clicks of one advertiser in [now - T, now) over its impressions in the
/// same interval.
class TimeWindowCtr {
 public:
  TimeWindowCtr(AdvertiserId advertiser, Millis window_ms);

  void observe(const ObservedEvent& e);
  /// Every observed event must satisfy t < now; throws std::logic_error
  /// otherwise.
  CtrEstimate estimate(Millis now);

 private:
  AdvertiserId advertiser_;
  Millis window_ms_;
  Millis last_seen_ = -1;
  std::deque<Millis> impressions_;
  std::deque<Millis> clicks_;
};

/// Clicks landing on the advertiser's last Y impressions. Fewer than Y
/// impressions use the actual count as denominator.
class ImpressionWindowCtr {
 public:
  ImpressionWindowCtr(AdvertiserId advertiser, std::int64_t window);

  void observe(const ObservedEvent& e);
  CtrEstimate estimate() const;

 private:
  struct Slot {
    std::uint64_t id;
    bool clicked;
  };

  AdvertiserId advertiser_;
  std::int64_t window_;
  std::deque<Slot> recent_;
  std::unordered_map<std::uint64_t, std::size_t> position_;  // id -> absolute ordinal
  std::size_t evicted_ = 0;
  std::int64_t clicked_in_window_ = 0;
};

/// X over the number of the advertiser's impressions from the impression of
/// its X-th most recent click up to now; undefined with fewer than X clicks.
class ClickWindowCtr {
 public:
  ClickWindowCtr(AdvertiserId advertiser, std::int64_t window);

  void observe(const ObservedEvent& e);
  CtrEstimate estimate() const;

 private:
  AdvertiserId advertiser_;
  std::int64_t window_;
  std::int64_t impressions_seen_ = 0;
  std::unordered_map<std::uint64_t, std::int64_t> ordinal_;  // impression id -> ordinal
  std::deque<std::int64_t> click_ordinals_;                  // last X clicks
};

/// Running per-advertiser click counts, cumulative or over a sliding
/// [now - interval, now) window.
class RelativeCtr {
 public:
  /// An empty cohort counts every advertiser seen in the stream.
  explicit RelativeCtr(std::vector<AdvertiserId> cohort = {}, Millis interval_ms = 0);

  void observe(const ObservedEvent& e);
  /// Every observed event must satisfy t < now; throws std::logic_error
  /// otherwise.
  ClickTally tally(Millis now);
  CtrEstimate estimate(const AdvertiserId& advertiser, Millis now);

 private:
  bool member(const AdvertiserId& advertiser) const;

  std::vector<AdvertiserId> cohort_;
  Millis interval_ms_;
  std::map<AdvertiserId, std::int64_t> counts_;
  std::deque<std::pair<Millis, AdvertiserId>> window_;
  std::int64_t total_ = 0;
  Millis last_seen_ = -1;
};

// Batch forms over a label-stripped log.

CtrEstimate ctr_time_window(const ObservedLog& log, const AdvertiserId& adv, Millis window_ms,
                            Millis now);
CtrEstimate ctr_impression_window(const ObservedLog& log, const AdvertiserId& adv,
                                  std::int64_t window, Millis now);
CtrEstimate ctr_click_window(const ObservedLog& log, const AdvertiserId& adv,
                             std::int64_t window, Millis now);

/// C_adv / total; undefined when the tally is empty. An advertiser missing
/// from the tally counts as zero clicks.
CtrEstimate ctr_relative(const ClickTally& tally, const AdvertiserId& adv);

/// Relative CTR over the cohort's clicks in `window`, ending at now.
CtrEstimate ctr_relative(const ObservedLog& log, const AdvertiserId& adv, WindowSpec window,
                         Millis now, std::span<const AdvertiserId> cohort = {});

/// Whichever estimator `window` describes, evaluated at now.
CtrEstimate estimate(const ObservedLog& log, const AdvertiserId& adv, const WindowSpec& window,
                     Millis now, std::span<const AdvertiserId> cohort = {});

/// clicks / (impressions + clicks), for series whose impression count only
/// covers displays that were not clicked. Throws DivisionByZero when both
/// are zero.
double ctr_clicks_over_displays(std::int64_t clicks, std::int64_t impressions);

/// Exact test of whether adding `delta_own` clicks to an advertiser with
/// `own` clicks, and `delta_total` clicks to a cohort total of `total`,
/// lowers its relative CTR: delta_own / delta_total < own / total.
/// Requires total > 0 and delta_total >= delta_own >= 0, delta_total > 0.
bool relative_ctr_falls(std::int64_t own, std::int64_t total, std::int64_t delta_own,
                        std::int64_t delta_total);

}  // namespace sponsim
