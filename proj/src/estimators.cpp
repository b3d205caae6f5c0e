#include "sponsim/estimators.hpp"

#include <algorithm>
#include <stdexcept>

#include "sponsim/error.hpp"

namespace sponsim {

CtrEstimate CtrEstimate::ratio(std::int64_t clicks, std::int64_t denominator) {
  CtrEstimate e;
  e.clicks_in_window = clicks;
  e.denominator = denominator;
  e.defined = denominator > 0;
  e.value = e.defined ? static_cast<double>(clicks) / static_cast<double>(denominator) : 0.0;
  return e;
}

WindowSpec WindowSpec::time_window(Millis t_ms) { return {WindowKind::time, t_ms}; }
WindowSpec WindowSpec::impression_window(std::int64_t y) { return {WindowKind::impressions, y}; }
WindowSpec WindowSpec::click_window(std::int64_t x) { return {WindowKind::clicks, x}; }
WindowSpec WindowSpec::relative_cumulative() { return {WindowKind::relative, 0}; }
WindowSpec WindowSpec::relative_interval(Millis interval_ms) {
  return {WindowKind::relative, interval_ms};
}

std::string WindowSpec::column_name() const {
  switch (kind) {
    case WindowKind::time:
      return "ctr_time";
    case WindowKind::impressions:
      return "ctr_impr";
    case WindowKind::clicks:
      return "ctr_click";
    case WindowKind::relative:
      return "ctr_relative";
  }
  return "ctr_relative";
}

void WindowSpec::validate() const {
  if (kind == WindowKind::relative) {
    if (size < 0) throw std::invalid_argument("relative interval must be >= 0");
  } else if (size < 1) {
    throw std::invalid_argument(column_name() + " window must be >= 1");
  }
}

// ---------------------------------------------------------------------------

TimeWindowCtr::TimeWindowCtr(AdvertiserId advertiser, Millis window_ms)
    : advertiser_(std::move(advertiser)), window_ms_(window_ms) {
  if (window_ms < 1) throw std::invalid_argument("time window must be >= 1 ms");
}

void TimeWindowCtr::observe(const ObservedEvent& e) {
  last_seen_ = std::max(last_seen_, e.t);
  if (e.advertiser != advertiser_) return;
  (e.is_click() ? clicks_ : impressions_).push_back(e.t);
}

CtrEstimate TimeWindowCtr::estimate(Millis now) {
  if (last_seen_ >= now) throw std::logic_error("time window queried at or before an observed event");
  const Millis from = now - window_ms_;
  while (!impressions_.empty() && impressions_.front() < from) impressions_.pop_front();
  while (!clicks_.empty() && clicks_.front() < from) clicks_.pop_front();
  return CtrEstimate::ratio(static_cast<std::int64_t>(clicks_.size()),
                            static_cast<std::int64_t>(impressions_.size()));
}

ImpressionWindowCtr::ImpressionWindowCtr(AdvertiserId advertiser, std::int64_t window)
    : advertiser_(std::move(advertiser)), window_(window) {
  if (window < 1) throw std::invalid_argument("impression window must be >= 1");
}

void ImpressionWindowCtr::observe(const ObservedEvent& e) {
  if (e.advertiser != advertiser_) return;
  if (e.is_impression()) {
    position_[e.impression_id] = evicted_ + recent_.size();
    recent_.push_back({e.impression_id, false});
    if (static_cast<std::int64_t>(recent_.size()) > window_) {
      if (recent_.front().clicked) --clicked_in_window_;
      position_.erase(recent_.front().id);
      recent_.pop_front();
      ++evicted_;
    }
    return;
  }
  auto it = position_.find(e.impression_id);
  if (it == position_.end()) return;  // impression already left the window
  auto& slot = recent_[it->second - evicted_];
  if (!slot.clicked) {
    slot.clicked = true;
    ++clicked_in_window_;
  }
}

CtrEstimate ImpressionWindowCtr::estimate() const {
  return CtrEstimate::ratio(clicked_in_window_, static_cast<std::int64_t>(recent_.size()));
}

ClickWindowCtr::ClickWindowCtr(AdvertiserId advertiser, std::int64_t window)
    : advertiser_(std::move(advertiser)), window_(window) {
  if (window < 1) throw std::invalid_argument("click window must be >= 1");
}

void ClickWindowCtr::observe(const ObservedEvent& e) {
  if (e.advertiser != advertiser_) return;
  if (e.is_impression()) {
    ordinal_[e.impression_id] = impressions_seen_++;
    return;
  }
  auto it = ordinal_.find(e.impression_id);
  if (it == ordinal_.end()) return;
  click_ordinals_.push_back(it->second);
  if (static_cast<std::int64_t>(click_ordinals_.size()) > window_) click_ordinals_.pop_front();
}

CtrEstimate ClickWindowCtr::estimate() const {
  if (static_cast<std::int64_t>(click_ordinals_.size()) < window_) {
    CtrEstimate e;
    e.clicks_in_window = static_cast<std::int64_t>(click_ordinals_.size());
    return e;
  }
  return CtrEstimate::ratio(window_, impressions_seen_ - click_ordinals_.front());
}

RelativeCtr::RelativeCtr(std::vector<AdvertiserId> cohort, Millis interval_ms)
    : cohort_(std::move(cohort)), interval_ms_(interval_ms) {
  if (interval_ms < 0) throw std::invalid_argument("relative interval must be >= 0");
  std::sort(cohort_.begin(), cohort_.end());
  for (const auto& adv : cohort_) counts_.emplace(adv, 0);
}

bool RelativeCtr::member(const AdvertiserId& advertiser) const {
  return cohort_.empty() || std::binary_search(cohort_.begin(), cohort_.end(), advertiser);
}

void RelativeCtr::observe(const ObservedEvent& e) {
  last_seen_ = std::max(last_seen_, e.t);
  if (!e.is_click() || !member(e.advertiser)) return;
  ++counts_[e.advertiser];
  ++total_;
  if (interval_ms_ > 0) window_.emplace_back(e.t, e.advertiser);
}

ClickTally RelativeCtr::tally(Millis now) {
  if (last_seen_ >= now) throw std::logic_error("relative CTR queried at or before an observed event");
  Millis from = 0;
  if (interval_ms_ > 0) {
    from = now - interval_ms_;
    while (!window_.empty() && window_.front().first < from) {
      --counts_[window_.front().second];
      --total_;
      window_.pop_front();
    }
  }
  ClickTally out;
  out.from_ms = std::max<Millis>(from, 0);
  out.to_ms = now;
  out.per_advertiser = counts_;
  out.total = total_;
  return out;
}

CtrEstimate RelativeCtr::estimate(const AdvertiserId& advertiser, Millis now) {
  return ctr_relative(tally(now), advertiser);
}

// ---------------------------------------------------------------------------

namespace {

// Feeds events with t < now (strict) or t <= now into `sink`.
template <typename Sink>
void feed(const ObservedLog& log, Millis now, bool inclusive, Sink& sink) {
  for (const auto& e : log) {
    if (inclusive ? e.t > now : e.t >= now) break;
    sink.observe(e);
  }
}

}  // namespace

CtrEstimate ctr_time_window(const ObservedLog& log, const AdvertiserId& adv, Millis window_ms,
                            Millis now) {
  TimeWindowCtr est(adv, window_ms);
  feed(log, now, false, est);
  return est.estimate(now);
}

CtrEstimate ctr_impression_window(const ObservedLog& log, const AdvertiserId& adv,
                                  std::int64_t window, Millis now) {
  ImpressionWindowCtr est(adv, window);
  feed(log, now, true, est);
  return est.estimate();
}

CtrEstimate ctr_click_window(const ObservedLog& log, const AdvertiserId& adv,
                             std::int64_t window, Millis now) {
  ClickWindowCtr est(adv, window);
  feed(log, now, true, est);
  return est.estimate();
}

CtrEstimate ctr_relative(const ClickTally& tally, const AdvertiserId& adv) {
  return CtrEstimate::ratio(tally.count(adv), tally.total);
}

CtrEstimate ctr_relative(const ObservedLog& log, const AdvertiserId& adv, WindowSpec window,
                         Millis now, std::span<const AdvertiserId> cohort) {
  window.validate();
  const Millis from = window.cumulative() ? 0 : std::max<Millis>(now - window.size, 0);
  return ctr_relative(tally(log, from, now, cohort), adv);
}

CtrEstimate estimate(const ObservedLog& log, const AdvertiserId& adv, const WindowSpec& window,
                     Millis now, std::span<const AdvertiserId> cohort) {
  window.validate();
  switch (window.kind) {
    case WindowKind::time:
      return ctr_time_window(log, adv, window.size, now);
    case WindowKind::impressions:
      return ctr_impression_window(log, adv, window.size, now);
    case WindowKind::clicks:
      return ctr_click_window(log, adv, window.size, now);
    case WindowKind::relative:
      return ctr_relative(log, adv, window, now, cohort);
  }
  return {};
}

double ctr_clicks_over_displays(std::int64_t clicks, std::int64_t impressions) {
  if (clicks < 0 || impressions < 0) throw std::invalid_argument("negative count");
  if (clicks + impressions == 0) throw DivisionByZero("no clicks and no impressions");
  return static_cast<double>(clicks) / static_cast<double>(impressions + clicks);
}

bool relative_ctr_falls(std::int64_t own, std::int64_t total, std::int64_t delta_own,
                        std::int64_t delta_total) {
  if (total <= 0 || delta_total <= 0 || delta_own < 0 || delta_own > delta_total || own < 0 ||
      own > total) {
    throw std::invalid_argument("relative_ctr_falls: counts out of range");
  }
  // (own + d) / (total + D) < own / total  <=>  d * total < own * D
  __extension__ using wide = __int128;
  return static_cast<wide>(delta_own) * total < static_cast<wide>(own) * delta_total;
}

}  // namespace sponsim
