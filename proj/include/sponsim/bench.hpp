#pragma once

// Scenario runner, reference-table replay with its errata ledger, curve shape
// checks, and CSV/SVG emission.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sponsim/auction.hpp"
#include "sponsim/core.hpp"
#include "sponsim/estimators.hpp"
#include "sponsim/traffic.hpp"

namespace sponsim {

// ---------------------------------------------------------------------------
// Series

struct SeriesRow {
  int time_index = 0;
  std::int64_t impressions = 0;
  std::int64_t clicks = 0;
  std::optional<std::int64_t> total_clicks;
  /// (column name, value); nullopt while the estimator is undefined.
  std::vector<std::pair<std::string, std::optional<double>>> ctrs;

  /// Throws std::out_of_range for an unknown column.
  std::optional<double> ctr(std::string_view column) const;

  friend bool operator==(const SeriesRow&, const SeriesRow&) = default;
};

/// Header: time,impressions,clicks,total_clicks,<ctr columns>. Rates use 4
/// decimals; undefined rates and absent totals are empty cells.
std::string series_csv(const std::vector<SeriesRow>& series);
/// Throws std::invalid_argument if the series is empty; IoError on write.
void emit_csv(const std::vector<SeriesRow>& series, const std::filesystem::path& path);
/// Throws std::invalid_argument on a malformed header or row.
std::vector<SeriesRow> parse_series_csv(std::istream& in);

/// SVG 1.1 line chart, one polyline per CTR column, linear axes.
std::string series_svg(const std::vector<SeriesRow>& series, std::string_view title);
void emit_plot(const std::vector<SeriesRow>& series, const std::filesystem::path& path,
               std::string_view title = "CTR over time");

// ---------------------------------------------------------------------------
// Scenarios

struct AdvertiserSpec {
  AdvertiserId id;
  Cents bid = 0;
  Cents value = 0;
  double base_ctr = 0.0;
};

struct NamedFraudPlan {
  std::string name;
  FraudPlan plan;
};

/// What estimators do with clicks the scripted-click detector flags.
enum class FlaggedClicks { count, drop };

struct ScenarioConfig {
  std::vector<AdvertiserSpec> advertisers;
  Mechanism mechanism = Mechanism::gsp;
  AuctionConfig auction{2, 0, Ranking::by_ctr_weighted};
  double queries_per_second = 2.0;
  double position_decay = 0.6;
  Millis horizon_ms = 20'000;
  Seed seed{42};
  std::vector<NamedFraudPlan> fraud;
  std::vector<WindowSpec> estimators{WindowSpec::time_window(5'000),
                                     WindowSpec::impression_window(100),
                                     WindowSpec::click_window(10),
                                     WindowSpec::relative_cumulative()};
  /// Estimator whose values feed CTR-weighted ranking.
  WindowSpec ranking_estimator = WindowSpec::relative_cumulative();
  /// CTR used for ranking while an advertiser's estimate is undefined.
  double cold_start_ctr = 0.1;
  Millis tick_ms = 1'000;
  std::optional<AdvertiserId> focus;
  FlaggedClicks flagged = FlaggedClicks::count;
  DetectorConfig detector{};
  std::filesystem::path csv_path;
  std::filesystem::path svg_path;
  std::filesystem::path log_path;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  TrafficConfig traffic() const;
  /// The configured focus, else the first fraud target, else the first
  /// advertiser.
  AdvertiserId focus_advertiser() const;
  std::vector<AdvertiserId> cohort() const;
};

/// INI-style configuration; see configs/example.ini for every key. Unknown
/// sections or keys are rejected. Throws ConfigError.
ScenarioConfig parse_config(std::istream& in);
ScenarioConfig load_config(const std::filesystem::path& path);

struct ScenarioResult {
  std::vector<SeriesRow> rows;
  EventLog log;
  /// Detector output over the final log.
  std::vector<FraudFlag> flags;
};

/// Per tick: rank with current CTR estimates, allocate, generate organic
/// traffic and scheduled fraud, then report the focus advertiser's
/// cumulative impressions and clicks, the cohort's total clicks, and every
/// configured estimator at the end of the tick.
ScenarioResult run_scenario(const ScenarioConfig& cfg);

/// One series row from the events of a label-stripped view with t < now.
SeriesRow series_row(const ObservedLog& view, int time_index, Millis now,
                     const AdvertiserId& focus, std::span<const AdvertiserId> cohort,
                     std::span<const WindowSpec> estimators);

/// The view estimators see: labels stripped, and flagged clicks removed in
/// drop mode.
ObservedLog estimator_view(const EventLog& log, FlaggedClicks mode, const DetectorConfig& detector);

struct ReplayOptions {
  std::optional<AdvertiserId> focus;
  Millis tick_ms = 1'000;
  std::vector<WindowSpec> estimators{WindowSpec::time_window(5'000),
                                     WindowSpec::impression_window(100),
                                     WindowSpec::click_window(10),
                                     WindowSpec::relative_cumulative()};
  FlaggedClicks flagged = FlaggedClicks::count;
  DetectorConfig detector{};
};

/// Re-estimates a saved log tick by tick up to its last event.
std::vector<SeriesRow> replay_log(const EventLog& log, const ReplayOptions& options);

// ---------------------------------------------------------------------------
// Reference tables

/// A row as printed in the reference tables, cells kept verbatim.
struct PrintedRow {
  int t;
  std::string impressions;
  std::string clicks;
  std::string total_clicks;  // empty for the first table
  std::string ctr;
};

const std::vector<PrintedRow>& printed_table1();
const std::vector<PrintedRow>& printed_table2();

/// Arithmetic reconstruction of the series behind both tables.
std::int64_t reconstructed_impressions(int t);
std::int64_t reconstructed_clicks(int t);
std::int64_t reconstructed_total_clicks(int t);

struct Erratum {
  std::vector<int> tables;
  int first_row = 0;
  int last_row = 0;
  std::string column;
  std::string printed;
  std::string reconstructed;
  std::string justification;
};

struct TableReplay {
  /// Columns impressions, clicks and ctr_old.
  std::vector<SeriesRow> table1;
  /// Columns impressions, clicks, total_clicks and ctr_new.
  std::vector<SeriesRow> table2;
  /// Every printed cell that disagrees with the reconstruction.
  std::vector<Erratum> errata;
};

/// Tolerance for comparing a printed 3-decimal CTR against its
/// reconstruction.
inline constexpr double kPrintedCtrTolerance = 1e-3;

TableReplay replay_reference_tables();

/// Plain-text side-by-side report of printed vs reconstructed cells and the
/// errata ledger.
std::string tables_report(const TableReplay& replay);

// ---------------------------------------------------------------------------
// Curve shapes

struct ShapeReport {
  /// Tick of the maximum of ctr_new, when that column is present.
  std::optional<int> peak_tick;
  std::vector<std::string> checks;
};

/// Throws ShapeViolation at the first tick that is not strictly above the
/// previous one.
void check_strictly_increasing(const std::vector<SeriesRow>& series, std::string_view column);
/// Strict rise to an interior peak, then strict fall. Returns the peak tick.
int check_rise_then_fall(const std::vector<SeriesRow>& series, std::string_view column);

/// ctr_old must rise strictly throughout; ctr_new must rise to an interior
/// peak and then fall strictly. Columns absent from the series are skipped;
/// a series with neither is std::invalid_argument.
ShapeReport curve_shape_check(const std::vector<SeriesRow>& series);

}  // namespace sponsim
