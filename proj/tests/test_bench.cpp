#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <doctest.h>

#include "sponsim/bench.hpp"
#include "sponsim/error.hpp"
#include "sponsim/io.hpp"
#include "support.hpp"

using namespace sponsim;
using namespace sponsim::testing;

namespace {

// Reference series written out by hand, independent of the library.
const std::int64_t kImpressions[20] = {16,  28,  40,  52,  64,  76,  88,  100, 112, 124,
                                       136, 148, 160, 172, 184, 196, 208, 220, 232, 244};
const std::int64_t kClicks[20] = {2,  6,  12, 18, 24, 30, 36, 42,  48,  54,
                                  60, 66, 72, 78, 84, 90, 96, 102, 108, 114};
const std::int64_t kTotals[20] = {22,  50,  84,  124, 170, 222, 280,  344,  414,  490,
                                  572, 660, 754, 854, 960, 1072, 1190, 1314, 1444, 1580};

ScenarioConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::string config_field_error(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& ex) {
    return ex.field();
  }
  return "";
}

// Two-advertiser config; `scenario` adds keys to its [scenario] section.
std::string base(const std::string& scenario = "") {
  return R"(
[scenario]
seed = 3
horizon_ms = 20000
)" + scenario + R"(
[advertiser.A]
bid_cents = 100
base_ctr = 0.2
[advertiser.B]
bid_cents = 90
base_ctr = 0.2
)";
}

const std::string kBase = base();

}  // namespace

TEST_CASE("reconstructed series matches the hand-written reference") {
  for (int t = 1; t <= 20; ++t) {
    CHECK(reconstructed_impressions(t) == kImpressions[t - 1]);
    CHECK(reconstructed_clicks(t) == kClicks[t - 1]);
    CHECK(reconstructed_total_clicks(t) == kTotals[t - 1]);
  }
  CHECK_THROWS_AS(reconstructed_clicks(0), std::out_of_range);
}

TEST_CASE("table replay reproduces the printed rates") {
  const auto replay = replay_reference_tables();
  REQUIRE(replay.table1.size() == 20);
  REQUIRE(replay.table2.size() == 20);

  CHECK(format_rate(*replay.table1[3].ctr("ctr_old"), 3) == "0.257");
  CHECK(format_rate(*replay.table2[3].ctr("ctr_new"), 3) == "0.145");
  CHECK(*replay.table1[8].ctr("ctr_old") == doctest::Approx(0.3));
  CHECK(*replay.table2[18].total_clicks == 1444);
  CHECK(format_rate(*replay.table2[18].ctr("ctr_new")) == "0.0748");
  CHECK(format_rate(*replay.table2[6].ctr("ctr_new")) == "0.1286");

  int matching = 0;
  for (int table : {1, 2}) {
    const auto& printed = table == 1 ? printed_table1() : printed_table2();
    const auto& rows = table == 1 ? replay.table1 : replay.table2;
    for (int i = 0; i < 20; ++i) {
      const double want = table == 1
                              ? static_cast<double>(kClicks[i]) /
                                    static_cast<double>(kImpressions[i] + kClicks[i])
                              : static_cast<double>(kClicks[i]) / static_cast<double>(kTotals[i]);
      const double got = *rows[i].ctr(table == 1 ? "ctr_old" : "ctr_new");
      CHECK(got == doctest::Approx(want).epsilon(1e-12));
      if (std::abs(std::stod(printed[i].ctr) - got) <= kPrintedCtrTolerance) ++matching;
    }
  }
  CHECK(matching == 39);
}

TEST_CASE("errata ledger holds exactly the four anomalies") {
  const auto errata = replay_reference_tables().errata;
  REQUIRE(errata.size() == 4);

  CHECK(errata[0].tables == std::vector<int>{1, 2});
  CHECK(errata[0].column == "clicks");
  CHECK(errata[0].first_row == 7);
  CHECK(errata[0].last_row == 20);

  CHECK(errata[1].tables == std::vector<int>{1});
  CHECK(errata[1].column == "ctr");
  CHECK(errata[1].first_row == 9);
  CHECK(errata[1].printed == "3.0");

  CHECK(errata[2].tables == std::vector<int>{2});
  CHECK(errata[2].column == "total_clicks");
  CHECK(errata[2].first_row == 19);
  CHECK(errata[2].printed == "0.317");
  CHECK(errata[2].reconstructed == "1444");

  CHECK(errata[3].first_row == 20);
  CHECK(errata[3].printed == "1444");
  CHECK(errata[3].reconstructed == "1580");

  for (const auto& e : errata) CHECK_FALSE(e.justification.empty());
}

TEST_CASE("printed cells outside the ledger equal the reconstruction") {
  const auto errata = replay_reference_tables().errata;
  auto listed = [&](int table, int row, const std::string& column) {
    return std::any_of(errata.begin(), errata.end(), [&](const Erratum& e) {
      return std::find(e.tables.begin(), e.tables.end(), table) != e.tables.end() &&
             e.column == column && row >= e.first_row && row <= e.last_row;
    });
  };
  for (int table : {1, 2}) {
    const auto& printed = table == 1 ? printed_table1() : printed_table2();
    for (int i = 0; i < 20; ++i) {
      const int row = i + 1;
      if (!listed(table, row, "impressions")) CHECK(std::stoll(printed[i].impressions) == kImpressions[i]);
      if (!listed(table, row, "clicks")) CHECK(std::stoll(printed[i].clicks) == kClicks[i]);
      if (table == 2 && !listed(table, row, "total_clicks")) {
        CHECK(printed[i].total_clicks == std::to_string(kTotals[i]));
      }
    }
  }
  const auto report = tables_report(replay_reference_tables());
  CHECK(report.find("Errata (4)") != std::string::npos);
}

TEST_CASE("curve shapes of the replayed tables") {
  const auto replay = replay_reference_tables();
  const auto old_report = curve_shape_check(replay.table1);
  CHECK_FALSE(old_report.peak_tick);
  const auto new_report = curve_shape_check(replay.table2);
  REQUIRE(new_report.peak_tick);
  CHECK(*new_report.peak_tick == 4);
  CHECK(format_rate(*replay.table1.front().ctr("ctr_old"), 3) == "0.111");
  CHECK(format_rate(*replay.table1.back().ctr("ctr_old"), 3) == "0.318");
  CHECK(format_rate(*replay.table2.back().ctr("ctr_new"), 3) == "0.072");
}

TEST_CASE("shape checks reject shuffled and flat series") {
  auto series = replay_reference_tables().table2;
  std::swap(series[10], series[11]);
  try {
    curve_shape_check(series);
    FAIL("expected a shape violation");
  } catch (const ShapeViolation& ex) {
    CHECK(ex.column() == "ctr_new");
    CHECK(ex.tick() == 11);
  }

  auto rising = replay_reference_tables().table1;
  std::swap(rising[0], rising[1]);
  CHECK_THROWS_AS(curve_shape_check(rising), ShapeViolation);

  auto only_up = replay_reference_tables().table2;
  only_up.resize(4);
  CHECK_THROWS_AS(check_rise_then_fall(only_up, "ctr_new"), ShapeViolation);

  std::vector<SeriesRow> unnamed(3);
  for (auto& r : unnamed) r.ctrs.emplace_back("ctr_time", 0.1);
  CHECK_THROWS_AS(curve_shape_check(unnamed), std::invalid_argument);
}

TEST_CASE("CSV emission: header plus one line per row, round-trips to 4 decimals") {
  const auto rows = replay_reference_tables().table2;
  const auto csv = series_csv(rows);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 21);
  CHECK(csv.rfind("time,impressions,clicks,total_clicks,ctr_new\r\n", 0) == 0);

  std::istringstream in(csv);
  const auto back = parse_series_csv(in);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].time_index == rows[i].time_index);
    CHECK(back[i].impressions == rows[i].impressions);
    CHECK(back[i].clicks == rows[i].clicks);
    CHECK(back[i].total_clicks == rows[i].total_clicks);
    CHECK(*back[i].ctr("ctr_new") == round_half_up(*rows[i].ctr("ctr_new")));
  }

  const auto dir = std::filesystem::temp_directory_path() / "sponsim_test_csv";
  std::filesystem::remove_all(dir);
  emit_csv(rows, dir / "nested" / "t2.csv");
  std::ifstream file(dir / "nested" / "t2.csv", std::ios::binary);
  std::stringstream contents;
  contents << file.rdbuf();
  CHECK(contents.str() == csv);
  CHECK_FALSE(std::filesystem::exists(dir / "nested" / "t2.csv.tmp"));
  CHECK_THROWS_AS(emit_csv({}, dir / "empty.csv"), std::invalid_argument);
}

TEST_CASE("undefined estimates are empty CSV cells, never zero") {
  std::vector<SeriesRow> rows(2);
  rows[0].time_index = 1;
  rows[0].ctrs = {{"ctr_click", std::nullopt}, {"ctr_time", 0.0}};
  rows[1].time_index = 2;
  rows[1].ctrs = {{"ctr_click", 0.5}, {"ctr_time", 0.25}};
  const auto csv = series_csv(rows);
  CHECK(csv.find("1,0,0,,,0.0000\r\n") != std::string::npos);
  std::istringstream in(csv);
  const auto back = parse_series_csv(in);
  CHECK_FALSE(back[0].ctr("ctr_click").has_value());
  CHECK(back[0].ctr("ctr_time") == std::optional<double>(0.0));
}

TEST_CASE("SVG is well-formed with one polyline per estimator") {
  const auto scenario = run_scenario(parse(kBase));
  const auto svg = series_svg(scenario.rows, "A & B <test>");
  std::istringstream in(svg);
  boost::property_tree::ptree tree;
  REQUIRE_NOTHROW(boost::property_tree::read_xml(in, tree));
  int polylines = 0;
  std::vector<std::string> columns;
  for (const auto& [name, child] : tree.get_child("svg")) {
    if (name != "polyline") continue;
    ++polylines;
    columns.push_back(child.get<std::string>("<xmlattr>.data-column"));
  }
  CHECK(polylines == 4);
  CHECK(columns == std::vector<std::string>{"ctr_time", "ctr_impr", "ctr_click", "ctr_relative"});
  CHECK(tree.get<std::string>("svg.<xmlattr>.version") == "1.1");
}

TEST_CASE("config parsing") {
  const auto cfg = parse(kBase + R"(
[auction]
mechanism = gfp
num_slots = 1
reserve_cents = 5
ranking = by_bid
[fraud.f]
kind = scripted
target = B
start_ms = 100
count = 5
[estimators]
list = clicks, relative
click_window = 3
relative_interval_ms = 4000
[detector]
min_run = 6
)");
  CHECK(cfg.mechanism == Mechanism::gfp);
  CHECK(cfg.auction.num_slots == 1);
  CHECK(cfg.auction.reserve_price == 5);
  CHECK(cfg.auction.ranking == Ranking::by_bid);
  REQUIRE(cfg.advertisers.size() == 2);
  CHECK(cfg.advertisers[1].value == 90);
  REQUIRE(cfg.fraud.size() == 1);
  CHECK(cfg.fraud[0].plan.interval_ms == 100);
  CHECK(cfg.fraud[0].plan.seed.value == mix_seed(3, 1));
  CHECK(cfg.estimators ==
        std::vector<WindowSpec>{WindowSpec::click_window(3), WindowSpec::relative_interval(4000)});
  CHECK(cfg.detector.min_run == 6);
  CHECK(cfg.focus_advertiser() == adv("B"));

  const auto example = load_config(SPONSIM_SOURCE_DIR "/configs/example.ini");
  CHECK(example.advertisers.size() == 3);
  CHECK(example.fraud.size() == 2);
}

TEST_CASE("config errors name the offending field") {
  CHECK(config_field_error(base("bogus = 1")) == "scenario.bogus");
  CHECK(config_field_error(kBase + "[weird]\nx = 1\n") == "weird");
  CHECK(config_field_error("[advertiser.A]\nbase_ctr = 0.1\n") == "advertiser.A.bid_cents");
  CHECK(config_field_error("[advertiser.A]\nbid_cents = ten\nbase_ctr = 0.1\n") ==
        "advertiser.A.bid_cents");
  CHECK(config_field_error("[advertiser.A]\nbid_cents = 1\nbase_ctr = 1.5\n") ==
        "advertiser.A.base_ctr");
  CHECK(config_field_error("[scenario]\nseed = 1\n") == "advertiser");
  CHECK(config_field_error(kBase + "[auction]\nmechanism = vcg\n") == "auction.mechanism");
  CHECK(config_field_error(base("tick_ms = 0")).rfind("scenario", 0) == 0);
  CHECK(config_field_error(kBase + "[fraud.x]\nkind = scripted\ntarget = Z\nstart_ms = 0\ncount = 5\n") ==
        "fraud.x.target");
  CHECK(config_field_error(kBase + "[fraud.x]\nkind = scripted\ntarget = A\nstart_ms = 19900\n"
                                   "count = 5\n") == "fraud.x.count");
  CHECK(config_field_error(kBase + "[estimators]\nlist = time, magic\n") == "estimators.list");
  CHECK(config_field_error(kBase + "[detector]\nmin_run = 2\n") == "detector");
  CHECK(config_field_error(base("focus = Q")) == "scenario.focus");
  CHECK_THROWS_AS(load_config("/nonexistent/sponsim.ini"), ConfigError);
}

TEST_CASE("symmetric advertisers share relative CTR evenly") {
  const auto cfg = parse(R"(
[scenario]
seed = 9
horizon_ms = 60000
tick_ms = 2000
[auction]
num_slots = 3
[traffic]
queries_per_second = 10
position_decay = 1.0
[advertiser.A]
bid_cents = 100
base_ctr = 0.3
[advertiser.B]
bid_cents = 100
base_ctr = 0.3
[advertiser.C]
bid_cents = 100
base_ctr = 0.3
[estimators]
list = relative
)");
  const auto result = run_scenario(cfg);
  REQUIRE(result.rows.size() == 30);
  for (const auto& row : result.rows) {
    CAPTURE(row.time_index);
    const auto v = row.ctr("ctr_relative");
    REQUIRE(v);
    // Binomial share of n clicks: 4 standard deviations of 1/3.
    const double n = static_cast<double>(*row.total_clicks);
    CHECK(std::abs(*v - 1.0 / 3.0) <= 4.0 * std::sqrt(2.0 / 9.0 / n));
  }
  CHECK(*result.rows.back().ctr("ctr_relative") == doctest::Approx(1.0 / 3.0).epsilon(0.1));
}

TEST_CASE("a scripted burst drives the time-window CTR up") {
  const auto cfg = parse(R"(
[scenario]
seed = 5
horizon_ms = 20000
tick_ms = 250
focus = B
[traffic]
queries_per_second = 2
[advertiser.A]
bid_cents = 100
base_ctr = 0.1
[advertiser.B]
bid_cents = 90
base_ctr = 0.1
[fraud.burst]
kind = scripted
target = B
start_ms = 10000
count = 80
interval_ms = 25
[estimators]
list = time
time_window_ms = 5000
)");
  const auto result = run_scenario(cfg);
  const auto view = result.log.observed();
  double prev = -1;
  for (const auto& row : result.rows) {
    const Millis now = static_cast<Millis>(row.time_index) * 250;
    const auto want = oracle_time_window(view, adv("B"), 5000, now);
    const auto got = row.ctr("ctr_time");
    CHECK(got.has_value() == want.defined());
    if (got) CHECK(*got == want.value());
    // Ticks ending inside the burst, which runs over [10000, 12000).
    if (now > 10000 && now <= 12000) {
      REQUIRE(got);
      CHECK(*got > prev);
    }
    if (got) prev = *got;
  }
  REQUIRE(result.flags.size() == 1);
  CHECK(result.flags[0].flagged_click_ids.size() == 80);
}

TEST_CASE("drop mode removes flagged clicks from every estimator") {
  auto cfg = parse(kBase + R"(
[fraud.burst]
kind = scripted
target = A
start_ms = 5000
count = 40
interval_ms = 100
)");
  const auto counted = run_scenario(cfg);
  cfg.flagged = FlaggedClicks::drop;
  const auto dropped = run_scenario(cfg);
  CHECK(counted.rows.back().clicks - dropped.rows.back().clicks >= 40);
  CHECK(*counted.rows.back().ctr("ctr_relative") > *dropped.rows.back().ctr("ctr_relative"));
}

TEST_CASE("scenarios are deterministic down to the bytes") {
  auto cfg = load_config(SPONSIM_SOURCE_DIR "/configs/example.ini");
  const auto a = run_scenario(cfg);
  const auto b = run_scenario(cfg);
  CHECK(a.rows == b.rows);
  std::ostringstream la, lb;
  write_log(a.log, la);
  write_log(b.log, lb);
  CHECK(la.str() == lb.str());
  CHECK(series_csv(a.rows) == series_csv(b.rows));

  cfg.seed = Seed{cfg.seed.value + 1};
  std::ostringstream lc;
  write_log(run_scenario(cfg).log, lc);
  CHECK(lc.str() != la.str());
}

TEST_CASE("replaying a saved log reproduces the scenario's rows") {
  const auto cfg = load_config(SPONSIM_SOURCE_DIR "/configs/example.ini");
  const auto result = run_scenario(cfg);
  std::ostringstream out;
  write_log(result.log, out);
  std::istringstream in(out.str());
  const auto log = read_log(in);

  ReplayOptions options;
  options.focus = cfg.focus_advertiser();
  options.tick_ms = cfg.tick_ms;
  options.estimators = cfg.estimators;
  const auto rows = replay_log(log, options);
  const std::size_t common = std::min(rows.size(), result.rows.size());
  CHECK(common >= result.rows.size() - 1);
  for (std::size_t i = 0; i < common; ++i) CHECK(rows[i] == result.rows[i]);

  options.focus = adv("nobody");
  CHECK_THROWS_AS(replay_log(log, options), std::invalid_argument);
}
