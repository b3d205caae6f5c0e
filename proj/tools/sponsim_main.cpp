// sponsim command-line front end.
//
// Exit codes: 0 success, 1 I/O or other runtime failure, 2 bad arguments,
// configuration or input record, 3 shape or acceptance violation.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sponsim/auction.hpp"
#include "sponsim/bench.hpp"
#include "sponsim/error.hpp"
#include "sponsim/io.hpp"

namespace fs = std::filesystem;
using namespace sponsim;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitViolation = 3;
constexpr std::size_t kExpectedErrata = 4;

struct Violation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

FlaggedClicks flagged_mode(const std::string& s) {
  return s == "drop" ? FlaggedClicks::drop : FlaggedClicks::count;
}

std::string money(Cents c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%02lld", static_cast<long long>(c / 100),
                static_cast<long long>(c % 100));
  return buf;
}

void print_flags(const std::vector<FraudFlag>& flags) {
  std::cout << "detector flags: " << flags.size() << '\n';
  for (const auto& f : flags) {
    std::cout << "  " << f.advertiser.str() << " [" << f.start_ms << ", " << f.end_ms
              << "] ms, " << f.flagged_click_ids.size() << " clicks (" << f.reason << ")\n";
  }
}

// Fixed-width view of a series for the terminal.
void print_series(const std::vector<SeriesRow>& rows) {
  if (rows.empty()) return;
  std::printf("%6s %11s %8s %13s", "time", "impressions", "clicks", "total_clicks");
  for (const auto& [name, _] : rows.front().ctrs) std::printf(" %12s", name.c_str());
  std::printf("\n");
  for (const auto& r : rows) {
    const std::string total = r.total_clicks ? std::to_string(*r.total_clicks) : "";
    std::printf("%6d %11lld %8lld %13s", r.time_index, static_cast<long long>(r.impressions),
                static_cast<long long>(r.clicks), total.c_str());
    for (const auto& [_, v] : r.ctrs) std::printf(" %12s", v ? format_rate(*v).c_str() : "-");
    std::printf("\n");
  }
}

int cmd_run(const std::string& config_path, const std::string& csv, const std::string& svg,
            const std::string& log_path, const std::string& flagged) {
  auto cfg = load_config(config_path);
  if (!csv.empty()) cfg.csv_path = csv;
  if (!svg.empty()) cfg.svg_path = svg;
  if (!log_path.empty()) cfg.log_path = log_path;
  if (!flagged.empty()) cfg.flagged = flagged_mode(flagged);

  const auto result = run_scenario(cfg);
  if (!cfg.log_path.empty()) write_log(result.log, cfg.log_path);
  if (!cfg.svg_path.empty()) {
    emit_plot(result.rows, cfg.svg_path, "CTR of " + cfg.focus_advertiser().str());
  }
  if (cfg.csv_path.empty()) {
    std::cout << series_csv(result.rows);
    return 0;
  }
  emit_csv(result.rows, cfg.csv_path);
  std::cout << "focus advertiser: " << cfg.focus_advertiser().str() << '\n'
            << "events: " << result.log.size() << '\n';
  print_flags(result.flags);
  std::cout << "wrote " << cfg.csv_path.string() << '\n';
  return 0;
}

int cmd_tables(const std::string& csv_dir, const std::string& svg) {
  const auto replay = replay_reference_tables();
  std::cout << tables_report(replay) << '\n';

  if (!csv_dir.empty()) {
    fs::create_directories(csv_dir);
    emit_csv(replay.table1, fs::path(csv_dir) / "table1.csv");
    emit_csv(replay.table2, fs::path(csv_dir) / "table2.csv");
  }
  if (!svg.empty()) {
    // Both curves on one chart, as in the reference figure.
    std::vector<SeriesRow> merged = replay.table2;
    for (std::size_t i = 0; i < merged.size(); ++i) {
      merged[i].ctrs.insert(merged[i].ctrs.begin(), replay.table1[i].ctrs.front());
    }
    emit_plot(merged, svg, "CTR, old and new algorithm");
  }

  bool ok = true;
  try {
    for (const auto* table : {&replay.table1, &replay.table2}) {
      for (const auto& line : curve_shape_check(*table).checks) {
        std::cout << "shape: " << line << '\n';
      }
    }
  } catch (const ShapeViolation& ex) {
    std::cerr << "shape violation: " << ex.what() << '\n';
    ok = false;
  }
  if (replay.errata.size() != kExpectedErrata) {
    std::cerr << "expected " << kExpectedErrata << " errata, found " << replay.errata.size()
              << '\n';
    ok = false;
  }
  if (!ok) throw Violation("reference tables do not replay as expected");
  return 0;
}

int cmd_compare(const std::string& config_path, const std::string& csv) {
  auto cfg = load_config(config_path);
  const auto configured = cfg.estimators;
  cfg.estimators = {WindowSpec::time_window(5'000), WindowSpec::impression_window(100),
                    WindowSpec::click_window(10), WindowSpec::relative_cumulative()};
  for (const auto& w : configured) {
    for (auto& mine : cfg.estimators) {
      if (mine.kind == w.kind) mine = w;
    }
  }

  std::vector<SeriesRow> combined;
  for (auto mode : {FlaggedClicks::count, FlaggedClicks::drop}) {
    cfg.flagged = mode;
    const auto result = run_scenario(cfg);
    const std::string label = mode == FlaggedClicks::count ? "count-flagged" : "drop-flagged";
    std::cout << "== " << label << " (focus " << cfg.focus_advertiser().str() << ")\n";
    print_series(result.rows);
    if (mode == FlaggedClicks::count) print_flags(result.flags);
    std::cout << '\n';

    if (combined.empty()) {
      combined = result.rows;
      for (auto& r : combined) {
        for (auto& [name, _] : r.ctrs) name += "_count";
      }
    } else {
      for (std::size_t i = 0; i < combined.size(); ++i) {
        for (const auto& [name, v] : result.rows[i].ctrs) {
          combined[i].ctrs.emplace_back(name + "_drop", v);
        }
      }
    }
  }
  if (!csv.empty()) {
    emit_csv(combined, csv);
    std::cout << "wrote " << csv << '\n';
  }
  return 0;
}

int cmd_replay(const std::string& log_path, const ReplayOptions& options, const std::string& csv) {
  const auto log = read_log(fs::path(log_path));
  const auto rows = replay_log(log, options);
  if (csv.empty()) {
    std::cout << series_csv(rows);
  } else {
    emit_csv(rows, csv);
    print_series(rows);
    std::cout << "wrote " << csv << '\n';
  }
  return 0;
}

std::vector<Cents> parse_cents_list(const std::string& s, const std::string& option) {
  std::vector<Cents> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoll(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw CLI::ValidationError(option, "not a list of integer cents: " + s);
    }
  }
  return out;
}

int cmd_demo_gfp(const std::string& caps_text, const std::string& bids_text, Cents epsilon,
                 Cents reserve, int slots, std::size_t max_steps) {
  const auto caps = parse_cents_list(caps_text, "--caps");
  const auto bids = parse_cents_list(bids_text, "--bids");
  if (caps.size() != bids.size() || caps.size() < 2) {
    throw CLI::ValidationError("--caps/--bids", "need the same number (>= 2) of caps and bids");
  }
  if (caps.size() > 26) throw CLI::ValidationError("--caps", "at most 26 bidders");

  BidVector initial, values;
  for (std::size_t i = 0; i < caps.size(); ++i) {
    const AdvertiserId id(std::string(1, static_cast<char>('A' + i)));
    initial[id] = bids[i];
    values[id] = caps[i];
  }
  const AuctionConfig cfg{slots, reserve, Ranking::by_bid};
  const auto result = run_gfp_dynamics(initial, values, epsilon, cfg, max_steps);

  std::printf("%5s %6s", "step", "mover");
  for (const auto& id : result.order) std::printf(" %9s", id.str().c_str());
  std::printf("\n");
  for (std::size_t k = 0; k < result.history.size(); ++k) {
    std::printf("%5zu %6s", k, k == 0 ? "-" : result.movers[k - 1].str().c_str());
    for (Cents b : result.history[k]) std::printf(" %9s", money(b).c_str());
    std::printf("\n");
  }
  if (!result.period) {
    std::printf("no cycle within %zu steps\n", max_steps);
    return kExitViolation;
  }
  if (result.converged) {
    std::printf("converged to a fixed point after %zu steps\n", result.steps());
  } else {
    std::printf("cycle of period %zu detected after %zu steps\n", *result.period,
                result.steps());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sponsim: sponsored-search auction, CTR estimation and click-fraud simulator"};
  app.require_subcommand(1);

  std::string config_path, csv, svg, log_out, flagged, csv_dir, log_in;

  auto* run = app.add_subcommand("run", "Run a scenario and write its CTR series");
  run->add_option("config", config_path, "Scenario config (INI)")->required();
  run->add_option("--csv", csv, "CSV output, overrides [output] csv");
  run->add_option("--svg", svg, "SVG chart output, overrides [output] svg");
  run->add_option("--log", log_out, "JSONL event log output, overrides [output] log");
  run->add_option("--flagged", flagged, "What estimators do with detector-flagged clicks")
      ->check(CLI::IsMember({"count", "drop"}));

  auto* tables = app.add_subcommand("tables", "Replay the reference CTR tables and list errata");
  tables->add_option("--csv-dir", csv_dir, "Write table1.csv and table2.csv here");
  tables->add_option("--svg", svg, "Chart of both CTR curves");

  auto* compare = app.add_subcommand(
      "compare", "Run a scenario with all four estimators, counting and dropping flagged clicks");
  compare->add_option("config", config_path, "Scenario config (INI)")->required();
  compare->add_option("--csv", csv, "CSV with both modes side by side");

  ReplayOptions replay_opts;
  std::string focus;
  Millis time_window = 5'000, relative_interval = 0;
  std::int64_t impression_window = 100, click_window = 10;
  auto* replay = app.add_subcommand("replay", "Re-estimate CTRs from a saved event log");
  replay->add_option("log", log_in, "JSONL event log")->required();
  replay->add_option("--focus", focus, "Advertiser to report (default: first id in the log)");
  replay->add_option("--tick-ms", replay_opts.tick_ms, "Reporting cadence")
      ->check(CLI::PositiveNumber);
  replay->add_option("--time-window-ms", time_window, "T for the time window");
  replay->add_option("--impression-window", impression_window, "Y for the impression window");
  replay->add_option("--click-window", click_window, "X for the click window");
  replay->add_option("--relative-interval-ms", relative_interval,
                     "Relative CTR interval, 0 for cumulative");
  replay->add_option("--flagged", flagged, "What estimators do with detector-flagged clicks")
      ->check(CLI::IsMember({"count", "drop"}));
  replay->add_option("--csv", csv, "CSV output (default: stdout)");

  std::string caps = "1100,800", bids = "1000,300";
  Cents epsilon = 100, reserve = 300;
  int slots = 2;
  std::size_t max_steps = 30;
  auto* demo = app.add_subcommand("demo-gfp", "Alternating GFP best-response bidding");
  demo->add_option("--caps", caps, "Comma-separated valuations in cents")->capture_default_str();
  demo->add_option("--bids", bids, "Comma-separated starting bids in cents")
      ->capture_default_str();
  demo->add_option("--epsilon", epsilon, "Bid increment in cents")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  demo->add_option("--reserve", reserve, "Reserve price in cents")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  demo->add_option("--slots", slots, "Number of slots")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  demo->add_option("--max-steps", max_steps, "Move budget")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, csv, svg, log_out, flagged);
    if (*tables) return cmd_tables(csv_dir, svg);
    if (*compare) return cmd_compare(config_path, csv);
    if (*replay) {
      if (!focus.empty()) replay_opts.focus = AdvertiserId(focus);
      replay_opts.estimators = {WindowSpec::time_window(time_window),
                                WindowSpec::impression_window(impression_window),
                                WindowSpec::click_window(click_window),
                                WindowSpec::relative_interval(relative_interval)};
      if (!flagged.empty()) replay_opts.flagged = flagged_mode(flagged);
      return cmd_replay(log_in, replay_opts, csv);
    }
    if (*demo) return cmd_demo_gfp(caps, bids, epsilon, reserve, slots, max_steps);
  } catch (const CLI::ParseError& ex) {
    return app.exit(ex) == 0 ? 0 : kExitConfig;
  } catch (const ConfigError& ex) {
    std::cerr << "config error: " << ex.what() << '\n';
    return kExitConfig;
  } catch (const MalformedRecord& ex) {
    std::cerr << "malformed record: " << ex.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& ex) {
    std::cerr << "invalid argument: " << ex.what() << '\n';
    return kExitConfig;
  } catch (const Violation& ex) {
    std::cerr << ex.what() << '\n';
    return kExitViolation;
  } catch (const ShapeViolation& ex) {
    std::cerr << "shape violation: " << ex.what() << '\n';
    return kExitViolation;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
