// Runs every acceptance criterion and prints one PASS/FAIL line for each.
// Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>

#include "../detection_rates.hpp"
#include "../support.hpp"
#include "sponsim/auction.hpp"
#include "sponsim/bench.hpp"
#include "sponsim/error.hpp"
#include "sponsim/estimators.hpp"
#include "sponsim/io.hpp"

using namespace sponsim;
using namespace sponsim::testing;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

bool in_ledger(const std::vector<Erratum>& errata, int table, int row, const std::string& column) {
  return std::any_of(errata.begin(), errata.end(), [&](const Erratum& e) {
    return std::find(e.tables.begin(), e.tables.end(), table) != e.tables.end() &&
           e.column == column && row >= e.first_row && row <= e.last_row;
  });
}

Outcome table_replay() {
  Outcome out;
  const auto start = Clock::now();
  const auto replay = replay_reference_tables();
  const auto report = tables_report(replay);
  int checked = 0;
  for (int table : {1, 2}) {
    const auto& printed = table == 1 ? printed_table1() : printed_table2();
    const auto& rows = table == 1 ? replay.table1 : replay.table2;
    const char* column = table == 1 ? "ctr_old" : "ctr_new";
    for (std::size_t i = 0; i < printed.size(); ++i) {
      if (in_ledger(replay.errata, table, printed[i].t, "ctr")) continue;
      ++checked;
      const double got = *rows[i].ctr(column);
      out.require(std::abs(std::stod(printed[i].ctr) - got) <= kPrintedCtrTolerance + 1e-12,
                  "table " + std::to_string(table) + " row " + std::to_string(printed[i].t));
    }
  }
  const auto& e = replay.errata;
  out.require(e.size() == 4, "ledger holds " + std::to_string(e.size()) + " entries");
  if (e.size() == 4) {
    out.require(e[0].tables == std::vector<int>{1, 2} && e[0].column == "clicks" &&
                    e[0].first_row == 7 && e[0].last_row == 20,
                "clicks shift entry");
    out.require(e[1].tables == std::vector<int>{1} && e[1].first_row == 9 && e[1].printed == "3.0",
                "table 1 row 9 entry");
    out.require(e[2].tables == std::vector<int>{2} && e[2].first_row == 19 &&
                    e[2].printed == "0.317",
                "table 2 row 19 entry");
    out.require(e[3].tables == std::vector<int>{2} && e[3].first_row == 20 &&
                    e[3].printed == "1444",
                "table 2 row 20 entry");
  }
  out.require(report.find("Errata (4)") != std::string::npos, "report lacks the ledger");
  const auto elapsed = std::chrono::duration<double>(Clock::now() - start).count();
  out.require(elapsed < 1.0, "took " + std::to_string(elapsed) + " s");
  if (out.ok) {
    out.detail = std::to_string(checked) + " CTR cells within 0.001, 4 errata";
  }
  return out;
}

Outcome relative_laws() {
  Outcome out;
  const auto start = Clock::now();
  Rng rng(Seed{1001});
  int done = 0;
  while (done < 10'000) {
    const int n = static_cast<int>(rng.uniform_int(1, 10));
    ClickTally t;
    for (int i = 0; i < n; ++i) {
      const auto c = rng.uniform_int(0, 1'000'000);
      t.per_advertiser[AdvertiserId("A" + std::to_string(i))] = c;
      t.total += c;
    }
    if (t.total == 0) continue;
    ++done;
    double sum = 0;
    for (const auto& [a, _] : t.per_advertiser) sum += ctr_relative(t, a).value;
    out.require(std::abs(sum - 1.0) <= 1e-9, "sum " + std::to_string(sum));

    const AdvertiserId target("A" + std::to_string(rng.uniform_int(0, n - 1)));
    const auto delta_total = rng.uniform_int(1, 1'000'000);
    const auto delta_own = rng.uniform_int(0, delta_total);
    ClickTally after = t;
    after.per_advertiser[target] += delta_own;
    after.total += delta_total;
    const auto own = t.count(target);
    // delta_own / delta_total < own / total, cross-multiplied in integers.
    const bool law = delta_own * t.total < own * delta_total;
    const bool fell = ctr_relative(after, target).value < ctr_relative(t, target).value;
    out.require(relative_ctr_falls(own, t.total, delta_own, delta_total) == law,
                "relative_ctr_falls disagrees with the cross-multiplied law");
    out.require(fell == law, "estimate movement disagrees with the law");
  }
  const auto elapsed = std::chrono::duration<double>(Clock::now() - start).count();
  out.require(elapsed < 10.0, "took " + std::to_string(elapsed) + " s");
  if (out.ok) out.detail = "10000 tallies";
  return out;
}

Outcome oracle_equivalence() {
  Outcome out;
  const auto start = Clock::now();
  Rng rng(Seed{3003});
  for (int kind = 0; kind < 4; ++kind) {
    for (int round = 0; round < 1000; ++round) {
      const auto n = static_cast<std::size_t>(rng.uniform_int(1, 400));
      const auto view = random_log(rng, n).observed();
      const Millis now = rng.uniform_int(0, view.back().t + 2);
      const AdvertiserId who(std::string(1, static_cast<char>('A' + rng.uniform_int(0, 2))));
      bool ok = false;
      switch (kind) {
        case 0: {
          const Millis w = rng.uniform_int(1, 400);
          TimeWindowCtr est(who, w);
          for (const auto& e : view) {
            if (e.t < now) est.observe(e);
          }
          ok = same(est.estimate(now), oracle_time_window(view, who, w, now));
          break;
        }
        case 1: {
          const auto y = rng.uniform_int(1, 60);
          ImpressionWindowCtr est(who, y);
          for (const auto& e : view) {
            if (e.t <= now) est.observe(e);
          }
          ok = same(est.estimate(), oracle_impression_window(view, who, y, now));
          break;
        }
        case 2: {
          const auto x = rng.uniform_int(1, 12);
          ClickWindowCtr est(who, x);
          for (const auto& e : view) {
            if (e.t <= now) est.observe(e);
          }
          ok = same(est.estimate(), oracle_click_window(view, who, x, now));
          break;
        }
        default: {
          const Millis interval = rng.bernoulli(0.3) ? 0 : rng.uniform_int(1, 500);
          RelativeCtr est({}, interval);
          for (const auto& e : view) {
            if (e.t < now) est.observe(e);
          }
          ok = same(est.estimate(who, now), oracle_relative(view, who, interval, now));
          break;
        }
      }
      const char* names[] = {"time", "impression", "click", "relative"};
      out.require(ok, std::string(names[kind]) + " window, round " + std::to_string(round));
    }
  }
  const auto elapsed = std::chrono::duration<double>(Clock::now() - start).count();
  out.require(elapsed < 30.0, "took " + std::to_string(elapsed) + " s");
  if (out.ok) out.detail = "4 x 1000 triples";
  return out;
}

Outcome curve_shapes() {
  Outcome out;
  const auto replay = replay_reference_tables();
  try {
    curve_shape_check(replay.table1);
    const auto report = curve_shape_check(replay.table2);
    out.require(report.peak_tick && *report.peak_tick == 4, "ctr_new peak not at t=4");
  } catch (const ShapeViolation& ex) {
    out.require(false, ex.what());
    return out;
  }
  auto rate = [](const SeriesRow& row, const char* column) {
    return format_rate(*row.ctr(column), 3);
  };
  out.require(rate(replay.table1.front(), "ctr_old") == "0.111", "ctr_old at t=1");
  out.require(rate(replay.table1.back(), "ctr_old") == "0.318", "ctr_old at t=20");
  out.require(rate(replay.table2[3], "ctr_new") == "0.145", "ctr_new at t=4");
  out.require(rate(replay.table2.back(), "ctr_new") == "0.072", "ctr_new at t=20");
  if (out.ok) {
    out.detail = "ctr_old 0.111 -> 0.318 increasing, ctr_new peaks 0.145 at t=4, ends 0.072";
  }
  return out;
}

std::vector<Cents> priced(Mechanism m, const std::vector<Bid>& bids, const AuctionConfig& cfg) {
  std::vector<Cents> out;
  for (const auto& a : allocate(m, rank(bids, {}, cfg), cfg)) out.push_back(a.price_per_click);
  return out;
}

Outcome gsp_pricing() {
  Outcome out;
  const Cents reserve = 50;
  const AuctionConfig cfg{2, reserve, Ranking::by_bid};
  const std::vector<Bid> pair{{AdvertiserId("A"), 1000}, {AdvertiserId("B"), 300}};
  out.require(priced(Mechanism::gsp, pair, cfg) == std::vector<Cents>{300, reserve},
              "GSP on the bid pair");
  out.require(priced(Mechanism::gfp, pair, cfg) == std::vector<Cents>{1000, 300},
              "GFP on the bid pair");

  Rng rng(Seed{5005});
  for (int round = 0; round < 10'000; ++round) {
    const int n = static_cast<int>(rng.uniform_int(1, 10));
    const AuctionConfig c{static_cast<int>(rng.uniform_int(1, 6)), rng.uniform_int(0, 300),
                          Ranking::by_bid};
    std::vector<Bid> bids;
    for (int i = 0; i < n; ++i) {
      bids.push_back({AdvertiserId("A" + std::to_string(i)), rng.uniform_int(0, 2000)});
    }
    for (auto m : {Mechanism::gsp, Mechanism::gfp}) {
      const auto alloc = allocate(m, rank(bids, {}, c), c);
      for (std::size_t i = 0; i < alloc.size(); ++i) {
        out.require(alloc[i].price_per_click <= alloc[i].bid,
                    "price above bid in round " + std::to_string(round));
        if (i > 0) {
          out.require(alloc[i].price_per_click <= alloc[i - 1].price_per_click,
                      "price rises down the slots in round " + std::to_string(round));
        }
      }
    }
  }
  if (out.ok) out.detail = "GSP (300, 50), GFP (1000, 300), 10000 random auctions";
  return out;
}

Outcome gfp_instability() {
  Outcome out;
  const AuctionConfig demo{2, 300, Ranking::by_bid};
  const auto r =
      run_gfp_dynamics({{AdvertiserId("A"), 1000}, {AdvertiserId("B"), 300}},
                       {{AdvertiserId("A"), 1100}, {AdvertiserId("B"), 800}}, 100, demo, 30);
  out.require(r.period && !r.converged, "no bid cycle within 30 steps");
  const std::string demo_detail =
      r.period ? "period " + std::to_string(*r.period) + " after " + std::to_string(r.steps()) +
                     " steps"
               : "";

  // Caps are drawn from [reserve + 2 epsilon, ...): below that the low
  // bidder cannot outbid reserve + epsilon and the dynamics settle.
  Rng rng(Seed{6006});
  for (int round = 0; round < 100; ++round) {
    const Cents epsilon = rng.uniform_int(1, 100);
    const Cents reserve = rng.uniform_int(0, 500);
    const Cents lo = reserve + 2 * epsilon;
    const Cents cap_a = rng.uniform_int(lo, lo + 3000);
    Cents cap_b = rng.uniform_int(lo, lo + 3000);
    if (cap_b == cap_a) ++cap_b;
    const AuctionConfig cfg{2, reserve, Ranking::by_bid};
    const Cents top = std::max(cap_a, cap_b);
    const auto budget =
        static_cast<std::size_t>(4 * ((top - reserve + epsilon - 1) / epsilon) + 4);
    const auto d = run_gfp_dynamics(
        {{AdvertiserId("A"), rng.uniform_int(0, cap_a)},
         {AdvertiserId("B"), rng.uniform_int(0, cap_b)}},
        {{AdvertiserId("A"), cap_a}, {AdvertiserId("B"), cap_b}}, epsilon, cfg, budget);
    out.require(d.period && !d.converged, "instance " + std::to_string(round) + " settled");
  }
  if (out.ok) out.detail = "demo " + demo_detail + ", 100 random instances cycle";
  return out;
}

Outcome fraud_detection() {
  Outcome out;
  const auto r = measure_detection_rates();
  out.require(r.scripted_recall() == 1.0, "scripted recall " + std::to_string(r.scripted_recall()));
  out.require(r.false_flag_rate() < 0.01, "false-flag rate " + std::to_string(r.false_flag_rate()));
  out.require(r.human_recall() < 0.2, "human recall " + std::to_string(r.human_recall()));
  const auto& k = kRecordedRates;
  out.require(r.organic_clicks == k.organic_clicks && r.organic_flagged == k.organic_flagged &&
                  r.scripted_clicks == k.scripted_clicks &&
                  r.scripted_flagged == k.scripted_flagged && r.human_clicks == k.human_clicks &&
                  r.human_flagged == k.human_flagged,
              "measured counts differ from the recorded fixture");
  std::ostringstream s;
  s << "scripted recall " << r.scripted_flagged << "/" << r.scripted_clicks
    << ", false flags " << r.organic_flagged << "/" << r.organic_clicks << ", human recall "
    << r.human_flagged << "/" << r.human_clicks << " over " << kDetectionSeeds << " seeds";
  if (out.ok) out.detail = s.str();
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
  Outcome out;
  const auto dir = std::filesystem::temp_directory_path() / "sponsim_acceptance";
  std::filesystem::remove_all(dir);
  auto cfg = load_config(std::filesystem::path(SPONSIM_SOURCE_DIR) / "configs" / "example.ini");
  int runs = 0;
  for (std::uint64_t seed : {42ULL, 7ULL, 123456789ULL}) {
    for (auto mode : {FlaggedClicks::count, FlaggedClicks::drop}) {
      cfg.seed = Seed{seed};
      cfg.flagged = mode;
      std::string logs[2], csvs[2];
      for (int k = 0; k < 2; ++k) {
        const auto result = run_scenario(cfg);
        const auto base = dir / ("run" + std::to_string(runs) + "_" + std::to_string(k));
        write_log(result.log, base / "events.jsonl");
        emit_csv(result.rows, base / "series.csv");
        logs[k] = slurp(base / "events.jsonl");
        csvs[k] = slurp(base / "series.csv");
      }
      const auto tag = "seed " + std::to_string(seed);
      out.require(!logs[0].empty() && logs[0] == logs[1], tag + ": event logs differ");
      out.require(!csvs[0].empty() && csvs[0] == csvs[1], tag + ": CSVs differ");
      ++runs;
    }
  }
  std::filesystem::remove_all(dir);
  if (out.ok) out.detail = std::to_string(runs) + " scenario pairs byte-identical";
  return out;
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"table replay", table_replay},
      {"relative-CTR laws", relative_laws},
      {"oracle equivalence", oracle_equivalence},
      {"curve shapes", curve_shapes},
      {"GSP pricing", gsp_pricing},
      {"GFP instability", gfp_instability},
      {"fraud detection", fraud_detection},
      {"determinism", determinism},
  };
  int failed = 0;
  int index = 0;
  for (const auto& [name, run] : criteria) {
    ++index;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    const auto elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    if (!o.ok) ++failed;
    std::printf("%s %d %s: %s (%.2f s)\n", o.ok ? "PASS" : "FAIL", index, name, o.detail.c_str(),
                elapsed);
  }
  return failed == 0 ? 0 : 1;
}
