#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sponsim/auction.hpp"
#include "sponsim/bench.hpp"
#include "sponsim/error.hpp"
#include "sponsim/estimators.hpp"
#include "sponsim/io.hpp"
#include "sponsim/traffic.hpp"

namespace py = pybind11;
using namespace sponsim;

namespace {

py::dict row_dict(const SeriesRow& row) {
  py::dict d;
  d["time"] = row.time_index;
  d["impressions"] = row.impressions;
  d["clicks"] = row.clicks;
  d["total_clicks"] = row.total_clicks;
  for (const auto& [name, value] : row.ctrs) d[py::str(name)] = value;
  return d;
}

py::list rows_list(const std::vector<SeriesRow>& rows) {
  py::list out;
  for (const auto& r : rows) out.append(row_dict(r));
  return out;
}

py::list flags_list(const std::vector<FraudFlag>& flags) {
  py::list out;
  for (const auto& f : flags) {
    py::dict d;
    d["advertiser"] = f.advertiser.str();
    d["start_ms"] = f.start_ms;
    d["end_ms"] = f.end_ms;
    d["click_ids"] = f.flagged_click_ids;
    d["reason"] = f.reason;
    out.append(d);
  }
  return out;
}

BidVector bid_vector(const std::map<std::string, Cents>& in) {
  BidVector out;
  for (const auto& [name, amount] : in) out.emplace(AdvertiserId(name), amount);
  return out;
}

Mechanism mechanism_of(const std::string& name) {
  if (name == "gsp") return Mechanism::gsp;
  if (name == "gfp") return Mechanism::gfp;
  throw std::invalid_argument("mechanism must be gsp or gfp, got " + name);
}

py::dict scenario_dict(const ScenarioResult& result) {
  std::ostringstream log;
  write_log(result.log, log);
  py::dict d;
  d["rows"] = rows_list(result.rows);
  d["csv"] = series_csv(result.rows);
  d["log_jsonl"] = log.str();
  d["flags"] = flags_list(result.flags);
  return d;
}

}  // namespace

PYBIND11_MODULE(_sponsim, m) {
  m.doc() = "Deterministic sponsored-search simulator";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<MalformedRecord>(m, "MalformedRecord", error.ptr());
  py::register_exception<ShapeViolation>(m, "ShapeViolation", error.ptr());

  m.def("tables_report", [] { return tables_report(replay_reference_tables()); },
        "Formatted reference tables with the errata ledger.");

  m.def(
      "replay_tables",
      [] {
        const auto replay = replay_reference_tables();
        py::list errata;
        for (const auto& e : replay.errata) {
          py::dict d;
          d["tables"] = e.tables;
          d["first_row"] = e.first_row;
          d["last_row"] = e.last_row;
          d["column"] = e.column;
          d["printed"] = e.printed;
          d["reconstructed"] = e.reconstructed;
          d["justification"] = e.justification;
          errata.append(d);
        }
        py::dict out;
        out["table1"] = rows_list(replay.table1);
        out["table2"] = rows_list(replay.table2);
        out["errata"] = errata;
        return out;
      },
      "Replayed reference tables as lists of row dicts, plus the errata ledger.");

  m.def(
      "check_shapes",
      [] {
        const auto replay = replay_reference_tables();
        curve_shape_check(replay.table1);
        return curve_shape_check(replay.table2).peak_tick;
      },
      "Runs the curve shape checks on the replayed tables; returns the ctr_new peak tick.");

  m.def(
      "run_config_text",
      [](const std::string& text) {
        std::istringstream in(text);
        return scenario_dict(run_scenario(parse_config(in)));
      },
      py::arg("text"), "Runs a scenario from INI text.");

  m.def(
      "run_config_file",
      [](const std::filesystem::path& path) { return scenario_dict(run_scenario(load_config(path))); },
      py::arg("path"), "Runs a scenario from an INI file.");

  m.def(
      "detect_scripted",
      [](const std::string& log_jsonl, std::int64_t min_run, Millis tolerance_ms,
         std::int64_t max_skip) {
        std::istringstream in(log_jsonl);
        const auto log = read_log(in);
        return flags_list(detect_scripted(log.observed(), {min_run, tolerance_ms, max_skip}));
      },
      py::arg("log_jsonl"), py::arg("min_run") = 5, py::arg("tolerance_ms") = 10,
      py::arg("max_skip") = 8, "Flags fixed-interval click runs in a JSONL event log.");

  m.def(
      "auction",
      [](const std::map<std::string, Cents>& bids, int slots, Cents reserve,
         const std::string& mechanism) {
        std::vector<Bid> list;
        for (const auto& [name, amount] : bids) list.push_back({AdvertiserId(name), amount});
        const AuctionConfig cfg{slots, reserve, Ranking::by_bid};
        py::list out;
        for (const auto& a : allocate(mechanism_of(mechanism), rank(list, {}, cfg), cfg)) {
          out.append(py::make_tuple(a.slot, a.advertiser.str(), a.price_per_click));
        }
        return out;
      },
      py::arg("bids"), py::arg("slots"), py::arg("reserve") = 0, py::arg("mechanism") = "gsp",
      "Bid-ranked auction; returns (slot, advertiser, price per click) tuples.");

  m.def(
      "gfp_dynamics",
      [](const std::map<std::string, Cents>& bids, const std::map<std::string, Cents>& caps,
         Cents epsilon, Cents reserve, int slots, std::size_t max_steps) {
        const AuctionConfig cfg{slots, reserve, Ranking::by_bid};
        const auto r = run_gfp_dynamics(bid_vector(bids), bid_vector(caps), epsilon, cfg, max_steps);
        py::dict d;
        d["history"] = r.history;
        d["period"] = r.period;
        d["converged"] = r.converged;
        d["steps"] = r.steps();
        return d;
      },
      py::arg("bids"), py::arg("caps"), py::arg("epsilon") = 100, py::arg("reserve") = 300,
      py::arg("slots") = 2, py::arg("max_steps") = 30,
      "Alternating GFP best-response dynamics until a bid cycle or max_steps.");

  m.def(
      "relative_ctr",
      [](const std::map<std::string, std::int64_t>& clicks,
         const std::string& advertiser) -> std::optional<double> {
        ClickTally t;
        for (const auto& [name, count] : clicks) {
          t.per_advertiser[AdvertiserId(name)] = count;
          t.total += count;
        }
        return ctr_relative(t, AdvertiserId(advertiser)).value_if_defined();
      },
      py::arg("clicks"), py::arg("advertiser"),
      "Advertiser's share of the tally's clicks; None when the tally is empty.");
}
