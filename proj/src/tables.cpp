#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include "sponsim/bench.hpp"
#include "sponsim/error.hpp"
#include "sponsim/io.hpp"

namespace sponsim {

namespace {

constexpr int kRows = 20;

// Cells exactly as printed, including the inconsistent ones.
const std::vector<PrintedRow> kTable1 = {
    {1, "16", "2", "", "0.111"},     {2, "28", "6", "", "0.176"},
    {3, "40", "12", "", "0.230"},    {4, "52", "18", "", "0.257"},
    {5, "64", "24", "", "0.272"},    {6, "76", "30", "", "0.283"},
    {7, "88", "42", "", "0.290"},    {8, "100", "48", "", "0.295"},
    {9, "112", "54", "", "3.0"},     {10, "124", "60", "", "0.303"},
    {11, "136", "66", "", "0.306"},  {12, "148", "72", "", "0.308"},
    {13, "160", "78", "", "0.310"},  {14, "172", "84", "", "0.312"},
    {15, "184", "90", "", "0.313"},  {16, "196", "96", "", "0.314"},
    {17, "208", "102", "", "0.315"}, {18, "220", "108", "", "0.316"},
    {19, "232", "114", "", "0.317"}, {20, "244", "120", "", "0.318"},
};

const std::vector<PrintedRow> kTable2 = {
    {1, "16", "2", "22", "0.090"},      {2, "28", "6", "50", "0.12"},
    {3, "40", "12", "84", "0.142"},     {4, "52", "18", "124", "0.145"},
    {5, "64", "24", "170", "0.141"},    {6, "76", "30", "222", "0.135"},
    {7, "88", "42", "280", "0.128"},    {8, "100", "48", "344", "0.122"},
    {9, "112", "54", "414", "0.115"},   {10, "124", "60", "490", "0.110"},
    {11, "136", "66", "572", "0.104"},  {12, "148", "72", "660", "0.100"},
    {13, "160", "78", "754", "0.095"},  {14, "172", "84", "854", "0.091"},
    {15, "184", "90", "960", "0.087"},  {16, "196", "96", "1072", "0.083"},
    {17, "208", "102", "1190", "0.080"}, {18, "220", "108", "1314", "0.077"},
    {19, "232", "114", "0.317", "0.074"}, {20, "244", "120", "1444", "0.072"},
};

struct Mismatch {
  int table;
  int row;
  std::string column;
  std::string printed;
  std::string reconstructed;
};

std::string int_text(std::int64_t v) { return std::to_string(v); }

bool integer_cell_equals(const std::string& cell, std::int64_t expected) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(cell, &used);
    return used == cell.size() && v == expected;
  } catch (const std::exception&) {
    return false;
  }
}

bool ctr_cell_matches(const std::string& cell, double expected) {
  return std::abs(std::stod(cell) - expected) <= kPrintedCtrTolerance + 1e-12;
}

double ctr_old(int t) {
  return ctr_clicks_over_displays(reconstructed_clicks(t), reconstructed_impressions(t));
}

double ctr_new(int t) {
  return static_cast<double>(reconstructed_clicks(t)) /
         static_cast<double>(reconstructed_total_clicks(t));
}

std::vector<Mismatch> compare_cells() {
  std::vector<Mismatch> out;
  for (int table : {1, 2}) {
    const auto& rows = table == 1 ? kTable1 : kTable2;
    for (const auto& r : rows) {
      if (!integer_cell_equals(r.impressions, reconstructed_impressions(r.t))) {
        out.push_back({table, r.t, "impressions", r.impressions,
                       int_text(reconstructed_impressions(r.t))});
      }
      if (!integer_cell_equals(r.clicks, reconstructed_clicks(r.t))) {
        out.push_back({table, r.t, "clicks", r.clicks, int_text(reconstructed_clicks(r.t))});
      }
      if (table == 2 && !integer_cell_equals(r.total_clicks, reconstructed_total_clicks(r.t))) {
        out.push_back({table, r.t, "total_clicks", r.total_clicks,
                       int_text(reconstructed_total_clicks(r.t))});
      }
      const double ctr = table == 1 ? ctr_old(r.t) : ctr_new(r.t);
      if (!ctr_cell_matches(r.ctr, ctr)) {
        out.push_back({table, r.t, "ctr", r.ctr, format_rate(ctr)});
      }
    }
  }
  return out;
}

// A clicks cell that holds the next row's reconstructed value.
bool shifted_clicks(const Mismatch& m) {
  return m.column == "clicks" && integer_cell_equals(m.printed, reconstructed_clicks(m.row + 1));
}

std::string justify(const Mismatch& m) {
  if (m.column == "ctr") {
    const double printed = std::stod(m.printed);
    const double recon = std::stod(m.reconstructed);
    if (std::abs(printed - 10.0 * recon) <= 10.0 * kPrintedCtrTolerance) {
      return "decimal point misplaced: printed value is ten times the ratio of the row's counts";
    }
    return "printed rate does not follow from the row's counts";
  }
  if (m.column == "total_clicks") {
    if (m.row > 1 && integer_cell_equals(m.printed, reconstructed_total_clicks(m.row - 1))) {
      return "repeats the previous row's total; totals grow by 6 more clicks every row";
    }
    if (m.printed.find('.') != std::string::npos) {
      return "fractional value in a click-count column (the cell matches the other table's "
             "rate at this row); totals grow by 6 more clicks every row";
    }
    return "breaks the second-difference-6 recurrence of the totals";
  }
  return "count does not follow the row recurrence";
}

std::vector<Erratum> build_errata(const std::vector<Mismatch>& mismatches) {
  std::vector<Erratum> out;

  // Shifted clicks: merge contiguous rows per table, then identical ranges
  // across tables.
  std::map<int, std::vector<int>> shifted_rows;
  for (const auto& m : mismatches) {
    if (shifted_clicks(m)) shifted_rows[m.table].push_back(m.row);
  }
  std::vector<Erratum> shifted;
  for (const auto& [table, rows] : shifted_rows) {
    std::size_t i = 0;
    while (i < rows.size()) {
      std::size_t j = i;
      while (j + 1 < rows.size() && rows[j + 1] == rows[j] + 1) ++j;
      const int first = rows[i], last = rows[j];
      auto same = std::find_if(shifted.begin(), shifted.end(), [&](const Erratum& e) {
        return e.first_row == first && e.last_row == last;
      });
      if (same != shifted.end()) {
        same->tables.push_back(table);
      } else {
        const auto& rows_src = table == 1 ? kTable1 : kTable2;
        const std::string printed = rows_src[first - 1].clicks + ".." + rows_src[last - 1].clicks;
        shifted.push_back({{table},
                           first,
                           last,
                           "clicks",
                           printed,
                           int_text(reconstructed_clicks(first)) + ".." +
                               int_text(reconstructed_clicks(last)),
                           "each printed value is the next row's click count; the rates and "
                           "totals of these rows follow the unshifted counts"});
      }
      i = j + 1;
    }
  }
  out.insert(out.end(), shifted.begin(), shifted.end());

  for (const auto& m : mismatches) {
    if (shifted_clicks(m)) continue;
    out.push_back({{m.table}, m.row, m.row, m.column, m.printed, m.reconstructed, justify(m)});
  }
  std::stable_sort(out.begin(), out.end(), [](const Erratum& a, const Erratum& b) {
    if (a.tables.front() != b.tables.front()) return a.tables.front() < b.tables.front();
    return a.first_row < b.first_row;
  });
  return out;
}

}  // namespace

const std::vector<PrintedRow>& printed_table1() { return kTable1; }
const std::vector<PrintedRow>& printed_table2() { return kTable2; }

std::int64_t reconstructed_impressions(int t) {
  if (t < 1) throw std::out_of_range("row index must be >= 1");
  return 16 + 12 * static_cast<std::int64_t>(t - 1);
}

std::int64_t reconstructed_clicks(int t) {
  if (t < 1) throw std::out_of_range("row index must be >= 1");
  return t == 1 ? 2 : 6 * static_cast<std::int64_t>(t - 1);
}

std::int64_t reconstructed_total_clicks(int t) {
  if (t < 1) throw std::out_of_range("row index must be >= 1");
  // 22, 50, 84, ...: first difference 28 growing by 6 per row.
  const std::int64_t n = t - 1;
  return 22 + 28 * n + 3 * n * (n - 1);
}

TableReplay replay_reference_tables() {
  TableReplay out;
  for (int t = 1; t <= kRows; ++t) {
    SeriesRow r1;
    r1.time_index = t;
    r1.impressions = reconstructed_impressions(t);
    r1.clicks = reconstructed_clicks(t);
    r1.ctrs.emplace_back("ctr_old", ctr_old(t));
    out.table1.push_back(std::move(r1));

    SeriesRow r2;
    r2.time_index = t;
    r2.impressions = reconstructed_impressions(t);
    r2.clicks = reconstructed_clicks(t);
    r2.total_clicks = reconstructed_total_clicks(t);
    ClickTally tally;
    tally.per_advertiser.emplace(AdvertiserId("focus"), r2.clicks);
    tally.per_advertiser.emplace(AdvertiserId("rest"), *r2.total_clicks - r2.clicks);
    tally.total = *r2.total_clicks;
    r2.ctrs.emplace_back("ctr_new", ctr_relative(tally, AdvertiserId("focus")).value);
    out.table2.push_back(std::move(r2));
  }
  out.errata = build_errata(compare_cells());
  return out;
}

std::string tables_report(const TableReplay& replay) {
  std::ostringstream out;
  char line[256];
  auto table = [&](int n, const std::vector<PrintedRow>& printed,
                   const std::vector<SeriesRow>& series, const char* column) {
    out << "Table " << n << (n == 1 ? " (clicks / (impressions + clicks))\n"
                                    : " (clicks / cohort total clicks)\n");
    std::snprintf(line, sizeof line, "%4s %11s %11s %13s %11s %11s\n", "t", "impressions",
                  "clicks", "total_clicks", "printed", "computed");
    out << line;
    for (std::size_t i = 0; i < series.size(); ++i) {
      const auto& r = series[i];
      const std::string total = r.total_clicks ? std::to_string(*r.total_clicks) : "-";
      std::snprintf(line, sizeof line, "%4d %11lld %11lld %13s %11s %11s\n", r.time_index,
                    static_cast<long long>(r.impressions), static_cast<long long>(r.clicks),
                    total.c_str(), printed[i].ctr.c_str(), format_rate(*r.ctr(column)).c_str());
      out << line;
    }
    out << '\n';
  };
  table(1, kTable1, replay.table1, "ctr_old");
  table(2, kTable2, replay.table2, "ctr_new");

  out << "Errata (" << replay.errata.size() << ")\n";
  for (const auto& e : replay.errata) {
    std::string tables;
    for (std::size_t i = 0; i < e.tables.size(); ++i) {
      tables += (i ? "+" : "") + std::to_string(e.tables[i]);
    }
    const std::string rows = e.first_row == e.last_row
                                 ? std::to_string(e.first_row)
                                 : std::to_string(e.first_row) + "-" + std::to_string(e.last_row);
    out << "  table " << tables << " row " << rows << " " << e.column << ": printed "
        << e.printed << ", reconstructed " << e.reconstructed << " -- " << e.justification
        << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------

namespace {

double value_at(const SeriesRow& row, std::string_view column) {
  const auto v = row.ctr(column);
  if (!v) throw ShapeViolation(std::string(column), row.time_index, "estimate undefined");
  return *v;
}

}  // namespace

void check_strictly_increasing(const std::vector<SeriesRow>& series, std::string_view column) {
  for (std::size_t i = 1; i < series.size(); ++i) {
    if (!(value_at(series[i], column) > value_at(series[i - 1], column))) {
      throw ShapeViolation(std::string(column), series[i].time_index,
                           "not above the previous tick");
    }
  }
}

int check_rise_then_fall(const std::vector<SeriesRow>& series, std::string_view column) {
  if (series.size() < 3) {
    throw ShapeViolation(std::string(column), series.empty() ? 0 : series.front().time_index,
                         "too short for a rise and a fall");
  }
  std::size_t i = 1;
  while (i < series.size() && value_at(series[i], column) > value_at(series[i - 1], column)) ++i;
  if (i == 1) throw ShapeViolation(std::string(column), series[1].time_index, "never rises");
  if (i == series.size()) {
    throw ShapeViolation(std::string(column), series.back().time_index, "never falls");
  }
  const std::size_t peak = i - 1;
  for (; i < series.size(); ++i) {
    if (!(value_at(series[i], column) < value_at(series[i - 1], column))) {
      throw ShapeViolation(std::string(column), series[i].time_index,
                           "not below the previous tick after the peak");
    }
  }
  return series[peak].time_index;
}

ShapeReport curve_shape_check(const std::vector<SeriesRow>& series) {
  if (series.empty()) throw std::invalid_argument("curve_shape_check: empty series");
  auto has = [&](std::string_view column) {
    for (const auto& [name, _] : series.front().ctrs) {
      if (name == column) return true;
    }
    return false;
  };
  ShapeReport report;
  bool any = false;
  if (has("ctr_old")) {
    check_strictly_increasing(series, "ctr_old");
    report.checks.push_back("ctr_old strictly increasing over " + std::to_string(series.size()) +
                            " ticks");
    any = true;
  }
  if (has("ctr_new")) {
    report.peak_tick = check_rise_then_fall(series, "ctr_new");
    report.checks.push_back("ctr_new rises to t=" + std::to_string(*report.peak_tick) +
                            " then strictly decreases");
    any = true;
  }
  if (!any) throw std::invalid_argument("curve_shape_check: no ctr_old or ctr_new column");
  return report;
}

}  // namespace sponsim
