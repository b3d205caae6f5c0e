#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <sstream>
#include <stdexcept>

#include "sponsim/bench.hpp"
#include "sponsim/io.hpp"

namespace sponsim {

std::optional<double> SeriesRow::ctr(std::string_view column) const {
  for (const auto& [name, value] : ctrs) {
    if (name == column) return value;
  }
  throw std::out_of_range("no column " + std::string(column));
}

std::string series_csv(const std::vector<SeriesRow>& series) {
  std::ostringstream out;
  std::vector<std::string> header{"time", "impressions", "clicks", "total_clicks"};
  if (!series.empty()) {
    for (const auto& [name, _] : series.front().ctrs) header.push_back(name);
  }
  out << csv_row(header) << "\r\n";
  for (const auto& row : series) {
    std::vector<std::string> fields{std::to_string(row.time_index), std::to_string(row.impressions),
                                    std::to_string(row.clicks),
                                    row.total_clicks ? std::to_string(*row.total_clicks) : ""};
    for (const auto& [_, value] : row.ctrs) {
      fields.push_back(value && std::isfinite(*value) ? format_rate(*value) : "");
    }
    out << csv_row(fields) << "\r\n";
  }
  return out.str();
}

void emit_csv(const std::vector<SeriesRow>& series, const std::filesystem::path& path) {
  if (series.empty()) throw std::invalid_argument("emit_csv: empty series");
  write_file_atomic(path, series_csv(series));
}

std::vector<SeriesRow> parse_series_csv(std::istream& in) {
  std::string line;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  if (!next_line()) throw std::invalid_argument("empty CSV");
  const auto header = parse_csv_row(line);
  if (header.size() < 4 || header[0] != "time" || header[1] != "impressions" ||
      header[2] != "clicks" || header[3] != "total_clicks") {
    throw std::invalid_argument("unexpected CSV header");
  }

  std::vector<SeriesRow> out;
  while (next_line()) {
    if (line.empty()) continue;
    const auto f = parse_csv_row(line);
    if (f.size() != header.size()) throw std::invalid_argument("CSV row width mismatch");
    SeriesRow row;
    row.time_index = std::stoi(f[0]);
    row.impressions = std::stoll(f[1]);
    row.clicks = std::stoll(f[2]);
    if (!f[3].empty()) row.total_clicks = std::stoll(f[3]);
    for (std::size_t i = 4; i < f.size(); ++i) {
      row.ctrs.emplace_back(header[i],
                            f[i].empty() ? std::nullopt : std::optional<double>(std::stod(f[i])));
    }
    out.push_back(std::move(row));
  }
  return out;
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += ch;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string series_svg(const std::vector<SeriesRow>& series, std::string_view title) {
  constexpr double width = 720, height = 440;
  constexpr double left = 70, right = 170, top = 40, bottom = 60;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  double x_min = 0, x_max = 1, y_max = 0;
  if (!series.empty()) {
    x_min = series.front().time_index;
    x_max = series.back().time_index;
    if (x_max <= x_min) x_max = x_min + 1;
  }
  for (const auto& row : series) {
    for (const auto& [_, v] : row.ctrs) {
      if (v && std::isfinite(*v)) y_max = std::max(y_max, *v);
    }
  }
  y_max = y_max > 0 ? y_max * 1.1 : 1.0;

  auto px = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
  auto py = [&](double y) { return top + plot_h - y / y_max * plot_h; };

  static constexpr const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                            "#ff7f0e", "#9467bd", "#8c564b"};

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
      << "  <rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n"
      << "  <text x=\"" << num(left + plot_w / 2) << "\" y=\"22\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"15\">" << xml_escape(title) << "</text>\n";

  // Axes with five ticks each.
  out << "  <g stroke=\"black\" stroke-width=\"1\">\n"
      << "    <line x1=\"" << num(left) << "\" y1=\"" << num(top + plot_h) << "\" x2=\""
      << num(left + plot_w) << "\" y2=\"" << num(top + plot_h) << "\"/>\n"
      << "    <line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left)
      << "\" y2=\"" << num(top + plot_h) << "\"/>\n"
      << "  </g>\n"
      << "  <g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = x_min + (x_max - x_min) * i / 5.0;
    const double yv = y_max * i / 5.0;
    out << "    <text x=\"" << num(px(xv)) << "\" y=\"" << num(top + plot_h + 16)
        << "\" text-anchor=\"middle\">" << num(xv) << "</text>\n"
        << "    <text x=\"" << num(left - 6) << "\" y=\"" << num(py(yv) + 4)
        << "\" text-anchor=\"end\">" << format_rate(yv, 3) << "</text>\n";
  }
  out << "    <text x=\"" << num(left + plot_w / 2) << "\" y=\"" << num(height - 15)
      << "\" text-anchor=\"middle\">time</text>\n"
      << "    <text x=\"18\" y=\"" << num(top + plot_h / 2) << "\" text-anchor=\"middle\" "
      << "transform=\"rotate(-90 18 " << num(top + plot_h / 2) << ")\">CTR</text>\n"
      << "  </g>\n";

  if (!series.empty()) {
    const auto& columns = series.front().ctrs;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const char* color = palette[c % std::size(palette)];
      out << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" "
          << "data-column=\"" << xml_escape(columns[c].first) << "\" points=\"";
      bool first = true;
      for (const auto& row : series) {
        const auto& v = row.ctrs.at(c).second;
        if (!v || !std::isfinite(*v)) continue;
        out << (first ? "" : " ") << num(px(row.time_index)) << ',' << num(py(*v));
        first = false;
      }
      out << "\"/>\n";
      const double ly = top + 16 + 20.0 * static_cast<double>(c);
      out << "  <line x1=\"" << num(left + plot_w + 15) << "\" y1=\"" << num(ly) << "\" x2=\""
          << num(left + plot_w + 40) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
          << "\" stroke-width=\"2\"/>\n"
          << "  <text x=\"" << num(left + plot_w + 46) << "\" y=\"" << num(ly + 4)
          << "\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(columns[c].first)
          << "</text>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

void emit_plot(const std::vector<SeriesRow>& series, const std::filesystem::path& path,
               std::string_view title) {
  if (series.empty()) throw std::invalid_argument("emit_plot: empty series");
  write_file_atomic(path, series_svg(series, title));
}

}  // namespace sponsim
