#include "sponsim/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "sponsim/error.hpp"

namespace sponsim {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json to_json(const Event& e) {
  ordered_json j;
  if (const auto* imp = std::get_if<ImpressionEvent>(&e)) {
    j["kind"] = "impression";
    j["t"] = imp->t;
    j["advertiser"] = imp->advertiser.str();
    j["slot"] = imp->slot;
    j["query_id"] = imp->query_id;
    j["impression_ref"] = imp->id;
  } else {
    const auto& c = std::get<ClickEvent>(e);
    j["kind"] = "click";
    j["t"] = c.t;
    j["advertiser"] = c.advertiser.str();
    j["slot"] = c.slot;
    j["query_id"] = c.query_id;
    j["impression_ref"] = c.impression_ref;
    j["source"] = std::string(to_string(c.source));
  }
  return j;
}

Event from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  const auto t = j.at("t").get<Millis>();
  AdvertiserId adv(j.at("advertiser").get<std::string>());
  const auto slot = j.at("slot").get<int>();
  const auto query_id = j.at("query_id").get<std::int64_t>();
  const auto ref = j.at("impression_ref").get<std::uint64_t>();
  if (kind == "impression") {
    return ImpressionEvent{t, std::move(adv), slot, query_id, ref};
  }
  if (kind == "click") {
    return ClickEvent{t, std::move(adv), slot, query_id, ref,
                      click_source_from_string(j.at("source").get<std::string>())};
  }
  throw std::invalid_argument("unknown event kind '" + kind + "'");
}

}  // namespace

void write_log(const EventLog& log, std::ostream& out) {
  ordered_json header;
  header["kind"] = "log";
  if (log.horizon() == kUnboundedHorizon) {
    header["horizon"] = nullptr;
  } else {
    header["horizon"] = log.horizon();
  }
  out << header.dump() << '\n';
  for (const auto& e : log.events()) out << to_json(e).dump() << '\n';
}

void write_log(const EventLog& log, const std::filesystem::path& path) {
  std::ostringstream buf;
  write_log(log, buf);
  write_file_atomic(path, buf.str());
}

EventLog read_log(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<EventLog> log;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!j.is_object()) throw std::invalid_argument("record is not a JSON object");
      if (!log) {
        if (j.value("kind", "") != "log") throw std::invalid_argument("missing log header");
        const auto& h = j.at("horizon");
        log.emplace(h.is_null() ? kUnboundedHorizon : h.get<Millis>());
        continue;
      }
      log->append(from_json(j));
    } catch (const std::exception& ex) {
      throw MalformedRecord(line_no, ex.what());
    }
  }
  if (in.bad()) throw IoError("read failure");
  if (!log) throw MalformedRecord(line_no + 1, "missing log header");
  return std::move(*log);
}

EventLog read_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_log(in);
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char ch : value) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_field(fields[i]);
  }
  return out;
}

std::vector<std::string> parse_csv_row(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (quoted) throw std::invalid_argument("unterminated quoted CSV field");
  out.push_back(std::move(cur));
  return out;
}

double round_half_up(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::floor(value * scale + 0.5) / scale;
}

std::string format_rate(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, round_half_up(value, decimals));
  return buf;
}

}  // namespace sponsim
