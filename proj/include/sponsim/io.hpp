#pragma once

// Persistence: newline-delimited JSON event logs and RFC-4180 CSV helpers.
//
// Event log layout: the first line is a header object
//   {"kind":"log","horizon":<ms or null>}
// followed by one object per event with keys in this order:
//   kind, t, advertiser, slot, query_id, impression_ref[, source]
// `impression_ref` is the impression's own id on impression records and the
// clicked impression's id on click records; `source` appears on clicks only.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "sponsim/core.hpp"

namespace sponsim {

void write_log(const EventLog& log, std::ostream& out);
/// Writes atomically (temporary file + rename). Throws IoError.
void write_log(const EventLog& log, const std::filesystem::path& path);

/// Throws MalformedRecord (with 1-based line) or IoError.
EventLog read_log(std::istream& in);
EventLog read_log(const std::filesystem::path& path);

/// Writes `contents` to `path` via a sibling temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// RFC-4180 field quoting: fields containing a comma, quote, CR or LF are
/// wrapped in quotes with embedded quotes doubled.
std::string csv_field(std::string_view value);
std::string csv_row(const std::vector<std::string>& fields);
/// Splits one CSV record (no embedded newlines). Throws std::invalid_argument
/// on an unterminated quote.
std::vector<std::string> parse_csv_row(std::string_view line);

/// Rate formatting for display and CSV: half-up rounding to 4 decimals.
std::string format_rate(double value, int decimals = 4);
double round_half_up(double value, int decimals = 4);

}  // namespace sponsim
