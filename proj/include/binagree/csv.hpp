#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace binagree::csv {

struct Row {
  long line = 0;  // 1-based line number where the row starts
  std::vector<std::string> fields;
};

/// RFC 4180-style reader: quoted fields may contain commas, doubled quotes and
/// newlines. Unquoted fields are trimmed of surrounding blanks. Blank lines are
/// skipped.
std::vector<Row> parse(std::string_view text);

/// Quotes a field when it contains a delimiter, quote, line break or
/// surrounding blanks.
std::string escape(std::string_view field);

/// Joins already-formatted cells into one CSV line (no trailing newline).
std::string join(const std::vector<std::string>& cells);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

/// Strict parse of a full string as a finite double; returns false on failure.
bool parse_double(std::string_view text, double& out);

}  // namespace binagree::csv
