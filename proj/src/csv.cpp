#include "binagree/csv.hpp"

#include <charconv>
#include <cmath>

#include "binagree/errors.hpp"

namespace binagree::csv {
namespace {

std::string_view trim(std::string_view s) {
  const auto blank = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && blank(s.front())) s.remove_prefix(1);
  while (!s.empty() && blank(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<Row> parse(std::string_view text) {
  std::vector<Row> rows;
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

  long line = 1;
  std::size_t pos = 0;
  while (pos < text.size()) {
    Row row;
    row.line = line;
    bool row_has_content = false;
    bool end_of_row = false;
    while (!end_of_row) {
      std::string field;
      // Skip leading blanks so that `a, "b"` still sees the quote.
      std::size_t probe = pos;
      while (probe < text.size() && (text[probe] == ' ' || text[probe] == '\t')) ++probe;
      if (probe < text.size() && text[probe] == '"') {
        pos = probe + 1;
        const long quote_line = line;
        bool closed = false;
        while (pos < text.size()) {
          const char c = text[pos];
          if (c == '"') {
            if (pos + 1 < text.size() && text[pos + 1] == '"') {
              field.push_back('"');
              pos += 2;
              continue;
            }
            ++pos;
            closed = true;
            break;
          }
          if (c == '\n') ++line;
          field.push_back(c);
          ++pos;
        }
        if (!closed) throw ParseError("unterminated quoted field", quote_line);
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '\r'))
          ++pos;
        if (pos < text.size() && text[pos] != ',' && text[pos] != '\n')
          throw ParseError("unexpected character after quoted field", line);
        row_has_content = true;
      } else {
        const std::size_t start = pos;
        while (pos < text.size() && text[pos] != ',' && text[pos] != '\n') ++pos;
        field = std::string(trim(text.substr(start, pos - start)));
        if (!field.empty()) row_has_content = true;
      }
      row.fields.push_back(std::move(field));
      if (pos >= text.size()) {
        end_of_row = true;
      } else if (text[pos] == ',') {
        ++pos;
        row_has_content = true;
      } else {  // '\n'
        ++pos;
        ++line;
        end_of_row = true;
      }
    }
    if (row_has_content) rows.push_back(std::move(row));
  }
  return rows;
}

std::string escape(std::string_view field) {
  const bool needs_quotes =
      field.find_first_of(",\"\r\n") != std::string_view::npos ||
      (!field.empty() && (field.front() == ' ' || field.back() == ' ' || field.front() == '\t' ||
                          field.back() == '\t'));
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string join(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out.push_back(',');
    out += cells[i];
  }
  return out;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  if (text == "nan") {
    out = std::nan("");
    return true;
  }
  if (text == "inf" || text == "-inf") {
    out = text.front() == '-' ? -INFINITY : INFINITY;
    return true;
  }
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

}  // namespace binagree::csv
