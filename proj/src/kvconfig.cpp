#include "binagree/kvconfig.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "binagree/csv.hpp"
#include "binagree/errors.hpp"

namespace binagree {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig cfg;
  long line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("expected 'key = value', got '" + std::string(line) + "'", line_no);
    const std::string_view key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError("empty key", line_no);
    cfg.values_[std::string(key)] = std::string(trim(line.substr(eq + 1)));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("input not found: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::optional<std::string> KeyValueConfig::get_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  used_.insert(key);
  return it->second;
}

std::optional<double> KeyValueConfig::get_double(const std::string& key) const {
  const auto s = get_string(key);
  if (!s) return std::nullopt;
  double v = 0.0;
  if (!csv::parse_double(*s, v)) throw DataError("config key '" + key + "': not a number: " + *s);
  return v;
}

std::optional<std::int64_t> KeyValueConfig::get_int(const std::string& key) const {
  const auto s = get_string(key);
  if (!s) return std::nullopt;
  std::int64_t v = 0;
  const auto res = std::from_chars(s->data(), s->data() + s->size(), v);
  if (res.ec != std::errc() || res.ptr != s->data() + s->size())
    throw DataError("config key '" + key + "': not an integer: " + *s);
  return v;
}

std::optional<std::uint64_t> KeyValueConfig::get_uint64(const std::string& key) const {
  const auto s = get_string(key);
  if (!s) return std::nullopt;
  std::uint64_t v = 0;
  const auto res = std::from_chars(s->data(), s->data() + s->size(), v);
  if (res.ec != std::errc() || res.ptr != s->data() + s->size())
    throw DataError("config key '" + key + "': not an unsigned integer: " + *s);
  return v;
}

std::optional<bool> KeyValueConfig::get_bool(const std::string& key) const {
  const auto s = get_string(key);
  if (!s) return std::nullopt;
  if (*s == "true" || *s == "1" || *s == "yes" || *s == "on") return true;
  if (*s == "false" || *s == "0" || *s == "no" || *s == "off") return false;
  throw DataError("config key '" + key + "': not a boolean: " + *s);
}

std::set<std::string> KeyValueConfig::unused_keys() const {
  std::set<std::string> out;
  for (const auto& [k, v] : values_)
    if (!used_.count(k)) out.insert(k);
  return out;
}

}  // namespace binagree
