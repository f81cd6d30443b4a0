#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace binagree {

/// Flat `key = value` configuration, `#` starts a comment. Later keys override
/// earlier ones. Typed getters throw DataError on malformed values.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::optional<std::string> get_string(const std::string& key) const;
  std::optional<double> get_double(const std::string& key) const;
  std::optional<std::int64_t> get_int(const std::string& key) const;
  std::optional<std::uint64_t> get_uint64(const std::string& key) const;
  std::optional<bool> get_bool(const std::string& key) const;

  double get_double(const std::string& key, double fallback) const {
    return get_double(key).value_or(fallback);
  }
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    return get_int(key).value_or(fallback);
  }

  /// Keys never read through a getter; useful for typo warnings.
  std::set<std::string> unused_keys() const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace binagree
