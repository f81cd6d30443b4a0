#pragma once

#include <stdexcept>
#include <string>

namespace binagree {

/// Malformed input data (CSV rows, labels, duplicate keys).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, long line = -1)
      : std::runtime_error(line >= 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  long line() const noexcept { return line_; }

 private:
  long line_;
};

/// Data that parses but cannot be modelled as requested.
class DataError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Singular systems, non-finite objectives, failed optimizations.
class NumericalError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace binagree
