#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace binagree {

/// The two measuring methods under comparison.
enum class Method : std::uint8_t { first = 1, second = 2 };

/// Zero-based slot for per-method arrays.
constexpr int slot(Method m) { return m == Method::first ? 0 : 1; }

/// One (subject, time) visit with both methods' outcomes and raters, i.e. one
/// row of the wide input file.
struct PairedRecord {
  std::string subject_id;
  double time = 0.0;
  int outcome_m1 = 0;
  int outcome_m2 = 0;
  std::string rater_m1;
  std::string rater_m2;

  bool operator==(const PairedRecord&) const = default;
};

struct MeasurementRecord {
  int subject = 0;
  int rater = 0;
  Method method = Method::first;
  double time = 0.0;
  int outcome = 0;

  bool operator==(const MeasurementRecord&) const = default;
};

/// Long-format measurements sorted by (subject, method, time), with dense
/// subject and rater index maps. Raters share one index space across methods.
struct LongDataset {
  std::vector<MeasurementRecord> records;
  std::vector<std::string> subject_labels;
  std::vector<std::string> rater_labels;
  /// Sorted distinct visit times per subject.
  std::vector<std::vector<double>> subject_times;

  int n_subjects() const { return static_cast<int>(subject_labels.size()); }
  int n_raters() const { return static_cast<int>(rater_labels.size()); }
};

/// Column names of the wide CSV layout.
struct CsvColumns {
  std::string id = "id";
  std::string time = "time";
  std::string outcome_m1 = "y1";
  std::string outcome_m2 = "y2";
  std::string rater_m1 = "rater1";
  std::string rater_m2 = "rater2";
};

/// Outcome labels. Matching is exact and case-sensitive.
struct OutcomeLabels {
  std::string positive = "Positive";
  std::string negative = "Negative";
};

/// Parses the wide layout: header row, then one row per (subject, time) visit.
/// Throws ParseError (with line number) on malformed rows, unknown outcome
/// labels, duplicate (id, time) keys, or an empty data section.
std::vector<PairedRecord> parse_wide_csv(std::string_view text, const OutcomeLabels& labels = {},
                                         const CsvColumns& columns = {});

std::string write_wide_csv(const std::vector<PairedRecord>& paired,
                           const OutcomeLabels& labels = {}, const CsvColumns& columns = {});

/// Reshapes visits to two measurement records each.
LongDataset widen_to_long(const std::vector<PairedRecord>& paired);

/// Inverse of widen_to_long for datasets where every (subject, time) has both
/// methods. Output is ordered by (subject index, time). Throws DataError when a
/// visit is missing its partner.
std::vector<PairedRecord> pair_up(const LongDataset& ds);

struct ValidationReport {
  int n_subjects = 0;
  int n_raters = 0;
  std::size_t n_records = 0;
  int min_times = 0;
  int max_times = 0;
  double prevalence_m1 = 0.0;
  double prevalence_m2 = 0.0;
  bool constant_response = false;
  bool constant_within_method[2] = {false, false};
  /// Subjects whose outcomes are all identical (separation risk).
  std::vector<std::string> constant_subjects;
  /// Raters that administered only one of the two methods.
  std::vector<std::string> single_method_raters;
  /// Human-readable findings, one per line.
  std::vector<std::string> flags;

  bool balanced() const { return min_times == max_times; }
};

ValidationReport validate(const LongDataset& ds);

}  // namespace binagree
