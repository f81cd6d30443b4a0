#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "binagree/agreement.hpp"
#include "binagree/data.hpp"
#include "binagree/glmm.hpp"
#include "binagree/simulation.hpp"

namespace binagree {

/// Ordered `key = value` lines. Doubles use the shortest round-trip form.
class KeyValueReport {
 public:
  void add(const std::string& key, const std::string& value);
  void add(const std::string& key, double value);
  void add(const std::string& key, int value);
  void add(const std::string& key, long value);
  void add(const std::string& key, bool value);
  std::string str() const;

 private:
  std::vector<std::pair<std::string, std::string>> lines_;
};

/// A fitted model together with the data it was fitted to.
struct FitState {
  LongDataset data;
  FitResult fit;
};

inline constexpr int kFitStateVersion = 1;

/// Versioned text serialization:
///
///   binagree-fit-state 1
///   [model]       key = value lines for the ModelSpec
///   [estimates]   key = value lines for the FitResult
///   [subjects]    one CSV-escaped label per line, in index order
///   [raters]      same for raters
///   [records]     subject,rater,method,time,outcome (indices, 1/2, 0/1)
///
/// Numbers round-trip exactly.
std::string write_fit_state(const LongDataset& data, const FitResult& fit);
/// Throws ParseError on malformed input or an unsupported version.
FitState read_fit_state(std::string_view text);

std::string format_validation_report(const ValidationReport& rep);
std::string format_fit_report(const FitResult& fit, const WaldTest& test);
std::string format_test_report(const WaldTest& test);
std::string format_kappa_report(const KappaResult& model, const KappaResult& naive);
std::string format_icc_report(const ICCResult& icc, const VarianceComponents& vc);
/// Summary lines as `# key = value` comments, then subject,avg,diff rows.
std::string format_ba_csv(const BASummary& ba, const LongDataset& data);
std::string format_recovery_csv(const SimCampaignResult& res);
std::string format_replicates_csv(const std::vector<ReplicateRecord>& records,
                                  const std::vector<double>& grid,
                                  const std::vector<std::string>& spec_labels, int n_replicates);
std::string format_power_csv(const PowerTable& table);

}  // namespace binagree
