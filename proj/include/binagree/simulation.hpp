#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "binagree/data.hpp"
#include "binagree/glmm.hpp"
#include "binagree/rng.hpp"

namespace binagree {

enum class RaterAssignment {
  /// A fresh pair of distinct raters at every visit.
  fresh_pair,
  /// One pair of distinct raters per subject, kept for all visits.
  persistent_pair,
};

/// Parameters of the generating probit model. Time covariate x_t = t.
struct SimConfig {
  int n_subjects = 100;
  int n_raters = 30;
  int n_times = 5;
  /// When non-empty, per-subject visit times (overrides n_subjects/n_times).
  std::vector<std::vector<double>> subject_times;
  double beta_1 = 1.6;
  double beta_2 = 1.6;
  double time_slope = -0.5;
  double sigma2_gamma = 0.8;
  double sigma2_alpha1 = 0.2;
  double sigma2_alpha2 = 0.4;
  double rho = 0.1;
  std::uint64_t seed = 42;
  RaterAssignment assignment = RaterAssignment::fresh_pair;

  /// Methods agree: beta_1 = beta_2 = 1.6.
  static SimConfig model1();
  /// Methods disagree: beta_1 = 2.2, beta_2 = 1.6.
  static SimConfig model2();

  /// Throws DataError on out-of-range values.
  void check() const;
  int subject_count() const;
};

/// Generating random effects, indexed as generated (subject i, rater j).
struct SimTruth {
  Eigen::VectorXd gamma;
  Eigen::MatrixXd alpha;  // n_raters x 2
};

struct SimulatedData {
  std::vector<PairedRecord> paired;
  LongDataset data;
  SimTruth truth;
};

/// One latent error series with unit variances and correlation
/// ar1_matrix(times, rho), drawn as L z with L the Cholesky factor.
Eigen::VectorXd sample_ar1(const Eigen::MatrixXd& chol_factor, RandomStream& rng);

/// Draws one dataset. Subject labels are "1".."I", rater labels "R1".."RJ".
SimulatedData generate_with_truth(const SimConfig& config, RandomStream& rng);
LongDataset generate(const SimConfig& config, RandomStream& rng);

/// Runs task(i) for i in [0, n) on up to `jobs` threads. Results must be
/// written to per-index slots; completion order does not matter.
void parallel_for(int n, int jobs, const std::function<void(int)>& task);

struct ParameterSummary {
  double mean = 0.0;
  double sd = 0.0;
};

struct ReplicateRecord {
  int grid_point = 0;
  int replicate = 0;
  bool converged = false;
  std::string error;
  double beta_1 = 0.0, beta_2 = 0.0, theta = 0.0;
  double sigma2_gamma = 0.0, sigma2_alpha1 = 0.0, sigma2_alpha2 = 0.0, rho = 0.0;
  double icc_1 = 0.0, icc_2 = 0.0;
  double estimate = 0.0, std_error = 0.0, p_value = 1.0;
  bool rejected = false;
};

struct CampaignOptions {
  int jobs = 1;
  double alpha = 0.05;
  FitOptions fit;
  /// Campaign errors out when more than this fraction of fits fail.
  double max_failure_fraction = 0.10;
};

struct SimCampaignResult {
  int n_replicates = 0;
  int n_used = 0;
  int n_failed = 0;
  double rejection_rate = 0.0;
  ParameterSummary beta_1, beta_2, difference, theta;
  ParameterSummary sigma2_gamma, sigma2_alpha1, sigma2_alpha2, rho;
  ParameterSummary icc_1, icc_2;
  std::vector<ReplicateRecord> replicates;
};

/// Fits `n_replicates` datasets drawn from `config` (replicate r uses stream
/// (config.seed, r)). Non-converged fits are excluded from the summaries.
SimCampaignResult run_recovery(const SimConfig& config, int n_replicates, const ModelSpec& spec,
                               const CampaignOptions& options = {});

struct PowerRow {
  double beta_1 = 0.0;
  std::string spec_label;
  int n_replicates = 0;
  int n_used = 0;
  int n_failed = 0;
  double rejection_rate = 0.0;
};

struct LabeledSpec {
  std::string label;
  ModelSpec spec;
};

struct PowerTable {
  double alpha = 0.05;
  std::vector<PowerRow> rows;  // grid-major, specs in the given order
  std::vector<ReplicateRecord> replicates;
};

/// For every beta_1 on the grid, draws `n_replicates` datasets (shared by all
/// specs) and records how often the Wald test rejects at `options.alpha`.
PowerTable run_size_power(const SimConfig& base, const std::vector<double>& beta_1_grid,
                          int n_replicates, const std::vector<LabeledSpec>& specs,
                          const CampaignOptions& options = {});

/// Default specs: rater effect included and omitted.
std::vector<LabeledSpec> default_power_specs();

/// beta_1 from `from` to `to` inclusive in steps of `step`.
std::vector<double> make_grid(double from, double to, double step);

}  // namespace binagree
