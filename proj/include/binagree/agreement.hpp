#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "binagree/data.hpp"
#include "binagree/glmm.hpp"

namespace binagree {

/// Per-subject latent summaries, one per method: the Bland-Altman unit.
struct SubjectSummary {
  int subject = 0;
  double mu_hat_m1 = 0.0;
  double mu_hat_m2 = 0.0;
};

/// Which rater EBLUPs enter a subject's summary.
enum class RaterAverage {
  /// Raters that actually measured the subject with that method, averaged over
  /// the subject's records, so the summary is the mean fitted linear predictor
  /// of those records.
  subject_raters,
  /// All J raters of the method, as in the posterior-mean expression.
  all_raters,
};

struct SummaryOptions {
  RaterAverage rater_average = RaterAverage::subject_raters;
  /// Multiply the random part by J s2_gamma / (J s2_gamma + s2_alpha_m).
  bool reweight = false;
};

/// mu_hat_im = beta_m + mean_t g(x_t) + gamma_i + rater term.
std::vector<SubjectSummary> eblup_summary(const FitResult& fit, const LongDataset& ds,
                                          const SummaryOptions& options = {});

enum class BAScale { latent, probability, log_probability };

std::string to_string(BAScale scale);
BAScale parse_ba_scale(const std::string& s);

struct BAPoint {
  int subject = 0;
  double avg = 0.0;
  double diff = 0.0;
};

struct BASummary {
  BAScale scale = BAScale::latent;
  std::vector<BAPoint> points;
  double mean_diff = 0.0;
  double sd_diff = 0.0;
  double loa_low = 0.0;
  double loa_high = 0.0;
  /// Fraction of points with loa_low <= diff <= loa_high.
  double pct_within = 0.0;
  /// Subjects dropped on the log scale because Phi(mu_hat) < 1e-12.
  std::vector<int> dropped;
  std::vector<std::string> warnings;
  /// Optional pre-specified acceptance margin +-delta.
  std::optional<double> margin;
  bool within_margin = false;
};

constexpr double kLoaMultiplier = 1.96;

/// Bland-Altman points, mean difference, sample SD (n - 1) and limits of
/// agreement mean +- 1.96 SD. Probability scales transform each subject's
/// values by Phi (and log) before averaging and differencing.
BASummary ba_summary(const std::vector<SubjectSummary>& summaries, BAScale scale,
                     std::optional<double> margin = std::nullopt);

/// (y_hat_1, y_hat_2) with y_hat = 1 iff mu_hat > 0.
std::vector<std::pair<int, int>> predicted_binary_scores(
    const std::vector<SubjectSummary>& summaries);

/// 2x2 agreement table. a: both 0; b: method 1 says 1, method 2 says 0;
/// c: method 1 says 0, method 2 says 1; d: both 1.
struct KappaResult {
  long a = 0, b = 0, c = 0, d = 0;
  double kappa = 0.0;
  double std_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_o = 0.0;
  double p_e = 0.0;
  double level = 0.95;
  std::vector<std::string> warnings;

  long total() const { return a + b + c + d; }
};

/// Cohen's kappa with the Fleiss-Cohen-Everitt large-sample standard error and
/// a normal CI truncated to [-1, 1]. Throws DataError when p_e = 1.
KappaResult cohen_kappa(long a, long b, long c, long d, double level = 0.95);

/// Kappa on predicted subject-level scores.
KappaResult model_kappa(const std::vector<SubjectSummary>& summaries, double level = 0.95);

/// Kappa on the raw (subject, time) pairs, ignoring the repeated-measures
/// structure.
KappaResult naive_kappa(const LongDataset& ds, double level = 0.95);

struct ICCResult {
  double icc_m1 = 0.0;
  double icc_m2 = 0.0;
};

/// Latent-scale ICC within each method: (s2_gamma + 1) / (s2_gamma + s2_alpha_m + 1).
ICCResult icc(const VarianceComponents& vc);

}  // namespace binagree
