#pragma once

#include <Eigen/Dense>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "binagree/data.hpp"

namespace binagree {

enum class TimeTrend { none, linear };
enum class ResidualCorrelation { independent, ar1 };
enum class RaterEffect { included, omitted };
/// Residual scale of the working model. `fixed` keeps the latent residual
/// variance at 1 (the probit identification); `estimated` adds a free
/// multiplicative overdispersion scale, as common GLMM packages do by default.
enum class ResidualScale { fixed, estimated };

/// Probit GLMM configuration. By default the latent residual variance is fixed at 1.
struct ModelSpec {
  TimeTrend time_trend = TimeTrend::linear;
  ResidualCorrelation residual_correlation = ResidualCorrelation::ar1;
  RaterEffect rater_effect = RaterEffect::included;
  ResidualScale residual_scale = ResidualScale::fixed;

  bool operator==(const ModelSpec&) const = default;
};

struct FixedEffects {
  double beta_1 = 0.0;
  double beta_2 = 0.0;
  std::optional<double> theta;  // time slope, present when time_trend = linear
  /// Covariance of (beta_1, beta_2[, theta]).
  Eigen::MatrixXd cov;
};

struct VarianceComponents {
  double sigma2_gamma = 0.0;
  double sigma2_alpha1 = 0.0;
  double sigma2_alpha2 = 0.0;
  double rho = 0.0;
  /// Working residual scale; 1 unless ResidualScale::estimated.
  double scale = 1.0;
  // Standard errors; NaN when the parameter is not estimated or sits on the
  // variance floor.
  double se_sigma2_gamma = std::numeric_limits<double>::quiet_NaN();
  double se_sigma2_alpha1 = std::numeric_limits<double>::quiet_NaN();
  double se_sigma2_alpha2 = std::numeric_limits<double>::quiet_NaN();
  double se_rho = std::numeric_limits<double>::quiet_NaN();
  double se_scale = std::numeric_limits<double>::quiet_NaN();
};

struct FitOptions {
  double tolerance = 1e-6;
  int max_outer = 100;
  int max_inner_evaluations = 200;
  double level = 0.95;
  double variance_floor = 1e-10;
  double hessian_step = 1e-4;
  /// Hold variance components at these values instead of estimating them.
  std::optional<VarianceComponents> fixed_components;
};

struct FitResult {
  ModelSpec spec;
  FixedEffects fixed;
  VarianceComponents vc;
  Eigen::VectorXd eblup_gamma;  // length I
  Eigen::MatrixXd eblup_alpha;  // J x 2, zero when raters are omitted
  bool converged = false;
  int n_outer_iterations = 0;
  double final_change = 0.0;
  double reml_objective = 0.0;
  int n_inner_evaluations = 0;
  std::vector<std::string> warnings;
};

struct WaldTest {
  double estimate = 0.0;
  double std_error = 0.0;
  double statistic = 0.0;
  double p_value = 1.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double level = 0.95;
};

/// One R-side block: a contiguous run of records sharing (subject, method).
struct ResidualBlock {
  int start = 0;
  int size = 0;
  int pattern = 0;  // index into DesignBundle::time_patterns
};

/// Fixed- and random-effect structure of the working linear mixed model.
///
/// The random-effect vector is split in two parts. "Diagonal" columns never
/// share an R-block with another diagonal column, so their block of Z'R^-1 Z
/// is diagonal (the subject effects). "Dense" columns carry everything else
/// (rater-within-method effects). Every column belongs to one variance term.
struct DesignBundle {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> fixed_names;

  int n_diag = 0;
  int n_dense = 0;
  std::vector<int> diag_col;   // per record, -1 when absent
  std::vector<int> dense_col;  // per record, -1 when absent
  std::vector<int> diag_term;  // per diagonal column
  std::vector<int> dense_term;  // per dense column
  int n_terms = 0;
  bool estimate_rho = false;
  bool estimate_scale = false;

  std::vector<ResidualBlock> blocks;
  std::vector<std::vector<double>> time_patterns;

  int n_records() const { return static_cast<int>(X.rows()); }
  int n_fixed() const { return static_cast<int>(X.cols()); }
  /// Length of the unconstrained variance-parameter vector.
  int n_variance_params() const {
    return n_terms + (estimate_rho ? 1 : 0) + (estimate_scale ? 1 : 0);
  }
  int rho_index() const { return n_terms; }
  int scale_index() const { return n_terms + (estimate_rho ? 1 : 0); }
};

/// Builds the cell-means design (one column per method, plus time when the
/// trend is linear), subject and rater-within-method incidence, and R-side
/// blocks. Rater columns are laid out method-major: column m*J + j.
DesignBundle build_design(const LongDataset& ds, const ModelSpec& spec);

/// Correlation matrix with entries rho^|t - t'|. For negative rho and a
/// non-integer gap d the entry is |rho|^d cos(pi d), which agrees with rho^d
/// at integer gaps and stays positive definite.
Eigen::MatrixXd ar1_matrix(const std::vector<double>& times, double rho);

struct CrossProductCache;

/// Linearized response and weights for one pseudo-likelihood step.
struct WorkingData {
  const DesignBundle* design = nullptr;
  Eigen::VectorXd response;  // pseudo-response P
  Eigen::VectorXd weights;   // working weights W
  double ridge = 0.0;        // added to the diagonal of X'V^-1 X
  /// Whitened cross-products keyed on rho; checked against response and
  /// weights before reuse. Not safe to share between threads.
  mutable std::shared_ptr<CrossProductCache> cache;
};

/// Builds working data around the linear predictor eta (probit link).
WorkingData linearize(const DesignBundle& design, const Eigen::VectorXd& eta);

/// Unconstrained parameter vector: log variance per term, then atanh(rho),
/// then log scale.
Eigen::VectorXd to_unconstrained(const DesignBundle& design, const VarianceComponents& vc,
                                 double floor = 1e-10);
VarianceComponents from_unconstrained(const DesignBundle& design, const Eigen::VectorXd& params,
                                      double floor = 1e-10);

/// -2 x restricted log-likelihood of the working LMM without the 2 pi
/// constant: log|V| + log|X'V^-1 X| + r'V^-1 r. Returns +inf when V or
/// X'V^-1 X is numerically singular.
double reml_objective(const Eigen::VectorXd& params, const WorkingData& working,
                      double floor = 1e-10);

struct MmeSolution {
  Eigen::VectorXd beta;
  Eigen::VectorXd u;  // [diagonal part; dense part]
  Eigen::MatrixXd cov_beta;
  double objective = 0.0;
};

/// GLS fixed effects and BLUPs for given variance components, through the
/// Woodbury form of V^-1. Throws NumericalError when X'V^-1 X is singular.
MmeSolution solve_mme(const WorkingData& working, const VarianceComponents& vc,
                      double floor = 1e-10);

/// Same quantities from Henderson's mixed-model equations, assembled and
/// solved as one dense system. Slower; used as a cross-check.
MmeSolution solve_henderson(const WorkingData& working, const VarianceComponents& vc,
                            double floor = 1e-10);

struct ProbitGlmResult {
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Independent-observation probit regression by Fisher scoring.
ProbitGlmResult fit_probit_glm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               double ridge = 0.0, int max_iterations = 50,
                               double tolerance = 1e-10);

/// Restricted pseudo-likelihood fit of the probit GLMM.
FitResult fit(const LongDataset& ds, const ModelSpec& spec, const FitOptions& options = {});

/// Wald z-test of beta_1 = beta_2 with a normal reference distribution.
WaldTest wald_test(const FitResult& fit, double level = 0.95);

std::string to_string(TimeTrend v);
std::string to_string(ResidualCorrelation v);
std::string to_string(RaterEffect v);
std::string to_string(ResidualScale v);
TimeTrend parse_time_trend(const std::string& s);
ResidualCorrelation parse_residual_correlation(const std::string& s);
RaterEffect parse_rater_effect(const std::string& s);
ResidualScale parse_residual_scale(const std::string& s);

}  // namespace binagree
