#include "binagree/agreement.hpp"

#include <algorithm>
#include <cmath>

#include "binagree/errors.hpp"
#include "binagree/normal.hpp"

namespace binagree {

std::vector<SubjectSummary> eblup_summary(const FitResult& fit, const LongDataset& ds,
                                          const SummaryOptions& options) {
  const int n_subjects = ds.n_subjects();
  const int n_raters = ds.n_raters();
  if (fit.eblup_gamma.size() != n_subjects || fit.eblup_alpha.rows() != n_raters)
    throw DataError("fit does not match the dataset (subject or rater counts differ)");
  const double slope = fit.fixed.theta.value_or(0.0);
  const double beta[2] = {fit.fixed.beta_1, fit.fixed.beta_2};

  double rater_mean[2] = {0.0, 0.0};
  for (int m = 0; m < 2; ++m) rater_mean[m] = n_raters ? fit.eblup_alpha.col(m).mean() : 0.0;

  // Per subject and method: sum of g(x_t) and of the rater EBLUPs over records.
  std::vector<double> trend_sum(2 * n_subjects, 0.0), rater_sum(2 * n_subjects, 0.0);
  std::vector<int> count(2 * n_subjects, 0);
  for (const MeasurementRecord& r : ds.records) {
    const int k = 2 * r.subject + slot(r.method);
    trend_sum[k] += slope * r.time;
    rater_sum[k] += fit.eblup_alpha(r.rater, slot(r.method));
    count[k] += 1;
  }

  std::vector<SubjectSummary> out(n_subjects);
  for (int i = 0; i < n_subjects; ++i) {
    out[i].subject = i;
    for (int m = 0; m < 2; ++m) {
      const int k = 2 * i + m;
      if (count[k] == 0)
        throw DataError("subject '" + ds.subject_labels[i] + "' has no records for method " +
                        std::to_string(m + 1));
      const double rater_term = options.rater_average == RaterAverage::all_raters
                                    ? rater_mean[m]
                                    : rater_sum[k] / count[k];
      double random_part = fit.eblup_gamma[i] + rater_term;
      if (options.reweight) {
        const double s2g = fit.vc.sigma2_gamma;
        const double s2a = m == 0 ? fit.vc.sigma2_alpha1 : fit.vc.sigma2_alpha2;
        const double denom = n_raters * s2g + s2a;
        random_part *= denom > 0.0 ? n_raters * s2g / denom : 0.0;
      }
      const double mu = beta[m] + trend_sum[k] / count[k] + random_part;
      (m == 0 ? out[i].mu_hat_m1 : out[i].mu_hat_m2) = mu;
    }
  }
  return out;
}

std::string to_string(BAScale scale) {
  switch (scale) {
    case BAScale::latent: return "latent";
    case BAScale::probability: return "probability";
    case BAScale::log_probability: return "log_probability";
  }
  return "latent";
}

BAScale parse_ba_scale(const std::string& s) {
  if (s == "latent") return BAScale::latent;
  if (s == "probability" || s == "prob") return BAScale::probability;
  if (s == "log_probability" || s == "log" || s == "logprob") return BAScale::log_probability;
  throw DataError("unknown scale '" + s + "' (expected latent|probability|log_probability)");
}

BASummary ba_summary(const std::vector<SubjectSummary>& summaries, BAScale scale,
                     std::optional<double> margin) {
  if (summaries.size() < 2) throw DataError("Bland-Altman summary needs at least 2 subjects");
  BASummary ba;
  ba.scale = scale;
  ba.margin = margin;
  constexpr double kMinProbability = 1e-12;
  for (const SubjectSummary& s : summaries) {
    double v1 = s.mu_hat_m1, v2 = s.mu_hat_m2;
    if (scale != BAScale::latent) {
      v1 = norm_cdf(v1);
      v2 = norm_cdf(v2);
    }
    if (scale == BAScale::log_probability) {
      if (v1 < kMinProbability || v2 < kMinProbability) {
        ba.dropped.push_back(s.subject);
        continue;
      }
      v1 = std::log(v1);
      v2 = std::log(v2);
    }
    ba.points.push_back({s.subject, 0.5 * (v1 + v2), v1 - v2});
  }
  if (!ba.dropped.empty())
    ba.warnings.push_back(std::to_string(ba.dropped.size()) +
                          " subject(s) dropped: Phi(mu_hat) below 1e-12 on the log scale");
  const auto n = static_cast<double>(ba.points.size());
  if (ba.points.size() < 2)
    throw DataError("Bland-Altman summary needs at least 2 subjects after dropping");

  double sum = 0.0;
  for (const BAPoint& p : ba.points) sum += p.diff;
  ba.mean_diff = sum / n;
  double ss = 0.0;
  for (const BAPoint& p : ba.points) ss += (p.diff - ba.mean_diff) * (p.diff - ba.mean_diff);
  ba.sd_diff = std::sqrt(ss / (n - 1.0));
  ba.loa_low = ba.mean_diff - kLoaMultiplier * ba.sd_diff;
  ba.loa_high = ba.mean_diff + kLoaMultiplier * ba.sd_diff;
  // Guard the band against rounding when all differences are equal.
  const double slack = 1e-12 * std::max(1.0, std::abs(ba.mean_diff));
  const auto inside = std::count_if(ba.points.begin(), ba.points.end(), [&](const BAPoint& p) {
    return p.diff >= ba.loa_low - slack && p.diff <= ba.loa_high + slack;
  });
  ba.pct_within = static_cast<double>(inside) / n;
  if (margin) ba.within_margin = ba.loa_low >= -*margin && ba.loa_high <= *margin;
  return ba;
}

std::vector<std::pair<int, int>> predicted_binary_scores(
    const std::vector<SubjectSummary>& summaries) {
  std::vector<std::pair<int, int>> out;
  out.reserve(summaries.size());
  for (const SubjectSummary& s : summaries)
    out.emplace_back(s.mu_hat_m1 > 0.0 ? 1 : 0, s.mu_hat_m2 > 0.0 ? 1 : 0);
  return out;
}

KappaResult cohen_kappa(long a, long b, long c, long d, double level) {
  if (a < 0 || b < 0 || c < 0 || d < 0) throw DataError("contingency counts must be non-negative");
  if (!(level > 0.0 && level < 1.0)) throw DataError("confidence level must lie in (0, 1)");
  KappaResult k;
  k.a = a;
  k.b = b;
  k.c = c;
  k.d = d;
  k.level = level;
  const double n = static_cast<double>(k.total());
  if (n < 1) throw DataError("contingency table is empty");

  // p[i][j]: method 1 outcome i, method 2 outcome j.
  const double p[2][2] = {{a / n, c / n}, {b / n, d / n}};
  const double row[2] = {p[0][0] + p[0][1], p[1][0] + p[1][1]};  // method 1 margins
  const double col[2] = {p[0][0] + p[1][0], p[0][1] + p[1][1]};  // method 2 margins
  k.p_o = p[0][0] + p[1][1];
  k.p_e = row[0] * col[0] + row[1] * col[1];
  if (k.p_e >= 1.0)
    throw DataError("kappa undefined: chance agreement is 1 (all mass in one category)");
  k.kappa = (k.p_o - k.p_e) / (1.0 - k.p_e);

  // Fleiss, Cohen & Everitt (1969) large-sample variance.
  const double q_o = 1.0 - k.p_o, q_e = 1.0 - k.p_e;
  double diag_term = 0.0, off_term = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double t = q_e - (row[i] + col[i]) * q_o;
    diag_term += p[i][i] * t * t;
    for (int j = 0; j < 2; ++j)
      if (i != j) off_term += p[i][j] * (col[i] + row[j]) * (col[i] + row[j]);
  }
  const double tail = k.p_o * k.p_e - 2.0 * k.p_e + k.p_o;
  const double var = (diag_term + q_o * q_o * off_term - tail * tail) / (n * std::pow(q_e, 4));
  k.std_error = std::sqrt(std::max(var, 0.0));
  const double z = norm_quantile(1.0 - (1.0 - level) / 2.0);
  k.ci_low = std::max(-1.0, k.kappa - z * k.std_error);
  k.ci_high = std::min(1.0, k.kappa + z * k.std_error);
  if (k.std_error == 0.0)
    k.warnings.push_back("kappa standard error is zero; confidence interval is degenerate");
  return k;
}

KappaResult model_kappa(const std::vector<SubjectSummary>& summaries, double level) {
  long t[2][2] = {{0, 0}, {0, 0}};
  for (const auto& [y1, y2] : predicted_binary_scores(summaries)) ++t[y1][y2];
  return cohen_kappa(t[0][0], t[1][0], t[0][1], t[1][1], level);
}

KappaResult naive_kappa(const LongDataset& ds, double level) {
  long t[2][2] = {{0, 0}, {0, 0}};
  for (const PairedRecord& p : pair_up(ds)) ++t[p.outcome_m1][p.outcome_m2];
  return cohen_kappa(t[0][0], t[1][0], t[0][1], t[1][1], level);
}

ICCResult icc(const VarianceComponents& vc) {
  if (vc.sigma2_gamma < 0.0 || vc.sigma2_alpha1 < 0.0 || vc.sigma2_alpha2 < 0.0)
    throw DataError("variance components must be non-negative");
  const double shared = vc.sigma2_gamma + 1.0;
  return {shared / (shared + vc.sigma2_alpha1), shared / (shared + vc.sigma2_alpha2)};
}

}  // namespace binagree
