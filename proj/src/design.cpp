#include "binagree/glmm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "binagree/errors.hpp"
#include "binagree/normal.hpp"

namespace binagree {

DesignBundle build_design(const LongDataset& ds, const ModelSpec& spec) {
  const int n = static_cast<int>(ds.records.size());
  const int n_subjects = ds.n_subjects();
  const int n_raters = ds.n_raters();
  if (n == 0) throw DataError("dataset has no records");
  if (spec.rater_effect == RaterEffect::included && n_raters < 2)
    throw DataError("rater effect requested but the dataset has " + std::to_string(n_raters) +
                    " rater(s)");

  DesignBundle d;
  const bool with_time = spec.time_trend == TimeTrend::linear;
  d.X = Eigen::MatrixXd::Zero(n, with_time ? 3 : 2);
  d.y.resize(n);
  d.fixed_names = {"beta_1", "beta_2"};
  if (with_time) d.fixed_names.push_back("theta");

  d.n_diag = n_subjects;
  d.diag_term.assign(n_subjects, 0);
  d.n_terms = 1;
  if (spec.rater_effect == RaterEffect::included) {
    d.n_dense = 2 * n_raters;
    d.dense_term.resize(d.n_dense);
    for (int c = 0; c < d.n_dense; ++c) d.dense_term[c] = 1 + c / n_raters;
    d.n_terms = 3;
  }
  d.estimate_rho = spec.residual_correlation == ResidualCorrelation::ar1;
  d.estimate_scale = spec.residual_scale == ResidualScale::estimated;
  d.diag_col.resize(n);
  d.dense_col.assign(n, -1);

  for (int r = 0; r < n; ++r) {
    const MeasurementRecord& rec = ds.records[r];
    d.X(r, slot(rec.method)) = 1.0;
    if (with_time) d.X(r, 2) = rec.time;
    d.y[r] = rec.outcome;
    d.diag_col[r] = rec.subject;
    if (spec.rater_effect == RaterEffect::included)
      d.dense_col[r] = slot(rec.method) * n_raters + rec.rater;
  }

  std::map<std::vector<double>, int> pattern_index;
  int start = 0;
  while (start < n) {
    const MeasurementRecord& head = ds.records[start];
    int end = start + 1;
    while (end < n && ds.records[end].subject == head.subject &&
           ds.records[end].method == head.method)
      ++end;
    std::vector<double> times;
    for (int r = start; r < end; ++r) {
      if (r > start && !(ds.records[r].time > ds.records[r - 1].time))
        throw DataError("records of subject '" + ds.subject_labels[head.subject] +
                        "' are not strictly increasing in time within a method");
      times.push_back(ds.records[r].time);
    }
    // Only gaps matter, so shift each pattern to start at zero.
    const double t0 = times.front();
    for (double& t : times) t -= t0;
    const auto [it, inserted] =
        pattern_index.try_emplace(times, static_cast<int>(d.time_patterns.size()));
    if (inserted) d.time_patterns.push_back(times);
    d.blocks.push_back({start, end - start, it->second});
    start = end;
  }
  return d;
}

Eigen::MatrixXd ar1_matrix(const std::vector<double>& times, double rho) {
  if (!(std::abs(rho) < 1.0)) throw DataError("AR(1) parameter must satisfy |rho| < 1");
  const auto n = static_cast<Eigen::Index>(times.size());
  Eigen::MatrixXd C = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(times[i])) throw DataError("AR(1) times must be finite");
    for (Eigen::Index j = 0; j < i; ++j) {
      const double gap = std::abs(times[i] - times[j]);
      double value;
      if (rho >= 0.0) {
        value = std::pow(rho, gap);
      } else {
        const double rounded = std::round(gap);
        if (gap == rounded)
          value = std::pow(rho, rounded);
        else
          value = std::pow(-rho, gap) * std::cos(std::numbers::pi * gap);
      }
      C(i, j) = C(j, i) = value;
    }
  }
  return C;
}

WorkingData linearize(const DesignBundle& design, const Eigen::VectorXd& eta) {
  constexpr double kEtaBound = 8.0;
  WorkingData w;
  w.design = &design;
  const Eigen::Index n = eta.size();
  w.response.resize(n);
  w.weights.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double e = std::clamp(eta[i], -kEtaBound, kEtaBound);
    const double mu = norm_cdf(e);
    const double var = mu * norm_sf(e);
    const double dens = norm_pdf(e);
    w.response[i] = e + (design.y[i] - mu) / dens;
    w.weights[i] = dens * dens / var;
  }
  return w;
}

Eigen::VectorXd to_unconstrained(const DesignBundle& design, const VarianceComponents& vc,
                                 double floor) {
  Eigen::VectorXd p(design.n_variance_params());
  const double variances[3] = {vc.sigma2_gamma, vc.sigma2_alpha1, vc.sigma2_alpha2};
  for (int t = 0; t < design.n_terms; ++t) p[t] = std::log(std::max(variances[t], floor));
  if (design.estimate_rho) p[design.rho_index()] = std::atanh(vc.rho);
  if (design.estimate_scale) p[design.scale_index()] = std::log(vc.scale);
  return p;
}

VarianceComponents from_unconstrained(const DesignBundle& design, const Eigen::VectorXd& params,
                                      double floor) {
  VarianceComponents vc;
  double* slots[3] = {&vc.sigma2_gamma, &vc.sigma2_alpha1, &vc.sigma2_alpha2};
  for (int t = 0; t < design.n_terms && t < 3; ++t)
    *slots[t] = std::max(std::exp(params[t]), floor);
  if (design.estimate_rho) vc.rho = std::tanh(params[design.rho_index()]);
  if (design.estimate_scale) vc.scale = std::exp(params[design.scale_index()]);
  return vc;
}

std::string to_string(TimeTrend v) { return v == TimeTrend::none ? "none" : "linear"; }
std::string to_string(ResidualCorrelation v) {
  return v == ResidualCorrelation::independent ? "independent" : "ar1";
}
std::string to_string(RaterEffect v) { return v == RaterEffect::included ? "included" : "omitted"; }
std::string to_string(ResidualScale v) { return v == ResidualScale::fixed ? "fixed" : "estimated"; }

TimeTrend parse_time_trend(const std::string& s) {
  if (s == "none") return TimeTrend::none;
  if (s == "linear") return TimeTrend::linear;
  throw DataError("unknown time trend '" + s + "' (expected none|linear)");
}
ResidualCorrelation parse_residual_correlation(const std::string& s) {
  if (s == "independent") return ResidualCorrelation::independent;
  if (s == "ar1") return ResidualCorrelation::ar1;
  throw DataError("unknown residual correlation '" + s + "' (expected independent|ar1)");
}
RaterEffect parse_rater_effect(const std::string& s) {
  if (s == "included") return RaterEffect::included;
  if (s == "omitted") return RaterEffect::omitted;
  throw DataError("unknown rater effect '" + s + "' (expected included|omitted)");
}
ResidualScale parse_residual_scale(const std::string& s) {
  if (s == "fixed") return ResidualScale::fixed;
  if (s == "estimated") return ResidualScale::estimated;
  throw DataError("unknown residual scale '" + s + "' (expected fixed|estimated)");
}

}  // namespace binagree
