#include "binagree/glmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "binagree/errors.hpp"
#include "binagree/normal.hpp"
#include "binagree/optimize.hpp"

namespace binagree {
namespace {

constexpr double kEtaBound = 8.0;
constexpr double kUpperLogVariance = 13.8;  // variance 1e6
constexpr double kMaxAtanhRho = 3.8;        // |rho| ~ 0.999

double probit_log_likelihood(const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double e = std::clamp(eta[i], -37.0, 37.0);
    const double p = y[i] > 0.5 ? norm_cdf(e) : norm_sf(e);
    ll += std::log(std::max(p, 1e-300));
  }
  return ll;
}

Eigen::VectorXd linear_predictor(const DesignBundle& d, const Eigen::VectorXd& beta,
                                 const Eigen::VectorXd& u) {
  Eigen::VectorXd eta = d.X * beta;
  for (int r = 0; r < d.n_records(); ++r) {
    if (d.diag_col[r] >= 0) eta[r] += u[d.diag_col[r]];
    if (d.dense_col[r] >= 0) eta[r] += u[d.n_diag + d.dense_col[r]];
  }
  return eta;
}

Eigen::VectorXd pack(const DesignBundle& d, const Eigen::VectorXd& beta,
                     const VarianceComponents& vc) {
  Eigen::VectorXd psi(d.n_fixed() + d.n_variance_params());
  psi.head(d.n_fixed()) = beta;
  const double variances[3] = {vc.sigma2_gamma, vc.sigma2_alpha1, vc.sigma2_alpha2};
  for (int t = 0; t < d.n_terms; ++t) psi[d.n_fixed() + t] = variances[t];
  if (d.estimate_rho) psi[d.n_fixed() + d.rho_index()] = vc.rho;
  if (d.estimate_scale) psi[d.n_fixed() + d.scale_index()] = vc.scale;
  return psi;
}

// Largest change relative to the previous value, with an absolute floor on
// the denominator so parameters near zero do not dominate.
double max_relative_change(const Eigen::VectorXd& old_psi, const Eigen::VectorXd& new_psi) {
  double change = 0.0;
  for (Eigen::Index i = 0; i < old_psi.size(); ++i)
    change = std::max(change, std::abs(new_psi[i] - old_psi[i]) /
                                  std::max(std::abs(old_psi[i]), 1e-2));
  return change;
}

Eigen::VectorXd clamp_params(const DesignBundle& d, Eigen::VectorXd params, double floor) {
  for (int t = 0; t < d.n_terms; ++t)
    params[t] = std::clamp(params[t], std::log(floor), kUpperLogVariance);
  if (d.estimate_rho)
    params[d.rho_index()] = std::clamp(params[d.rho_index()], -kMaxAtanhRho, kMaxAtanhRho);
  if (d.estimate_scale)
    params[d.scale_index()] =
        std::clamp(params[d.scale_index()], -kUpperLogVariance, kUpperLogVariance);
  return params;
}

// Standard errors from the finite-difference Hessian of the REML objective,
// restricted to parameters away from the variance floor.
void variance_standard_errors(const WorkingData& wd, const Eigen::VectorXd& params,
                              const FitOptions& options, VarianceComponents& vc,
                              std::vector<std::string>& warnings, int& evaluations) {
  const DesignBundle& d = *wd.design;
  const int k = d.n_variance_params();
  std::vector<int> free_idx;
  for (int i = 0; i < k; ++i) {
    const bool at_floor = i < d.n_terms && params[i] < std::log(options.variance_floor) + 7.0;
    if (!at_floor) free_idx.push_back(i);
  }
  if (free_idx.empty()) return;
  const auto reduced = [&](const Eigen::VectorXd& sub) {
    Eigen::VectorXd full = params;
    for (std::size_t i = 0; i < free_idx.size(); ++i) full[free_idx[i]] = sub[i];
    return reml_objective(full, wd, options.variance_floor);
  };
  Eigen::VectorXd sub(free_idx.size());
  for (std::size_t i = 0; i < free_idx.size(); ++i) sub[i] = params[free_idx[i]];
  const Eigen::MatrixXd H = opt::central_hessian(reduced, sub, options.hessian_step, &evaluations);
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (!H.allFinite() || llt.info() != Eigen::Success) {
    warnings.push_back("REML Hessian is not positive definite; variance-component standard "
                       "errors unavailable");
    return;
  }
  const Eigen::MatrixXd cov = 2.0 * llt.solve(Eigen::MatrixXd::Identity(sub.size(), sub.size()));
  double* se_slots[3] = {&vc.se_sigma2_gamma, &vc.se_sigma2_alpha1, &vc.se_sigma2_alpha2};
  const double variances[3] = {vc.sigma2_gamma, vc.sigma2_alpha1, vc.sigma2_alpha2};
  for (std::size_t i = 0; i < free_idx.size(); ++i) {
    const double se_unconstrained = std::sqrt(cov(i, i));
    const int idx = free_idx[i];
    if (idx < d.n_terms)
      *se_slots[idx] = variances[idx] * se_unconstrained;
    else if (d.estimate_rho && idx == d.rho_index())
      vc.se_rho = (1.0 - vc.rho * vc.rho) * se_unconstrained;
    else
      vc.se_scale = vc.scale * se_unconstrained;
  }
}

}  // namespace

ProbitGlmResult fit_probit_glm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double ridge,
                               int max_iterations, double tolerance) {
  const Eigen::Index n = X.rows(), p = X.cols();
  ProbitGlmResult res;
  res.beta = Eigen::VectorXd::Zero(p);
  double ll = probit_log_likelihood(X * res.beta, y);
  Eigen::MatrixXd info(p, p);
  for (int iter = 1; iter <= max_iterations; ++iter) {
    res.iterations = iter;
    const Eigen::VectorXd eta = X * res.beta;
    Eigen::VectorXd w(n), z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double e = std::clamp(eta[i], -kEtaBound, kEtaBound);
      const double mu = norm_cdf(e), dens = norm_pdf(e);
      w[i] = dens * dens / (mu * norm_sf(e));
      z[i] = e + (y[i] - mu) / dens;
    }
    info = X.transpose() * w.asDiagonal() * X;
    Eigen::MatrixXd lhs = info;
    lhs.diagonal().array() += ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(lhs);
    if (ldlt.info() != Eigen::Success) throw NumericalError("probit GLM: singular information");
    const Eigen::VectorXd target = ldlt.solve(X.transpose() * w.asDiagonal() * z);
    Eigen::VectorXd step = target - res.beta;
    double ll_new = probit_log_likelihood(X * target, y);
    for (int halving = 0; halving < 30 && ll_new < ll - 1e-12; ++halving) {
      step *= 0.5;
      ll_new = probit_log_likelihood(X * (res.beta + step), y);
    }
    res.beta += step;
    const double delta = ll_new - ll;
    ll = ll_new;
    if (step.lpNorm<Eigen::Infinity>() <= tolerance * (1.0 + res.beta.lpNorm<Eigen::Infinity>()) ||
        std::abs(delta) <= 1e-14 * (1.0 + std::abs(ll))) {
      res.converged = true;
      break;
    }
  }
  info.diagonal().array() += ridge;
  res.cov = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  res.log_likelihood = ll;
  return res;
}

FitResult fit(const LongDataset& ds, const ModelSpec& spec, const FitOptions& options) {
  if (ds.n_subjects() < 2) throw DataError("at least 2 subjects are required to fit");
  const DesignBundle design = build_design(ds, spec);
  const double floor = options.variance_floor;

  FitResult res;
  res.spec = spec;

  const ValidationReport report = validate(ds);
  double ridge = 0.0;
  if (report.constant_response || report.constant_within_method[0] ||
      report.constant_within_method[1]) {
    res.warnings.push_back("complete separation detected (constant response" +
                           std::string(report.constant_response ? "" : " within a method") +
                           "); adding a ridge of 1e-6 to X'V^-1 X");
    ridge = 1e-6;
  }

  Eigen::VectorXd beta = fit_probit_glm(design.X, design.y, ridge).beta;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(design.n_diag + design.n_dense);
  VarianceComponents init;
  if (options.fixed_components) {
    init = *options.fixed_components;
  } else {
    init.sigma2_gamma = init.sigma2_alpha1 = init.sigma2_alpha2 = 0.1;
    init.rho = 0.0;
    init.scale = 1.0;
  }
  if (spec.rater_effect == RaterEffect::omitted) init.sigma2_alpha1 = init.sigma2_alpha2 = 0.0;
  if (!design.estimate_rho) init.rho = 0.0;
  if (!design.estimate_scale) init.scale = 1.0;
  Eigen::VectorXd params = clamp_params(design, to_unconstrained(design, init, floor), floor);
  VarianceComponents vc = from_unconstrained(design, params, floor);
  Eigen::VectorXd psi = pack(design, beta, vc);

  WorkingData wd;
  MmeSolution sol;
  Eigen::MatrixXd inverse_hessian;  // carried between outer iterations
  constexpr double kMinStep = 1.0 / 16.0;
  double step = 1.0;
  double previous_change = std::numeric_limits<double>::infinity();
  for (int outer = 1; outer <= options.max_outer; ++outer) {
    wd = linearize(design, linear_predictor(design, beta, u));
    wd.ridge = ridge;

    if (!options.fixed_components) {
      const opt::Objective f = [&](const Eigen::VectorXd& x) {
        return reml_objective(x, wd, floor);
      };
      opt::QuasiNewtonOptions qn;
      qn.gradient_tolerance = 1e-4;
      qn.difference_step = 1e-4;
      qn.initial_inverse_hessian = inverse_hessian;
      opt::Result best;
      if (outer == 1) {
        opt::NelderMeadOptions nm;
        nm.max_evaluations = options.max_inner_evaluations;
        nm.initial_step = 0.5;
        nm.point_tolerance = 1e-4;
        best = opt::nelder_mead(f, params, nm);
        res.n_inner_evaluations += best.evaluations;
      } else {
        best.x = params;
        best.value = f(params);
        res.n_inner_evaluations += 1;
      }
      opt::Result polished = opt::bfgs(f, best.x, qn);
      res.n_inner_evaluations += polished.evaluations;
      if (!polished.converged && qn.initial_inverse_hessian.size() > 0) {
        // A stale curvature estimate can stall the line search; retry cold.
        qn.initial_inverse_hessian.resize(0, 0);
        const opt::Result cold = opt::bfgs(f, polished.x, qn);
        res.n_inner_evaluations += cold.evaluations;
        if (cold.value <= polished.value) polished = cold;
      }
      inverse_hessian = polished.inverse_hessian;
      if (!std::isfinite(polished.value) || polished.value > best.value) {
        // Quasi-Newton made things worse; fall back to a fresh simplex.
        opt::NelderMeadOptions nm;
        nm.max_evaluations = options.max_inner_evaluations;
        nm.initial_step = 0.1;
        nm.point_tolerance = 1e-6;
        polished = opt::nelder_mead(f, best.x, nm);
        res.n_inner_evaluations += polished.evaluations;
        if (polished.value > best.value) polished = best;
        inverse_hessian.resize(0, 0);
      }
      if (!std::isfinite(polished.value))
        throw NumericalError("inner REML optimization failed: objective is not finite");
      params = clamp_params(design, polished.x, floor);
      vc = from_unconstrained(design, params, floor);
    }

    sol = solve_mme(wd, vc, floor);
    const Eigen::VectorXd psi_new = pack(design, sol.beta, vc);
    const double change = max_relative_change(psi, psi_new);
    res.final_change = change;
    res.n_outer_iterations = outer;
    psi = psi_new;
    if (!sol.beta.allFinite() || !sol.u.allFinite())
      throw NumericalError("pseudo-likelihood iteration produced non-finite estimates");
    if (change < options.tolerance) {
      beta = sol.beta;
      u = sol.u;
      res.converged = true;
      break;
    }
    // A growing change signals a limit cycle; shorten the step towards the
    // new expansion point. Fixed points are unaffected.
    if (outer > 8 && change > previous_change)
      step = std::max(step * 0.5, kMinStep);
    else if (change < 0.5 * previous_change)
      step = std::min(step * 2.0, 1.0);
    previous_change = change;
    beta += step * (sol.beta - beta);
    u += step * (sol.u - u);
  }
  // Report the last mixed-model solution, not a damped expansion point.
  beta = sol.beta;
  u = sol.u;
  if (!res.converged)
    res.warnings.push_back("pseudo-likelihood did not converge after " +
                           std::to_string(res.n_outer_iterations) +
                           " outer iterations (last relative change " +
                           std::to_string(res.final_change) + ")");

  res.reml_objective = reml_objective(params, wd, floor);
  if (!options.fixed_components)
    variance_standard_errors(wd, params, options, vc, res.warnings, res.n_inner_evaluations);
  res.vc = vc;

  res.fixed.beta_1 = beta[0];
  res.fixed.beta_2 = beta[1];
  if (spec.time_trend == TimeTrend::linear) res.fixed.theta = beta[2];
  res.fixed.cov = sol.cov_beta;

  const int n_subjects = ds.n_subjects(), n_raters = ds.n_raters();
  res.eblup_gamma = u.head(n_subjects);
  res.eblup_alpha = Eigen::MatrixXd::Zero(n_raters, 2);
  if (spec.rater_effect == RaterEffect::included)
    for (int m = 0; m < 2; ++m)
      for (int j = 0; j < n_raters; ++j)
        res.eblup_alpha(j, m) = u[n_subjects + m * n_raters + j];
  return res;
}

WaldTest wald_test(const FitResult& fit, double level) {
  if (!(level > 0.0 && level < 1.0)) throw DataError("confidence level must lie in (0, 1)");
  const Eigen::MatrixXd& cov = fit.fixed.cov;
  if (cov.rows() < 2) throw DataError("fit has no fixed-effect covariance");
  const double var = cov(0, 0) + cov(1, 1) - 2.0 * cov(0, 1);
  WaldTest t;
  t.level = level;
  t.estimate = fit.fixed.beta_1 - fit.fixed.beta_2;
  if (!(var > 0.0) || !std::isfinite(var))
    throw NumericalError("degenerate fit: standard error of beta_1 - beta_2 is zero");
  t.std_error = std::sqrt(var);
  t.statistic = t.estimate / t.std_error;
  t.p_value = std::min(1.0, 2.0 * norm_sf(std::abs(t.statistic)));
  const double z = norm_quantile(1.0 - (1.0 - level) / 2.0);
  t.ci_low = t.estimate - z * t.std_error;
  t.ci_high = t.estimate + z * t.std_error;
  return t;
}

}  // namespace binagree
