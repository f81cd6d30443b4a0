#pragma once

// Independent reference implementations shared by the unit and acceptance
// suites. None of these call into the library's numerical code paths.

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "binagree/data.hpp"
#include "binagree/glmm.hpp"

namespace testsupport {

inline double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
inline double phi_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

/// Dense -2 restricted log-likelihood, log|V| + log|X'V^-1X| + r'V^-1r,
/// built from explicit Z, G and R matrices.
inline double dense_reml(const binagree::DesignBundle& d, const Eigen::VectorXd& response,
                         const Eigen::VectorXd& weights, const binagree::VarianceComponents& vc) {
  const int n = d.n_records(), q = d.n_diag + d.n_dense;
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n, q);
  for (int r = 0; r < n; ++r) {
    if (d.diag_col[r] >= 0) Z(r, d.diag_col[r]) = 1.0;
    if (d.dense_col[r] >= 0) Z(r, d.n_diag + d.dense_col[r]) = 1.0;
  }
  const double v[3] = {vc.sigma2_gamma, vc.sigma2_alpha1, vc.sigma2_alpha2};
  Eigen::VectorXd g(q);
  for (int c = 0; c < d.n_diag; ++c) g[c] = v[d.diag_term[c]];
  for (int c = 0; c < d.n_dense; ++c) g[d.n_diag + c] = v[d.dense_term[c]];
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
  for (const auto& b : d.blocks) {
    const auto& t = d.time_patterns[b.pattern];
    for (int i = 0; i < b.size; ++i)
      for (int j = 0; j < b.size; ++j) {
        const double c = std::pow(vc.rho, std::abs(t[i] - t[j]));
        R(b.start + i, b.start + j) =
            vc.scale * c / std::sqrt(weights[b.start + i] * weights[b.start + j]);
      }
  }
  const Eigen::MatrixXd V = R + Z * g.asDiagonal() * Z.transpose();
  const Eigen::LLT<Eigen::MatrixXd> llt(V);
  const Eigen::MatrixXd Vi = llt.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd XVX = d.X.transpose() * Vi * d.X;
  const Eigen::VectorXd beta = XVX.ldlt().solve(d.X.transpose() * Vi * response);
  const Eigen::VectorXd r = response - d.X * beta;
  const double log_det_V = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  return log_det_V + std::log(XVX.determinant()) + r.dot(Vi * r);
}

/// Plain probit regression by Newton-Raphson on the observed information.
inline Eigen::VectorXd newton_probit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(X.cols());
  for (int iter = 0; iter < 100; ++iter) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(X.cols());
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(X.cols(), X.cols());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double e = X.row(i).dot(beta);
      // d/de log Phi(+-e) and its derivative
      const double s = y[i] > 0.5 ? 1.0 : -1.0;
      const double lam = phi_pdf(e) / phi_cdf(s * e) * s;
      const double dl = -lam * (e + lam);
      grad += lam * X.row(i).transpose();
      hess += dl * X.row(i).transpose() * X.row(i);
    }
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    beta -= step;
    if (step.lpNorm<Eigen::Infinity>() < 1e-13) break;
  }
  return beta;
}

/// Paired rows with explicit values: {id, time, y1, y2, rater1, rater2}.
inline binagree::PairedRecord row(std::string id, double t, int y1, int y2, std::string r1,
                                  std::string r2) {
  return {std::move(id), t, y1, y2, std::move(r1), std::move(r2)};
}

}  // namespace testsupport
