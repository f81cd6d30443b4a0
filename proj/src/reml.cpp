#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "binagree/errors.hpp"
#include "binagree/glmm.hpp"

namespace binagree {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Whitened cross-products of [X | P | Z] under R^-1. Depends on rho and the
// working data only, not on the random-effect variances.
struct CrossProducts {
  Eigen::MatrixXd XtX;
  Eigen::VectorXd Xty;
  double yty = 0.0;
  Eigen::VectorXd Ad;   // diagonal of Z_d' R^-1 Z_d
  Eigen::MatrixXd Bd;   // Z_d' R^-1 X
  Eigen::VectorXd cd;   // Z_d' R^-1 P
  Eigen::MatrixXd Adr;  // Z_d' R^-1 Z_r
  // Nonzeros of each row of Adr; a subject only meets a few raters.
  std::vector<std::vector<std::pair<int, double>>> adr_rows;
  Eigen::MatrixXd Arr;  // Z_r' R^-1 Z_r
  Eigen::MatrixXd Br;   // Z_r' R^-1 X
  Eigen::VectorXd cr;   // Z_r' R^-1 P
  double log_det_R = 0.0;
};

bool accumulate(const WorkingData& w, double rho, CrossProducts& cp) {
  const DesignBundle& d = *w.design;
  const int p = d.n_fixed();
  cp.XtX = Eigen::MatrixXd::Zero(p, p);
  cp.Xty = Eigen::VectorXd::Zero(p);
  cp.yty = 0.0;
  cp.Ad = Eigen::VectorXd::Zero(d.n_diag);
  cp.Bd = Eigen::MatrixXd::Zero(d.n_diag, p);
  cp.cd = Eigen::VectorXd::Zero(d.n_diag);
  cp.Adr = Eigen::MatrixXd::Zero(d.n_diag, d.n_dense);
  cp.Arr = Eigen::MatrixXd::Zero(d.n_dense, d.n_dense);
  cp.Br = Eigen::MatrixXd::Zero(d.n_dense, p);
  cp.cr = Eigen::VectorXd::Zero(d.n_dense);
  cp.log_det_R = 0.0;

  const bool correlated = d.estimate_rho && rho != 0.0;
  std::vector<Eigen::MatrixXd> chol;
  std::vector<double> chol_log_det;
  if (correlated) {
    chol.reserve(d.time_patterns.size());
    for (const auto& times : d.time_patterns) {
      Eigen::LLT<Eigen::MatrixXd> llt(ar1_matrix(times, rho));
      if (llt.info() != Eigen::Success) return false;
      chol.push_back(llt.matrixL());
      chol_log_det.push_back(2.0 * chol.back().diagonal().array().log().sum());
      if (!std::isfinite(chol_log_det.back())) return false;
    }
  }

  std::vector<double> buf;
  std::vector<int> local_cols, rec_local;
  for (const ResidualBlock& blk : d.blocks) {
    const int n = blk.size, s = blk.start;
    const int dcol = d.diag_col[s];
    local_cols.clear();
    rec_local.assign(n, -1);
    for (int r = 0; r < n; ++r) {
      if (d.diag_col[s + r] != dcol)
        throw std::logic_error("R-side block spans more than one diagonal random-effect column");
      const int c = d.dense_col[s + r];
      if (c < 0) continue;
      int l = 0;
      while (l < static_cast<int>(local_cols.size()) && local_cols[l] != c) ++l;
      if (l == static_cast<int>(local_cols.size())) local_cols.push_back(c);
      rec_local[r] = l;
    }
    const int k = static_cast<int>(local_cols.size());
    const int ncol = p + 2 + k;
    buf.assign(static_cast<std::size_t>(n) * ncol, 0.0);
    auto at = [&](int row, int col) -> double& { return buf[static_cast<std::size_t>(col) * n + row]; };

    for (int r = 0; r < n; ++r) {
      const double wr = w.weights[s + r];
      if (!(wr > 0.0) || !std::isfinite(wr)) return false;
      const double sw = std::sqrt(wr);
      for (int c = 0; c < p; ++c) at(r, c) = sw * d.X(s + r, c);
      at(r, p) = sw * w.response[s + r];
      at(r, p + 1) = dcol >= 0 ? sw : 0.0;
      if (rec_local[r] >= 0) at(r, p + 2 + rec_local[r]) = sw;
      cp.log_det_R -= std::log(wr);
    }
    if (correlated) {
      const Eigen::MatrixXd& L = chol[blk.pattern];
      cp.log_det_R += chol_log_det[blk.pattern];
      for (int c = 0; c < ncol; ++c)
        for (int r = 0; r < n; ++r) {
          double v = at(r, c);
          for (int q = 0; q < r; ++q) v -= L(r, q) * at(q, c);
          at(r, c) = v / L(r, r);
        }
    }

    auto dot = [&](int a, int b) {
      const double* x = &buf[static_cast<std::size_t>(a) * n];
      const double* y = &buf[static_cast<std::size_t>(b) * n];
      double acc = 0.0;
      for (int r = 0; r < n; ++r) acc += x[r] * y[r];
      return acc;
    };

    for (int a = 0; a < p; ++a) {
      for (int b = 0; b <= a; ++b) {
        const double v = dot(a, b);
        cp.XtX(a, b) += v;
        if (a != b) cp.XtX(b, a) += v;
      }
      cp.Xty[a] += dot(a, p);
    }
    cp.yty += dot(p, p);
    if (dcol >= 0) {
      const int z = p + 1;
      cp.Ad[dcol] += dot(z, z);
      for (int a = 0; a < p; ++a) cp.Bd(dcol, a) += dot(z, a);
      cp.cd[dcol] += dot(z, p);
      for (int l = 0; l < k; ++l) cp.Adr(dcol, local_cols[l]) += dot(z, p + 2 + l);
    }
    for (int l = 0; l < k; ++l) {
      const int gl = local_cols[l];
      for (int a = 0; a < p; ++a) cp.Br(gl, a) += dot(p + 2 + l, a);
      cp.cr[gl] += dot(p + 2 + l, p);
      for (int l2 = 0; l2 <= l; ++l2) {
        const int gl2 = local_cols[l2];
        const double v = dot(p + 2 + l, p + 2 + l2);
        cp.Arr(gl, gl2) += v;
        if (l2 != l) cp.Arr(gl2, gl) += v;
      }
    }
  }
  cp.adr_rows.assign(d.n_diag, {});
  for (int i = 0; i < d.n_diag; ++i)
    for (int c = 0; c < d.n_dense; ++c)
      if (cp.Adr(i, c) != 0.0) cp.adr_rows[i].emplace_back(c, cp.Adr(i, c));
  return std::isfinite(cp.log_det_R);
}

}  // namespace

struct CrossProductCache {
  struct Entry {
    bool valid = false;
    bool ok = false;
    double rho = 0.0;
    Eigen::VectorXd response, weights;
    CrossProducts cp;
  };
  std::array<Entry, 4> entries;
  std::size_t next = 0;
};

namespace {

// Returns cross-products for rho, reusing a cached copy when the working data
// is unchanged. Null when R is not positive definite.
const CrossProducts* cross_products(const WorkingData& w, double rho) {
  if (!w.cache) w.cache = std::make_shared<CrossProductCache>();
  CrossProductCache& cache = *w.cache;
  for (const auto& e : cache.entries)
    if (e.valid && e.rho == rho && e.response.size() == w.response.size() &&
        e.response == w.response && e.weights == w.weights)
      return e.ok ? &e.cp : nullptr;
  auto& e = cache.entries[cache.next];
  cache.next = (cache.next + 1) % cache.entries.size();
  e.valid = false;
  e.ok = accumulate(w, rho, e.cp);
  e.rho = rho;
  e.response = w.response;
  e.weights = w.weights;
  e.valid = true;
  return e.ok ? &e.cp : nullptr;
}

struct TermScales {
  Eigen::VectorXd diag;   // sqrt of the variance for each diagonal column
  Eigen::VectorXd dense;  // same for dense columns
  Eigen::VectorXd variance_diag;
  Eigen::VectorXd variance_dense;
};

// Variances are expressed relative to the residual scale: V = phi (R + Z G/phi Z').
TermScales term_scales(const DesignBundle& d, const VarianceComponents& vc, double floor) {
  const double phi = vc.scale;
  const double variances[3] = {std::max(vc.sigma2_gamma, floor) / phi,
                               std::max(vc.sigma2_alpha1, floor) / phi,
                               std::max(vc.sigma2_alpha2, floor) / phi};
  TermScales s;
  s.variance_diag.resize(d.n_diag);
  s.variance_dense.resize(d.n_dense);
  for (int c = 0; c < d.n_diag; ++c) s.variance_diag[c] = variances[d.diag_term[c]];
  for (int c = 0; c < d.n_dense; ++c) s.variance_dense[c] = variances[d.dense_term[c]];
  s.diag = s.variance_diag.cwiseSqrt();
  s.dense = s.variance_dense.cwiseSqrt();
  return s;
}

struct Evaluation {
  bool ok = false;
  double objective = kInf;
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov_beta;
  Eigen::VectorXd u;
};

// Woodbury evaluation with Lambda = G^{1/2} and M = Lambda Z'R^-1 Z Lambda + I:
//   log|V|       = log|R| + log|M|
//   X'V^-1 X     = X'R^-1 X - (Lambda B)' M^-1 (Lambda B)
//   u            = Lambda M^-1 Lambda (c - B beta)
// The diagonal block of M is eliminated first through a Schur complement.
Evaluation evaluate(const WorkingData& w, const CrossProducts& cp, const TermScales& scale,
                    double phi, bool want_solution) {
  const DesignBundle& d = *w.design;
  const int p = d.n_fixed(), nd = d.n_diag, nr = d.n_dense;
  Evaluation ev;

  const Eigen::VectorXd Md = (scale.variance_diag.array() * cp.Ad.array() + 1.0).matrix();
  const Eigen::VectorXd Md_inv = Md.cwiseInverse();
  double log_det_M = Md.array().log().sum();

  Eigen::MatrixXd Wd(nd, p + 1), Wr(nr, p + 1);
  Wd.leftCols(p) = scale.diag.asDiagonal() * cp.Bd;
  Wd.col(p) = scale.diag.cwiseProduct(cp.cd);
  Wr.leftCols(p) = scale.dense.asDiagonal() * cp.Br;
  Wr.col(p) = scale.dense.cwiseProduct(cp.cr);

  Eigen::MatrixXd Yd(nd, p + 1), Yr(nr, p + 1);
  if (nr > 0) {
    // S = I + D_r Arr D_r - sum_i h_i a_i a_i', a_i = row i of D_d Adr D_r and
    // h_i = 1 / Md_i. The correction is rank one per subject and sparse.
    Eigen::MatrixXd S = scale.dense.asDiagonal() * cp.Arr * scale.dense.asDiagonal();
    S.diagonal().array() += 1.0;
    Eigen::MatrixXd R = Wr;  // Wr - Mdr' Md^-1 Wd
    for (int i = 0; i < nd; ++i) {
      const auto& row = cp.adr_rows[i];
      const double si = scale.diag[i];
      const double h = Md_inv[i];
      for (const auto& [c1, v1] : row) {
        const double a1 = si * v1 * scale.dense[c1];
        R.row(c1) -= (a1 * h) * Wd.row(i);
        for (const auto& [c2, v2] : row) S(c1, c2) -= h * a1 * si * v2 * scale.dense[c2];
      }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) return ev;
    const double log_det_S = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    if (!std::isfinite(log_det_S)) return ev;
    log_det_M += log_det_S;
    Yr = llt.solve(R);
    // Yd = Md^-1 (Wd - Mdr Yr)
    Yd = Wd;
    for (int i = 0; i < nd; ++i) {
      for (const auto& [c, v] : cp.adr_rows[i])
        Yd.row(i) -= (scale.diag[i] * v * scale.dense[c]) * Yr.row(c);
      Yd.row(i) *= Md_inv[i];
    }
  } else {
    Yd = Md_inv.asDiagonal() * Wd;
  }

  const Eigen::MatrixXd G = Wd.transpose() * Yd + Wr.transpose() * Yr;
  Eigen::MatrixXd XVX = cp.XtX - G.topLeftCorner(p, p);
  XVX = 0.5 * (XVX + XVX.transpose());
  if (w.ridge > 0.0) XVX.diagonal().array() += w.ridge * phi;
  const Eigen::VectorXd XVy = cp.Xty - G.topRightCorner(p, 1);
  const double yVy = cp.yty - G(p, p);

  Eigen::LLT<Eigen::MatrixXd> llt_x(XVX);
  if (llt_x.info() != Eigen::Success) return ev;
  const double log_det_XVX = 2.0 * llt_x.matrixLLT().diagonal().array().log().sum();
  if (!std::isfinite(log_det_XVX)) return ev;
  ev.beta = llt_x.solve(XVy);
  const double quad = yVy - XVy.dot(ev.beta);
  ev.objective = cp.log_det_R + log_det_M + log_det_XVX + quad / phi;
  if (phi != 1.0) ev.objective += (d.n_records() - p) * std::log(phi);
  if (!std::isfinite(ev.objective)) {
    ev.objective = kInf;
    return ev;
  }
  ev.ok = true;
  if (want_solution) {
    ev.cov_beta = phi * llt_x.solve(Eigen::MatrixXd::Identity(p, p));
    ev.cov_beta = 0.5 * (ev.cov_beta + ev.cov_beta.transpose());
    ev.u.resize(nd + nr);
    ev.u.head(nd) = scale.diag.cwiseProduct(Yd.col(p) - Yd.leftCols(p) * ev.beta);
    if (nr > 0) ev.u.tail(nr) = scale.dense.cwiseProduct(Yr.col(p) - Yr.leftCols(p) * ev.beta);
  }
  return ev;
}

}  // namespace

double reml_objective(const Eigen::VectorXd& params, const WorkingData& working, double floor) {
  const DesignBundle& d = *working.design;
  if (params.size() != d.n_variance_params())
    throw std::invalid_argument("reml_objective: parameter vector has the wrong length");
  if (!params.allFinite()) return kInf;
  const VarianceComponents vc = from_unconstrained(d, params, floor);
  if (!(std::abs(vc.rho) < 1.0) || !(vc.scale > 0.0) || !std::isfinite(vc.scale)) return kInf;
  const CrossProducts* cp = cross_products(working, d.estimate_rho ? vc.rho : 0.0);
  if (!cp) return kInf;
  return evaluate(working, *cp, term_scales(d, vc, floor), vc.scale, false).objective;
}

MmeSolution solve_mme(const WorkingData& working, const VarianceComponents& vc, double floor) {
  const DesignBundle& d = *working.design;
  const CrossProducts* cp = cross_products(working, d.estimate_rho ? vc.rho : 0.0);
  if (!cp) throw NumericalError("residual covariance is not positive definite");
  Evaluation ev = evaluate(working, *cp, term_scales(d, vc, floor), vc.scale, true);
  if (!ev.ok) throw NumericalError("singular mixed-model system (X'V^-1 X or V)");
  return {std::move(ev.beta), std::move(ev.u), std::move(ev.cov_beta), ev.objective};
}

MmeSolution solve_henderson(const WorkingData& working, const VarianceComponents& vc,
                            double floor) {
  const DesignBundle& d = *working.design;
  CrossProducts cp;
  if (!accumulate(working, d.estimate_rho ? vc.rho : 0.0, cp))
    throw NumericalError("residual covariance is not positive definite");
  const TermScales scale = term_scales(d, vc, floor);
  const int p = d.n_fixed(), nd = d.n_diag, nr = d.n_dense, q = nd + nr;

  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(p + q, p + q);
  Eigen::VectorXd rhs(p + q);
  C.topLeftCorner(p, p) = cp.XtX;
  if (working.ridge > 0.0) C.topLeftCorner(p, p).diagonal().array() += working.ridge * vc.scale;
  C.block(p, 0, nd, p) = cp.Bd;
  C.block(p + nd, 0, nr, p) = cp.Br;
  C.topRightCorner(p, q) = C.bottomLeftCorner(q, p).transpose();
  C.block(p, p, nd, nd).diagonal() = cp.Ad + scale.variance_diag.cwiseInverse();
  C.block(p, p + nd, nd, nr) = cp.Adr;
  C.block(p + nd, p, nr, nd) = cp.Adr.transpose();
  C.block(p + nd, p + nd, nr, nr) = cp.Arr;
  C.block(p + nd, p + nd, nr, nr).diagonal() += scale.variance_dense.cwiseInverse();
  rhs << cp.Xty, cp.cd, cp.cr;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(C);
  if (ldlt.info() != Eigen::Success) throw NumericalError("singular Henderson equations");
  const Eigen::VectorXd sol = ldlt.solve(rhs);
  const Eigen::MatrixXd Cinv = ldlt.solve(Eigen::MatrixXd::Identity(p + q, p + q));
  MmeSolution out;
  out.beta = sol.head(p);
  out.u = sol.tail(q);
  out.cov_beta = vc.scale * Cinv.topLeftCorner(p, p);
  out.cov_beta = 0.5 * (out.cov_beta + out.cov_beta.transpose());
  out.objective = std::numeric_limits<double>::quiet_NaN();
  return out;
}

}  // namespace binagree
