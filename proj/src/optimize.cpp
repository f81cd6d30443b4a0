#include "binagree/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace binagree::opt {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double guarded(const Objective& f, const Eigen::VectorXd& x, int& count) {
  ++count;
  const double v = f(x);
  return std::isfinite(v) ? v : kInf;
}

}  // namespace

Result nelder_mead(const Objective& f, const Eigen::VectorXd& start,
                   const NelderMeadOptions& options) {
  const Eigen::Index n = start.size();
  int evals = 0;
  std::vector<Eigen::VectorXd> simplex(n + 1, start);
  std::vector<double> values(n + 1);
  values[0] = guarded(f, start, evals);
  for (Eigen::Index i = 0; i < n; ++i) {
    simplex[i + 1][i] += options.initial_step;
    values[i + 1] = guarded(f, simplex[i + 1], evals);
  }

  std::vector<int> order(n + 1);
  bool converged = false;
  while (evals < options.max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return values[a] < values[b]; });
    const int best = order.front(), worst = order.back(), second = order[n - 1];

    double diameter = 0.0;
    for (Eigen::Index i = 0; i <= n; ++i)
      diameter = std::max(diameter, (simplex[i] - simplex[best]).cwiseAbs().maxCoeff());
    const double spread = values[worst] - values[best];
    if (std::isfinite(spread) && spread <= options.value_tolerance * (1.0 + std::abs(values[best])) &&
        diameter <= options.point_tolerance) {
      converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i <= n; ++i)
      if (i != worst) centroid += simplex[i];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd reflected = centroid + (centroid - simplex[worst]);
    const double f_reflected = guarded(f, reflected, evals);
    if (f_reflected < values[best]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double f_expanded = guarded(f, expanded, evals);
      if (f_expanded < f_reflected) {
        simplex[worst] = expanded;
        values[worst] = f_expanded;
      } else {
        simplex[worst] = reflected;
        values[worst] = f_reflected;
      }
      continue;
    }
    if (f_reflected < values[second]) {
      simplex[worst] = reflected;
      values[worst] = f_reflected;
      continue;
    }
    const bool outside = f_reflected < values[worst];
    const Eigen::VectorXd contracted =
        outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                : Eigen::VectorXd(centroid + 0.5 * (simplex[worst] - centroid));
    const double f_contracted = guarded(f, contracted, evals);
    if (f_contracted < (outside ? f_reflected : values[worst])) {
      simplex[worst] = contracted;
      values[worst] = f_contracted;
      continue;
    }
    for (Eigen::Index i = 0; i <= n; ++i) {
      if (i == best) continue;
      simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
      values[i] = guarded(f, simplex[i], evals);
    }
  }

  const auto best_it = std::min_element(values.begin(), values.end());
  Result res;
  res.x = simplex[best_it - values.begin()];
  res.value = *best_it;
  res.evaluations = evals;
  res.converged = converged;
  return res;
}

Eigen::VectorXd central_gradient(const Objective& f, const Eigen::VectorXd& x, double step,
                                 int* evaluations) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(x[i]));
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  if (evaluations) *evaluations += static_cast<int>(2 * x.size());
  return g;
}

Eigen::MatrixXd central_hessian(const Objective& f, const Eigen::VectorXd& x, double step,
                                int* evaluations) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd H(n, n);
  const double f0 = f(x);
  int count = 1;
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    probe[i] = x[i] + step;
    const double up = f(probe);
    probe[i] = x[i] - step;
    const double down = f(probe);
    probe[i] = x[i];
    count += 2;
    H(i, i) = (up - 2.0 * f0 + down) / (step * step);
    for (Eigen::Index j = 0; j < i; ++j) {
      double corner[4];
      int k = 0;
      for (double si : {1.0, -1.0})
        for (double sj : {1.0, -1.0}) {
          probe[i] = x[i] + si * step;
          probe[j] = x[j] + sj * step;
          corner[k++] = f(probe);
        }
      probe[i] = x[i];
      probe[j] = x[j];
      count += 4;
      H(i, j) = H(j, i) = (corner[0] - corner[1] - corner[2] + corner[3]) / (4.0 * step * step);
    }
  }
  if (evaluations) *evaluations += count;
  return H;
}

Result bfgs(const Objective& f, const Eigen::VectorXd& start, const QuasiNewtonOptions& options) {
  const Eigen::Index n = start.size();
  int evals = 0;
  Eigen::VectorXd x = start;
  double fx = guarded(f, x, evals);
  Result res;
  res.x = x;
  res.value = fx;
  if (!std::isfinite(fx)) {
    res.evaluations = evals;
    return res;
  }
  Eigen::VectorXd g = central_gradient(f, x, options.difference_step, &evals);
  const bool warm = options.initial_inverse_hessian.rows() == n &&
                    options.initial_inverse_hessian.allFinite();
  Eigen::MatrixXd Hinv = warm ? options.initial_inverse_hessian : Eigen::MatrixXd::Identity(n, n);
  bool converged = g.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance;

  for (int iter = 0; iter < options.max_iterations && !converged; ++iter) {
    if (evals >= options.max_evaluations || !g.allFinite()) break;
    Eigen::VectorXd dir = -Hinv * g;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      Hinv.setIdentity();
      dir = -g;
      slope = -g.squaredNorm();
    }
    // Cap the step so one bad curvature estimate cannot throw us far away.
    const double max_step = 2.0;
    if (const double len = dir.lpNorm<Eigen::Infinity>(); len > max_step) {
      dir *= max_step / len;
      slope = g.dot(dir);
    }
    double t = 1.0;
    Eigen::VectorXd x_new;
    double f_new = kInf;
    bool accepted = false;
    for (int ls = 0; ls < 30 && evals < options.max_evaluations; ++ls) {
      x_new = x + t * dir;
      f_new = guarded(f, x_new, evals);
      if (f_new <= fx + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;

    const Eigen::VectorXd g_new = central_gradient(f, x_new, options.difference_step, &evals);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      if (iter == 0 && !warm) Hinv *= sy / y.squaredNorm();
      Hinv = (I - rho * s * y.transpose()) * Hinv * (I - rho * y * s.transpose()) +
             rho * s * s.transpose();
    }
    const double decrease = fx - f_new;
    x = x_new;
    fx = f_new;
    g = g_new;
    converged = g.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance ||
                (decrease >= 0.0 && decrease <= 1e-14 * (1.0 + std::abs(fx)) &&
                 s.lpNorm<Eigen::Infinity>() <= 1e-10);
  }
  res.x = x;
  res.value = fx;
  res.evaluations = evals;
  res.converged = converged;
  res.inverse_hessian = Hinv;
  return res;
}

}  // namespace binagree::opt
