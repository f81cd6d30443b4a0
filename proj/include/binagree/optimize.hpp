#pragma once

#include <Eigen/Dense>
#include <functional>

namespace binagree::opt {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct Result {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
  /// Final inverse-Hessian approximation (BFGS only).
  Eigen::MatrixXd inverse_hessian;
};

struct NelderMeadOptions {
  int max_evaluations = 200;
  double initial_step = 0.5;
  /// Stop when the spread of simplex values and the simplex diameter both fall
  /// below these.
  double value_tolerance = 1e-10;
  double point_tolerance = 1e-7;
};

/// Nelder-Mead downhill simplex (standard coefficients 1, 2, 1/2, 1/2).
/// Non-finite objective values are treated as +inf.
Result nelder_mead(const Objective& f, const Eigen::VectorXd& start,
                   const NelderMeadOptions& options = {});

struct QuasiNewtonOptions {
  int max_iterations = 50;
  int max_evaluations = 400;
  double gradient_tolerance = 1e-6;
  double difference_step = 1e-5;
  /// Warm start for the inverse Hessian; identity (rescaled after the first
  /// step) when empty.
  Eigen::MatrixXd initial_inverse_hessian;
};

/// BFGS with central-difference gradients and backtracking Armijo search.
Result bfgs(const Objective& f, const Eigen::VectorXd& start,
            const QuasiNewtonOptions& options = {});

Eigen::VectorXd central_gradient(const Objective& f, const Eigen::VectorXd& x, double step,
                                 int* evaluations = nullptr);

Eigen::MatrixXd central_hessian(const Objective& f, const Eigen::VectorXd& x, double step,
                                int* evaluations = nullptr);

}  // namespace binagree::opt
