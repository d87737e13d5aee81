#pragma once

#include <Eigen/Dense>

#include <functional>

namespace dogma {

struct SimplexResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Nelder-Mead maximization of f from x0 with initial edge length `step`.
/// Stops when the spread of simplex values drops below ftol or after max_evals.
/// Non-finite values of f are treated as -inf.
SimplexResult nelder_mead_maximize(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                                   double step = 0.5, double ftol = 1e-6, int max_evals = 400);

}  // namespace dogma
