#pragma once

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <string>

namespace dogma {

/// Covariates X (N x P), exposure A and outcome Y, with an optional known propensity.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd A;
  Eigen::VectorXd Y;
  std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)> propensity_oracle;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
  bool has_propensity() const { return static_cast<bool>(propensity_oracle); }

  /// Row counts agree and every entry is finite; throws ArgumentError otherwise.
  void validate() const;
};

/// Posterior summary of the coefficient of interest.
struct EstimatorResult {
  std::string method;
  double estimate = 0.0;
  double posterior_sd = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.95;
  std::map<std::string, double> diagnostics;
};

}  // namespace dogma
