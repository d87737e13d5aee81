#pragma once

// Conjugate Gaussian linear models with mixed flat / penalized coefficient
// blocks: naive ridge, the direct Z-prior (clever covariate X phi_hat with a
// flat coefficient) and the debiased residual-exposure variant.

#include "dogma/estimators/dataset.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace dogma {

struct GaussianPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  double noise_var = 1.0;
  std::vector<std::string> labels;

  double sd(Eigen::Index i) const;
};

/// Posterior of theta under y ~ N(Psi theta, noise_var I) and independent
/// theta_j ~ N(0, 1/penalty_j); penalty_j = 0 is a flat prior.
///   mean = (Psi^T Psi + noise_var diag(penalty))^{-1} Psi^T y
///   cov  = noise_var (Psi^T Psi + noise_var diag(penalty))^{-1}
GaussianPosterior ridge_posterior(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& penalty, double noise_var);

/// Mean and marginal variance of a single coordinate; same model as ridge_posterior
/// without forming the full covariance.
struct CoordinatePosterior {
  Eigen::VectorXd mean;
  double variance = 0.0;
};
CoordinatePosterior ridge_coordinate(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& penalty, double noise_var, Eigen::Index coordinate);

/// Naive ridge: flat gamma on A, beta ~ N(0, (N lambda)^{-1} I).
EstimatorResult fit_naive_ridge(const Dataset& data, double lambda, double noise_var = 1.0, double level = 0.95);

/// Marginal log-likelihood of A under A = X phi + nu, phi ~ N(0, tau2/P I), nu ~ N(0, noise_var).
class ExposureEvidence {
 public:
  ExposureEvidence(const Eigen::MatrixXd& X, const Eigen::VectorXd& A, double noise_var = 1.0);
  double log_likelihood(double tau2) const;
  /// X phi_hat for the ridge posterior mean at prior variance tau2/P.
  Eigen::VectorXd fitted(double tau2) const;
  /// X phi_hat for a ridge fit with penalty N lambda (prior precision N lambda).
  Eigen::VectorXd fitted_penalty(double lambda) const;
  Eigen::VectorXd coefficients(double tau2) const;

 private:
  Eigen::MatrixXd U_;
  Eigen::MatrixXd V_;
  Eigen::VectorXd s2_;   // squared singular values of X
  Eigen::VectorXd ua_;   // U^T A
  double rest_ = 0.0;    // ||A||^2 - ||U^T A||^2
  Eigen::Index n_ = 0;
  Eigen::Index p_ = 0;
  double noise_var_ = 1.0;
};

struct EbTau2Fit {
  double tau2 = 1.0;
  double log_likelihood = 0.0;
  std::vector<double> grid;       // tau2 grid (log-spaced)
  std::vector<double> grid_loglik;
};

/// Empirical-Bayes tau2: log grid on [1e-4, 1e4] then golden-section refinement.
EbTau2Fit eb_tau2_fit(const Eigen::VectorXd& A, const Eigen::MatrixXd& X, double noise_var = 1.0);
double eb_tau2(const Eigen::VectorXd& A, const Eigen::MatrixXd& X, double noise_var = 1.0);

/// How phi_hat is obtained for the clever covariate.
struct FirstStage {
  enum class Kind { empirical_bayes, fixed_penalty, oracle };
  Kind kind = Kind::empirical_bayes;
  double lambda = 1.0;                // fixed_penalty: prior precision N lambda
  std::optional<Eigen::VectorXd> phi; // oracle

  static FirstStage empirical_bayes() { return {}; }
  static FirstStage fixed_penalty(double lambda) { return {Kind::fixed_penalty, lambda, std::nullopt}; }
  static FirstStage oracle(Eigen::VectorXd phi) { return {Kind::oracle, 1.0, std::move(phi)}; }
};

struct CleverCovariate {
  Eigen::VectorXd a_hat;
  double tau2_phi = 0.0;  // NaN unless estimated
};

CleverCovariate clever_covariate(const Dataset& data, const FirstStage& stage, double noise_var = 1.0);

/// Direct Z-prior: design [A, A_hat, X], flat on (gamma, omega), beta ~ N(0, (N lambda)^{-1} I).
EstimatorResult fit_direct_zprior(const Dataset& data, double lambda, const FirstStage& stage = {},
                                  double noise_var = 1.0, double level = 0.95);
EstimatorResult fit_direct_zprior(const Dataset& data, double lambda, const CleverCovariate& cc,
                                  double noise_var = 1.0, double level = 0.95);

/// Debiased: design [A - A_hat, X], flat on the residual-exposure coefficient.
EstimatorResult fit_debiased(const Dataset& data, double lambda, const FirstStage& stage = {},
                             double noise_var = 1.0, double level = 0.95);
EstimatorResult fit_debiased(const Dataset& data, double lambda, const CleverCovariate& cc,
                             double noise_var = 1.0, double level = 0.95);

}  // namespace dogma
