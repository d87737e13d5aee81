#pragma once

// Gaussian-process outcome models for binary exposures (naive, IPW, and
// spline-of-propensity kernels) and the semiparametric direct estimator for a
// continuous exposure.

#include "dogma/core/linalg.hpp"
#include "dogma/estimators/dataset.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <span>
#include <string_view>

namespace dogma::gp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class KernelVariant { naive, ipw, sop, sop_gp };
KernelVariant parse_kernel_variant(std::string_view tag);
std::string_view to_string(KernelVariant v);

struct KernelSpec {
  KernelVariant variant = KernelVariant::naive;
  double amplitude = 1.0;      // lambda
  double inv_bandwidth = 1.0;  // b
  int knots = 10;
  static constexpr double linear_scale = 100.0;

  bool has_gaussian() const { return variant != KernelVariant::sop; }
  bool uses_propensity() const { return variant != KernelVariant::naive; }
  bool uses_spline() const { return variant == KernelVariant::sop || variant == KernelVariant::sop_gp; }
  void validate() const;
};

/// Natural cubic spline basis with knots at equally spaced empirical quantiles
/// (including min and max). The first two functions are 1 and t.
class SplineBasis {
 public:
  static SplineBasis fit(std::span<const double> values, int knots = 10);

  int size() const { return static_cast<int>(knots_.size()); }
  const VectorXd& knots() const { return knots_; }
  VectorXd operator()(double t) const;
  /// One row per value.
  MatrixXd evaluate(const VectorXd& t) const;

 private:
  explicit SplineBasis(VectorXd knots) : knots_(std::move(knots)) {}
  VectorXd knots_;
};

/// A single input (a, x, phi(x)).
struct GpPoint {
  double a = 0.0;
  VectorXd x;
  double phi = 0.5;
};

/// A batch of inputs, one per row of X.
struct GpInputs {
  VectorXd a;
  MatrixXd X;
  VectorXd phi;

  Index size() const { return X.rows(); }
};

double kernel_eval(const KernelSpec& spec, const GpPoint& u, const GpPoint& v, const SplineBasis* basis = nullptr);

/// Cross-covariance matrix between two batches.
MatrixXd gram(const KernelSpec& spec, const GpInputs& u, const GpInputs& v, const SplineBasis* basis = nullptr);

using PropensityFn = std::function<double(const Eigen::Ref<const VectorXd>&)>;

struct GpFit {
  KernelSpec spec;
  double noise_sd = 1.0;
  GpInputs train;
  std::optional<SplineBasis> basis;
  PropensityFn propensity;
  JitteredCholesky chol;
  VectorXd alpha;  // (K + noise^2 I)^{-1} y
  double log_likelihood = 0.0;
  Index clipped = 0;  // propensities moved into [0.01, 0.99] (ipw)
  int evaluations = 0;
};

/// Training inputs (A, X, phi(X)) of a dataset; phi is 0.5 when the oracle is absent.
GpInputs training_inputs(const Dataset& data);

double gp_marginal_loglik(const KernelSpec& spec, const Dataset& data, double noise_sd);

/// Fit at fixed hyperparameters.
GpFit fit_gp(const KernelSpec& spec, const Dataset& data, double noise_sd);

struct EbOptions {
  double grid_lo = 1e-2;
  double grid_hi = 1e2;
  int grid_points = 5;
  double ftol = 1e-6;
  int max_evals = 400;
};

/// Empirical Bayes over (log lambda, log b, log noise_sd): log grid, then simplex refinement.
GpFit eb_optimize(KernelVariant variant, const Dataset& data, const EbOptions& options = {});

struct AtePosterior {
  double mean = 0.0;
  double sd = 0.0;
};

/// Posterior of (1/M) sum_i [beta(1, x_i) - beta(0, x_i)] over the rows of X_eval.
AtePosterior ate_posterior(const GpFit& fit, const MatrixXd& X_eval);

EstimatorResult fit_gp_method(const Dataset& data, KernelVariant variant, double level = 0.95,
                              const EbOptions& options = {});

// Semiparametric models for a continuous exposure.

/// exp{-||x - x'||^2} over rows.
MatrixXd squared_exponential_gram(const MatrixXd& X1, const MatrixXd& X2);

struct SemiparConfig {
  double kernel_scale = 2.0;      // prior covariance kernel_scale * exp{-||x - x'||^2} for r_y
  double coef_prior_var = 100.0;  // Normal(0, 10^2) on gamma (and omega)
  double noise_var = 1.0;
  double level = 0.95;
  EbOptions pilot;
};

/// Posterior of theta under y = Z theta + f + e, f ~ N(0, K), e ~ N(0, noise_var I), theta ~ N(0, prior_var I).
struct ParametricPosterior {
  VectorXd mean;
  MatrixXd covariance;
};
ParametricPosterior gp_parametric_posterior(const MatrixXd& Z, const VectorXd& y, const MatrixXd& K, double noise_var,
                                            double prior_var);

struct PilotFit {
  VectorXd fitted;     // posterior mean of r_a at the training rows
  VectorXd loo;        // leave-one-out predictive mean of A
  double amplitude = 1.0;
  double inv_bandwidth = 1.0;
  double noise_sd = 1.0;
  double log_likelihood = 0.0;
};

/// GP regression of A on X with kernel lambda exp{-b ||x - x'||^2} and EB hyperparameters.
PilotFit pilot_exposure_fit(const Dataset& data, const EbOptions& options = {});

EstimatorResult fit_semipar_naive(const Dataset& data, const SemiparConfig& config = {});
EstimatorResult fit_semipar_direct(const Dataset& data, const SemiparConfig& config = {});

}  // namespace dogma::gp
