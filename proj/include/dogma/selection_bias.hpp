#pragma once

// Selection bias Delta(a) = E[Y(a) | A = a] - E[Y(a)] for linear, sparse and
// functional (missing-data) models, and prior-concentration diagnostics.

#include "dogma/core/random.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

namespace dogma::selection_bias {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct LinearModelPair {
  VectorXd beta;
  VectorXd phi;
  double gamma = 0.0;
  double sigma2_y = 1.0;
  double sigma2_a = 1.0;

  void validate() const;
};

/// Covariance of X: explicit, isotropic sigma2_x I, or latent factor Lambda Lambda^T + sigma_x^2 I.
class CovarianceModel {
 public:
  struct Explicit {
    MatrixXd sigma;
  };
  struct Isotropic {
    Index dim = 1;
    double sigma2_x = 1.0;
  };
  struct LatentFactor {
    MatrixXd loadings;  // P x L
    double sigma_x = 0.0;
  };

  static CovarianceModel explicit_matrix(MatrixXd sigma);
  static CovarianceModel isotropic(Index dim, double sigma2_x = 1.0);
  static CovarianceModel latent_factor(MatrixXd loadings, double sigma_x);

  Index dim() const;
  MatrixXd matrix() const;
  /// u^T Sigma v without forming Sigma for the structured variants.
  double quad_form(const VectorXd& u, const VectorXd& v) const;
  /// N draws from Normal(0, Sigma), one per row.
  MatrixXd sample(Index n, Rng& rng) const;
  /// Eigenvalues of Sigma, nonincreasing.
  VectorXd eigenvalues() const;

  const auto& variant() const { return model_; }

 private:
  using Model = std::variant<Explicit, Isotropic, LatentFactor>;
  explicit CovarianceModel(Model m) : model_(std::move(m)) {}
  Model model_;
};

using RealFn = std::function<double(const Eigen::Ref<const VectorXd>&)>;
using CovariateSampler = std::function<MatrixXd(Index n, Rng& rng)>;
using KernelFn = std::function<double(const Eigen::Ref<const VectorXd>&, const Eigen::Ref<const VectorXd>&)>;

/// beta(x), phi(x) and a sampler for X; phi takes values in (0, 1].
struct FunctionalPair {
  RealFn outcome;
  RealFn propensity;
  CovariateSampler sampler;
  Index dim = 1;
};

/// Standard-normal covariates of dimension p (independent coordinates).
CovariateSampler standard_normal_sampler(Index p);

KernelFn gaussian_kernel(const MatrixXd& bandwidth);  // exp{-(x-x')^T H^{-1} (x-x') / 2}
KernelFn gaussian_kernel_isotropic(double xi);        // H = xi I
KernelFn linear_kernel();                             // x^T x'

struct RidgePrior {
  double tau2_beta = 1.0;
  double tau2_phi = 1.0;
};
struct SpikeSlabPrior {
  double p_beta = 0.1;
  double p_phi = 0.1;
  double tau2_beta = 1.0;
  double tau2_phi = 1.0;
};
struct GpPrior {
  KernelFn kernel;
  double tau2_beta = 1.0;
  RealFn propensity;     // phi(x) held fixed
  Index support_points = 500;  // covariate draws per Delta draw
};

struct PriorSpec {
  std::variant<RidgePrior, SpikeSlabPrior, GpPrior> prior;
  std::optional<double> omega;  // beta centred on omega * phi (linear variants)
  double sigma2_a = 1.0;

  void validate() const;
};

/// a phi^T Sigma beta / (sigma2_a + phi^T Sigma phi).
double delta_linear(double a, const LinearModelPair& models, const CovarianceModel& cov);

/// Eigen-coordinate form a sum l_j W_j Z_j / (sigma2_a + sum l_j Z_j^2) with W = G^T beta, Z = G^T phi.
double delta_eigen(double a, const LinearModelPair& models, const MatrixXd& sigma);

/// Sparse form under Sigma = sigma2_x I: overlap sum over the support denominator.
double delta_sparse(double a, const VectorXd& beta, const VectorXd& phi, double sigma2_x, double sigma2_a);

struct McEstimate {
  double estimate = 0.0;
  double mc_se = 0.0;
};

/// Cov{beta(X), phi(X)} / E{phi(X)} by Monte Carlo with a delta-method SE.
McEstimate delta_functional(const FunctionalPair& pair, Index n_draws, std::uint64_t seed);

/// Prior variance scale c / P of Delta(a) under independent ridge priors.
double clt_scale(double a, const RidgePrior& prior, const VectorXd& sigma_eigenvalues);

/// Delta(a) for each of n_draws draws of (beta, phi) from the prior.
std::vector<double> prior_delta_draws(const PriorSpec& prior, const CovarianceModel& cov, double a, Index n_draws,
                                      std::uint64_t seed);

/// Double-centred Gram matrix K - 1K/M - K1/M + 1K1/M^2 of x_sample's rows.
MatrixXd centered_kernel(const KernelFn& rho, const MatrixXd& x_sample);

struct GpDeltaVariance {
  double c = 0.0;
  double mc_se = 0.0;
  double mean_propensity = 0.0;
};

/// Prior variance of Delta when beta ~ GP(0, tau2_beta rho) and phi is fixed,
/// estimated by a U-statistic over sampled covariate pairs.
GpDeltaVariance gp_delta_variance(const KernelFn& rho, double tau2_beta, const FunctionalPair& pair, Index n_draws,
                                  std::uint64_t seed);

enum class BandwidthRule { scaled_covariance, isotropic };  // H = k Sigma, H = xi I

struct DecayPoint {
  Index p = 0;
  double c = 0.0;
  double mc_se = 0.0;
  double mean_propensity = 0.0;
};

struct KernelDecayCurve {
  std::vector<DecayPoint> points;
  double slope = 0.0;  // d log c / dP
  double slope_se = 0.0;
  double min_mean_propensity = 0.0;
};

struct KernelDecayOptions {
  BandwidthRule rule = BandwidthRule::isotropic;
  double scale = 1.0;  // k or xi
  Index n_draws = 2000;
};

KernelDecayCurve kernel_decay_curve(const std::function<CovarianceModel(Index)>& cov_family,
                                    const std::function<FunctionalPair(Index)>& pair_family,
                                    const std::vector<Index>& p_list, const KernelDecayOptions& options,
                                    std::uint64_t seed);

}  // namespace dogma::selection_bias
