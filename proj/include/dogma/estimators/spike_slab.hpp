#pragma once

// Spike-and-slab regression by single-site Gibbs sampling, and the two-stage
// naive / shared / direct fits of the exposure coefficient.

#include "dogma/estimators/dataset.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <optional>
#include <string_view>

namespace dogma {

/// theta_j ~ (1 - p_j) delta_0 + p_j Normal(0, v_j); v_j = inf is a flat prior.
struct SpikeSlabConfig {
  Eigen::VectorXd inclusion;  // p_j in [0, 1]
  Eigen::VectorXd slab_var;   // v_j > 0, possibly infinite
  double noise_var = 1.0;     // fixed value, or starting value when update_noise
  bool update_noise = false;
  double noise_shape = 1.0;   // inverse-gamma prior on the noise variance
  double noise_scale = 1.0;
  int iterations = 2000;
  int burn_in = 500;
  std::optional<Eigen::VectorXd> initial;  // starting coefficients; zero otherwise

  /// Common inclusion p and slab variance tau2 for all q coefficients.
  static SpikeSlabConfig uniform(Eigen::Index q, double p, double tau2);
  static constexpr double flat = std::numeric_limits<double>::infinity();

  void validate(Eigen::Index q) const;
};

/// Post-burn-in draws, one row per retained iteration.
struct PosteriorDraws {
  Eigen::MatrixXd coefficients;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> inclusion;
  Eigen::VectorXd noise_var;

  Eigen::Index size() const { return coefficients.rows(); }
  Eigen::VectorXd inclusion_probabilities() const;
  Eigen::VectorXd posterior_mean() const;
};

PosteriorDraws spike_slab_gibbs(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                const SpikeSlabConfig& config, std::uint64_t seed);

enum class SasVariant { naive, shared, direct };
SasVariant parse_sas_variant(std::string_view tag);
std::string_view to_string(SasVariant v);

struct SasConfig {
  double p_beta = 5.0 / 200.0;
  double p_phi = 5.0 / 200.0;
  double tau2_beta = 1.0;
  double tau2_phi = 1.0;
  double noise_var = 1.0;
  bool update_noise = false;
  int iterations = 2000;
  int burn_in = 500;
  double level = 0.95;
};

/// Stage-1 fit of A on X: inclusion probabilities and posterior mean of phi.
struct SelectionStage {
  Eigen::VectorXd inclusion;
  Eigen::VectorXd phi_hat;
};

SelectionStage sas_selection_stage(const Dataset& data, const SasConfig& config, std::uint64_t seed);

/// Outcome-model inclusion for the shared prior: 1 where stage-1 inclusion >= 0.5, p_beta otherwise.
Eigen::VectorXd shared_outcome_inclusion(const Eigen::VectorXd& stage1_inclusion, double p_beta);

EstimatorResult fit_sas(const Dataset& data, SasVariant variant, const SasConfig& config, std::uint64_t seed);
/// Same, reusing a stage-1 fit (ignored by the naive variant).
EstimatorResult fit_sas(const Dataset& data, SasVariant variant, const SasConfig& config, const SelectionStage& stage,
                        std::uint64_t seed);

}  // namespace dogma
