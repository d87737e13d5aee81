#include "dogma/estimators/spike_slab.hpp"

#include "dogma/core/error.hpp"
#include "dogma/core/random.hpp"
#include "dogma/core/stats.hpp"
#include "dogma/estimators/intervals.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace dogma {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

SpikeSlabConfig SpikeSlabConfig::uniform(Index q, double p, double tau2) {
  SpikeSlabConfig c;
  c.inclusion = VectorXd::Constant(q, p);
  c.slab_var = VectorXd::Constant(q, tau2);
  return c;
}

void SpikeSlabConfig::validate(Index q) const {
  require(inclusion.size() == q && slab_var.size() == q, "SpikeSlabConfig: prior vectors must match design columns");
  require((inclusion.array() >= 0.0).all() && (inclusion.array() <= 1.0).all(),
          "SpikeSlabConfig: inclusion probabilities must lie in [0, 1]");
  require((slab_var.array() > 0.0).all(), "SpikeSlabConfig: slab variances must be positive");
  require(noise_var > 0.0, "SpikeSlabConfig: noise variance must be positive");
  require(noise_shape > 0.0 && noise_scale > 0.0, "SpikeSlabConfig: noise prior must be positive");
  require(burn_in >= 0 && iterations > burn_in, "SpikeSlabConfig: need iterations > burn_in >= 0");
  if (initial) require(initial->size() == q && initial->allFinite(), "SpikeSlabConfig: bad initial coefficients");
}

VectorXd PosteriorDraws::inclusion_probabilities() const {
  require(size() > 0, "PosteriorDraws: no draws");
  return inclusion.cast<double>().colwise().mean().transpose();
}

VectorXd PosteriorDraws::posterior_mean() const {
  require(size() > 0, "PosteriorDraws: no draws");
  return coefficients.colwise().mean().transpose();
}

PosteriorDraws spike_slab_gibbs(const MatrixXd& design, const VectorXd& y, const SpikeSlabConfig& config,
                                std::uint64_t seed) {
  const Index n = design.rows(), q = design.cols();
  require(n >= 1 && y.size() == n, "spike_slab_gibbs: response length mismatch");
  config.validate(q);
  if (!design.allFinite() || !y.allFinite()) throw NumericError("spike_slab_gibbs: non-finite data");

  Rng rng(seed);
  const VectorXd col_sq = design.colwise().squaredNorm().transpose();
  VectorXd theta = config.initial.value_or(VectorXd::Zero(q));
  std::vector<std::uint8_t> on(static_cast<std::size_t>(q));
  for (Index j = 0; j < q; ++j) {
    if (config.inclusion[j] == 0.0) theta[j] = 0.0;
    on[static_cast<std::size_t>(j)] = theta[j] != 0.0 || config.inclusion[j] == 1.0;
  }
  VectorXd resid = y - design * theta;
  double sigma2 = config.noise_var;

  const Index keep = config.iterations - config.burn_in;
  PosteriorDraws out;
  out.coefficients.resize(keep, q);
  out.inclusion.resize(keep, q);
  out.noise_var.resize(keep);

  for (int it = 0; it < config.iterations; ++it) {
    for (Index j = 0; j < q; ++j) {
      const auto col = design.col(j);
      const double d = col_sq[j];
      const double pj = config.inclusion[j];
      if (theta[j] != 0.0) resid.noalias() += theta[j] * col;
      double next = 0.0;
      bool include = false;
      if (pj > 0.0 && d > 0.0) {
        const double s = col.dot(resid);
        const double vj = config.slab_var[j];
        const double prec = d / sigma2 + (std::isinf(vj) ? 0.0 : 1.0 / vj);
        const double m = (s / sigma2) / prec;
        if (pj >= 1.0) {
          include = true;
        } else {
          const double log_bf = -0.5 * std::log(vj * prec) + 0.5 * m * m * prec;
          const double log_odds = std::log(pj) - std::log1p(-pj) + log_bf;
          if (std::isnan(log_odds)) throw NumericError("spike_slab_gibbs: non-finite odds");
          const double prob = 1.0 / (1.0 + std::exp(-log_odds));
          include = rng.uniform() < prob;
        }
        if (include) next = m + rng.normal() / std::sqrt(prec);
      } else if (pj > 0.0 && std::isinf(config.slab_var[j])) {
        throw IdentifiabilityError("spike_slab_gibbs: flat coefficient with an all-zero design column");
      } else if (pj > 0.0) {
        include = rng.uniform() < pj;
        if (include) next = rng.normal() * std::sqrt(config.slab_var[j]);
      }
      theta[j] = next;
      on[static_cast<std::size_t>(j)] = include;
      if (next != 0.0) resid.noalias() -= next * col;
    }
    if (config.update_noise) {
      const double shape = config.noise_shape + 0.5 * static_cast<double>(n);
      const double rate = config.noise_scale + 0.5 * resid.squaredNorm();
      sigma2 = 1.0 / rng.gamma(shape, 1.0 / rate);
      if (!std::isfinite(sigma2) || sigma2 <= 0.0) throw NumericError("spike_slab_gibbs: non-finite noise draw");
    }
    if (it >= config.burn_in) {
      const Index row = it - config.burn_in;
      out.coefficients.row(row) = theta.transpose();
      for (Index j = 0; j < q; ++j) out.inclusion(row, j) = on[static_cast<std::size_t>(j)];
      out.noise_var[row] = sigma2;
    }
  }
  if (!out.coefficients.allFinite()) throw NumericError("spike_slab_gibbs: non-finite draws");
  return out;
}

SasVariant parse_sas_variant(std::string_view tag) {
  if (tag == "naive") return SasVariant::naive;
  if (tag == "shared") return SasVariant::shared;
  if (tag == "direct") return SasVariant::direct;
  throw ArgumentError("unknown spike-and-slab variant: " + std::string(tag));
}

std::string_view to_string(SasVariant v) {
  switch (v) {
    case SasVariant::naive: return "naive";
    case SasVariant::shared: return "shared";
    case SasVariant::direct: return "direct";
  }
  return "naive";
}

namespace {

SpikeSlabConfig base_config(const SasConfig& c) {
  SpikeSlabConfig s;
  s.noise_var = c.noise_var;
  s.update_noise = c.update_noise;
  s.iterations = c.iterations;
  s.burn_in = c.burn_in;
  return s;
}

}  // namespace

SelectionStage sas_selection_stage(const Dataset& data, const SasConfig& config, std::uint64_t seed) {
  data.validate();
  SpikeSlabConfig s = base_config(config);
  s.inclusion = VectorXd::Constant(data.p(), config.p_phi);
  s.slab_var = VectorXd::Constant(data.p(), config.tau2_phi);
  const PosteriorDraws draws = spike_slab_gibbs(data.X, data.A, s, derive_seed(seed, {1}));
  return {draws.inclusion_probabilities(), draws.posterior_mean()};
}

VectorXd shared_outcome_inclusion(const VectorXd& stage1_inclusion, double p_beta) {
  VectorXd p(stage1_inclusion.size());
  for (Index j = 0; j < p.size(); ++j) p[j] = stage1_inclusion[j] >= 0.5 ? 1.0 : p_beta;
  return p;
}

EstimatorResult fit_sas(const Dataset& data, SasVariant variant, const SasConfig& config, const SelectionStage& stage,
                        std::uint64_t seed) {
  data.validate();
  const Index n = data.n(), p = data.p();
  if (variant != SasVariant::naive)
    require(stage.inclusion.size() == p && stage.phi_hat.size() == p, "fit_sas: stage-1 fit has wrong length");

  const Index extra = variant == SasVariant::direct ? 2 : 1;
  MatrixXd design(n, p + extra);
  design.col(0) = data.A;
  if (variant == SasVariant::direct) design.col(1) = data.X * stage.phi_hat;
  design.rightCols(p) = data.X;

  SpikeSlabConfig s = base_config(config);
  s.inclusion.resize(p + extra);
  s.slab_var.resize(p + extra);
  s.inclusion.head(extra).setOnes();
  s.slab_var.head(extra).setConstant(SpikeSlabConfig::flat);
  s.slab_var.tail(p).setConstant(config.tau2_beta);
  if (variant == SasVariant::shared)
    s.inclusion.tail(p) = shared_outcome_inclusion(stage.inclusion, config.p_beta);
  else
    s.inclusion.tail(p).setConstant(config.p_beta);

  const PosteriorDraws draws = spike_slab_gibbs(design, data.Y, s, derive_seed(seed, {2}));
  const VectorXd g = draws.coefficients.col(0);
  EstimatorResult r;
  r.method = std::string(to_string(variant));
  r.estimate = g.mean();
  r.posterior_sd = sample_sd(as_span(g));
  std::tie(r.lo, r.hi) = credible_interval(as_span(g), config.level);
  r.level = config.level;
  if (variant == SasVariant::direct) r.diagnostics["omega_hat"] = draws.coefficients.col(1).mean();
  if (variant == SasVariant::shared) r.diagnostics["forced_in"] = (s.inclusion.tail(p).array() == 1.0).count();
  return r;
}

EstimatorResult fit_sas(const Dataset& data, SasVariant variant, const SasConfig& config, std::uint64_t seed) {
  if (variant == SasVariant::naive) return fit_sas(data, variant, config, SelectionStage{}, seed);
  return fit_sas(data, variant, config, sas_selection_stage(data, config, seed), seed);
}

}  // namespace dogma
