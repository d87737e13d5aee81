#include "dogma/gp.hpp"

#include "dogma/core/error.hpp"
#include "dogma/core/optimize.hpp"
#include "dogma/core/stats.hpp"
#include "dogma/estimators/intervals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

namespace dogma::gp {

KernelVariant parse_kernel_variant(std::string_view tag) {
  if (tag == "naive") return KernelVariant::naive;
  if (tag == "ipw") return KernelVariant::ipw;
  if (tag == "sop") return KernelVariant::sop;
  if (tag == "sop_gp") return KernelVariant::sop_gp;
  throw ArgumentError("unknown kernel variant: " + std::string(tag));
}

std::string_view to_string(KernelVariant v) {
  switch (v) {
    case KernelVariant::naive: return "naive";
    case KernelVariant::ipw: return "ipw";
    case KernelVariant::sop: return "sop";
    case KernelVariant::sop_gp: return "sop_gp";
  }
  return "naive";
}

void KernelSpec::validate() const {
  require(amplitude > 0.0 && std::isfinite(amplitude), "KernelSpec: amplitude must be positive");
  require(inv_bandwidth > 0.0 && std::isfinite(inv_bandwidth), "KernelSpec: inverse bandwidth must be positive");
  require(knots >= 2, "KernelSpec: need at least 2 spline knots");
}

SplineBasis SplineBasis::fit(std::span<const double> values, int knots) {
  require(knots >= 2, "spline_basis: need at least 2 knots");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  for (double v : sorted)
    if (!std::isfinite(v)) throw ArgumentError("spline_basis: non-finite value");
  const auto distinct = std::unique(sorted.begin(), sorted.end()) - sorted.begin();
  if (distinct < knots) throw DegeneracyError("spline_basis: fewer distinct values than knots");
  VectorXd xi(knots);
  for (int k = 0; k < knots; ++k) xi[k] = quantile(values, static_cast<double>(k) / (knots - 1));
  for (int k = 1; k < knots; ++k)
    if (!(xi[k] > xi[k - 1])) throw DegeneracyError("spline_basis: tied quantile knots");
  return SplineBasis(std::move(xi));
}

VectorXd SplineBasis::operator()(double t) const {
  const int K = size();
  VectorXd out(K);
  out[0] = 1.0;
  out[1] = t;
  const double last = knots_[K - 1];
  auto cube = [](double u) { return u > 0.0 ? u * u * u : 0.0; };
  auto d = [&](int k) { return (cube(t - knots_[k]) - cube(t - last)) / (last - knots_[k]); };
  if (K > 2) {
    const double d_end = d(K - 2);
    for (int k = 0; k < K - 2; ++k) out[k + 2] = d(k) - d_end;
  }
  return out;
}

MatrixXd SplineBasis::evaluate(const VectorXd& t) const {
  MatrixXd out(t.size(), size());
  for (Index i = 0; i < t.size(); ++i) out.row(i) = (*this)(t[i]).transpose();
  return out;
}

namespace {

constexpr double clip_lo = 0.01;
constexpr double clip_hi = 0.99;

struct Features {
  MatrixXd L;
  Index clipped = 0;
};

Features linear_features(const KernelSpec& spec, const GpInputs& in, const SplineBasis* basis) {
  const Index n = in.size();
  require(in.a.size() == n, "gp: exposure length mismatch");
  if (spec.uses_propensity()) require(in.phi.size() == n, "gp: propensity length mismatch");
  Features f;
  switch (spec.variant) {
    case KernelVariant::naive:
      f.L.resize(n, 2);
      break;
    case KernelVariant::ipw:
      f.L.resize(n, 4);
      for (Index i = 0; i < n; ++i) {
        double p = in.phi[i];
        if (!(p > 0.0 && p < 1.0)) throw DegeneracyError("gp ipw kernel: propensity must lie strictly in (0, 1)");
        if (p < clip_lo || p > clip_hi) {
          p = std::clamp(p, clip_lo, clip_hi);
          ++f.clipped;
        }
        f.L(i, 2) = in.a[i] / p;
        f.L(i, 3) = (1.0 - in.a[i]) / (1.0 - p);
      }
      break;
    case KernelVariant::sop:
    case KernelVariant::sop_gp:
      if (basis == nullptr) throw ArgumentError("gp spline kernel: spline basis required");
      f.L.resize(n, 2 + basis->size());
      f.L.rightCols(basis->size()) = basis->evaluate(in.phi);
      break;
  }
  f.L.col(0).setOnes();
  f.L.col(1) = in.a;
  return f;
}

MatrixXd sqdist(const VectorXd& a1, const MatrixXd& X1, const VectorXd& a2, const MatrixXd& X2) {
  require(X1.cols() == X2.cols(), "gp: covariate dimension mismatch");
  MatrixXd d = -2.0 * (X1 * X2.transpose());
  d.colwise() += X1.rowwise().squaredNorm();
  d.rowwise() += X2.rowwise().squaredNorm().transpose();
  if (a1.size() > 0) {
    for (Index j = 0; j < d.cols(); ++j)
      for (Index i = 0; i < d.rows(); ++i) {
        const double da = a1[i] - a2[j];
        d(i, j) += da * da;
      }
  }
  return d.cwiseMax(0.0);
}

/// Covariance pieces that do not depend on the hyperparameters.
struct Problem {
  MatrixXd linear;  // linear_scale L L^T, or empty
  MatrixXd dist;    // squared distances, or empty when no Gaussian block
  VectorXd y;

  MatrixXd covariance(double amplitude, double inv_bandwidth, double noise_sd) const {
    const Index n = y.size();
    MatrixXd c = linear.size() > 0 ? linear : MatrixXd::Zero(n, n);
    if (dist.size() > 0) c.array() += amplitude * (-inv_bandwidth * dist.array()).exp();
    c.diagonal().array() += noise_sd * noise_sd;
    return c;
  }

  double loglik(const JitteredCholesky& chol, VectorXd* alpha) const {
    VectorXd a = chol.solve(y);
    const double n = static_cast<double>(y.size());
    const double ll = -0.5 * y.dot(a) - 0.5 * chol.log_det() - 0.5 * n * std::log(2.0 * std::numbers::pi);
    if (!std::isfinite(ll)) throw NumericError("gp: non-finite marginal log-likelihood");
    if (alpha) *alpha = std::move(a);
    return ll;
  }

  double loglik(double amplitude, double inv_bandwidth, double noise_sd) const {
    return loglik(jittered_cholesky(covariance(amplitude, inv_bandwidth, noise_sd)), nullptr);
  }
};

struct Hyper {
  double amplitude = 1.0;
  double inv_bandwidth = 1.0;
  double noise_sd = 1.0;
  double loglik = -std::numeric_limits<double>::infinity();
  int evaluations = 0;
};

/// Grid plus simplex search; the Gaussian axes are skipped when `gaussian` is false.
Hyper maximize(const Problem& prob, bool gaussian, const EbOptions& opt) {
  require(opt.grid_points >= 1 && opt.grid_lo > 0.0 && opt.grid_hi >= opt.grid_lo, "eb_optimize: bad grid");
  const int dim = gaussian ? 3 : 1;
  auto unpack = [&](const VectorXd& t) {
    Hyper h;
    if (gaussian) {
      h.amplitude = std::exp(t[0]);
      h.inv_bandwidth = std::exp(t[1]);
    }
    h.noise_sd = std::exp(t[dim - 1]);
    return h;
  };
  int evals = 0;
  auto objective = [&](const VectorXd& t) {
    ++evals;
    const Hyper h = unpack(t);
    try {
      return prob.loglik(h.amplitude, h.inv_bandwidth, h.noise_sd);
    } catch (const NumericError&) {
      return -std::numeric_limits<double>::infinity();
    }
  };

  std::vector<double> axis(static_cast<std::size_t>(opt.grid_points));
  const double llo = std::log(opt.grid_lo), lhi = std::log(opt.grid_hi);
  for (int i = 0; i < opt.grid_points; ++i)
    axis[static_cast<std::size_t>(i)] = opt.grid_points == 1 ? llo : llo + (lhi - llo) * i / (opt.grid_points - 1);

  VectorXd best_t(dim);
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> idx(static_cast<std::size_t>(dim), 0);
  for (;;) {
    VectorXd t(dim);
    for (int k = 0; k < dim; ++k) t[k] = axis[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
    const double v = objective(t);
    if (v > best) {
      best = v;
      best_t = t;
    }
    int k = dim - 1;
    while (k >= 0 && ++idx[static_cast<std::size_t>(k)] == opt.grid_points) idx[static_cast<std::size_t>(k--)] = 0;
    if (k < 0) break;
  }
  if (!std::isfinite(best)) throw NumericError("eb_optimize: marginal likelihood non-finite at every grid point");

  const SimplexResult nm = nelder_mead_maximize(objective, best_t, 1.0, opt.ftol, opt.max_evals);
  Hyper h = nm.value > best ? unpack(nm.x) : unpack(best_t);
  h.loglik = std::max(nm.value, best);
  h.evaluations = evals;
  return h;
}

Problem gp_problem(const KernelSpec& spec, const GpInputs& in, const SplineBasis* basis, const VectorXd& y,
                   Index* clipped) {
  Problem p;
  const Features f = linear_features(spec, in, basis);
  p.linear = KernelSpec::linear_scale * (f.L * f.L.transpose());
  if (spec.has_gaussian()) p.dist = sqdist(in.a, in.X, in.a, in.X);
  p.y = y;
  if (clipped) *clipped = f.clipped;
  return p;
}

std::optional<SplineBasis> basis_for(const KernelSpec& spec, const GpInputs& in) {
  if (!spec.uses_spline()) return std::nullopt;
  return SplineBasis::fit(as_span(in.phi), spec.knots);
}

void check_gp_data(const KernelSpec& spec, const Dataset& data) {
  data.validate();
  require(data.n() >= 1, "gp: no training data");
  if (spec.uses_propensity() && !data.has_propensity())
    throw ArgumentError("gp: kernel variant " + std::string(to_string(spec.variant)) + " needs a propensity oracle");
}

GpFit finish_fit(const KernelSpec& spec, const Dataset& data, GpInputs in, std::optional<SplineBasis> basis,
                 double noise_sd) {
  GpFit fit;
  fit.spec = spec;
  fit.noise_sd = noise_sd;
  const Problem prob = gp_problem(spec, in, basis ? &*basis : nullptr, data.Y, &fit.clipped);
  fit.chol = jittered_cholesky(prob.covariance(spec.amplitude, spec.inv_bandwidth, noise_sd));
  fit.log_likelihood = prob.loglik(fit.chol, &fit.alpha);
  fit.train = std::move(in);
  fit.basis = std::move(basis);
  fit.propensity = data.propensity_oracle;
  return fit;
}

}  // namespace

MatrixXd gram(const KernelSpec& spec, const GpInputs& u, const GpInputs& v, const SplineBasis* basis) {
  spec.validate();
  const Features fu = linear_features(spec, u, basis);
  const Features fv = linear_features(spec, v, basis);
  MatrixXd k = KernelSpec::linear_scale * (fu.L * fv.L.transpose());
  if (spec.has_gaussian())
    k.array() += spec.amplitude * (-spec.inv_bandwidth * sqdist(u.a, u.X, v.a, v.X).array()).exp();
  return k;
}

double kernel_eval(const KernelSpec& spec, const GpPoint& u, const GpPoint& v, const SplineBasis* basis) {
  require(u.x.size() == v.x.size(), "kernel_eval: covariate dimension mismatch");
  auto one = [](const GpPoint& p) {
    GpInputs in;
    in.a = VectorXd::Constant(1, p.a);
    in.X = p.x.transpose();
    in.phi = VectorXd::Constant(1, p.phi);
    return in;
  };
  return gram(spec, one(u), one(v), basis)(0, 0);
}

GpInputs training_inputs(const Dataset& data) {
  GpInputs in;
  in.a = data.A;
  in.X = data.X;
  in.phi = VectorXd::Constant(data.n(), 0.5);
  if (data.has_propensity())
    for (Index i = 0; i < data.n(); ++i) in.phi[i] = data.propensity_oracle(data.X.row(i).transpose());
  return in;
}

double gp_marginal_loglik(const KernelSpec& spec, const Dataset& data, double noise_sd) {
  spec.validate();
  require(noise_sd > 0.0, "gp_marginal_loglik: noise sd must be positive");
  check_gp_data(spec, data);
  const GpInputs in = training_inputs(data);
  const auto basis = basis_for(spec, in);
  const Problem prob = gp_problem(spec, in, basis ? &*basis : nullptr, data.Y, nullptr);
  return prob.loglik(spec.amplitude, spec.inv_bandwidth, noise_sd);
}

GpFit fit_gp(const KernelSpec& spec, const Dataset& data, double noise_sd) {
  spec.validate();
  require(noise_sd > 0.0, "fit_gp: noise sd must be positive");
  check_gp_data(spec, data);
  GpInputs in = training_inputs(data);
  auto basis = basis_for(spec, in);
  return finish_fit(spec, data, std::move(in), std::move(basis), noise_sd);
}

GpFit eb_optimize(KernelVariant variant, const Dataset& data, const EbOptions& options) {
  KernelSpec spec;
  spec.variant = variant;
  check_gp_data(spec, data);
  require(data.n() >= 10, "eb_optimize: need N >= 10");
  GpInputs in = training_inputs(data);
  auto basis = basis_for(spec, in);
  const Problem prob = gp_problem(spec, in, basis ? &*basis : nullptr, data.Y, nullptr);
  const Hyper h = maximize(prob, spec.has_gaussian(), options);
  spec.amplitude = h.amplitude;
  spec.inv_bandwidth = h.inv_bandwidth;
  GpFit fit = finish_fit(spec, data, std::move(in), std::move(basis), h.noise_sd);
  fit.evaluations = h.evaluations;
  return fit;
}

AtePosterior ate_posterior(const GpFit& fit, const MatrixXd& X_eval) {
  const Index m = X_eval.rows();
  require(m >= 1, "ate_posterior: need at least one evaluation point");
  require(fit.train.size() >= 1, "ate_posterior: fit has no training data");
  require(X_eval.cols() == fit.train.X.cols(), "ate_posterior: covariate dimension mismatch");

  VectorXd phi = VectorXd::Constant(m, 0.5);
  if (fit.spec.uses_propensity()) {
    require(static_cast<bool>(fit.propensity), "ate_posterior: propensity oracle required");
    for (Index i = 0; i < m; ++i) phi[i] = fit.propensity(X_eval.row(i).transpose());
  }
  GpInputs u;
  u.X.resize(2 * m, X_eval.cols());
  u.X << X_eval, X_eval;
  u.a.resize(2 * m);
  u.a << VectorXd::Ones(m), VectorXd::Zero(m);
  u.phi.resize(2 * m);
  u.phi << phi, phi;
  VectorXd c(2 * m);
  c << VectorXd::Constant(m, 1.0 / m), VectorXd::Constant(m, -1.0 / m);

  const SplineBasis* basis = fit.basis ? &*fit.basis : nullptr;
  const VectorXd kc = gram(fit.spec, fit.train, u, basis) * c;
  const double prior_var = c.dot(gram(fit.spec, u, u, basis) * c);
  const VectorXd w = fit.chol.llt.matrixL().solve(kc);
  AtePosterior out;
  out.mean = kc.dot(fit.alpha);
  out.sd = std::sqrt(std::max(0.0, prior_var - w.squaredNorm()));
  if (!std::isfinite(out.mean) || !std::isfinite(out.sd)) throw NumericError("ate_posterior: non-finite result");
  return out;
}

EstimatorResult fit_gp_method(const Dataset& data, KernelVariant variant, double level, const EbOptions& options) {
  const GpFit fit = eb_optimize(variant, data, options);
  const AtePosterior post = ate_posterior(fit, data.X);
  EstimatorResult r;
  r.method = std::string(to_string(variant));
  r.estimate = post.mean;
  r.posterior_sd = post.sd;
  std::tie(r.lo, r.hi) = credible_interval(post.mean, post.sd, level);
  r.level = level;
  r.diagnostics["amplitude"] = fit.spec.amplitude;
  r.diagnostics["inv_bandwidth"] = fit.spec.inv_bandwidth;
  r.diagnostics["noise_sd"] = fit.noise_sd;
  r.diagnostics["log_likelihood"] = fit.log_likelihood;
  r.diagnostics["clipped"] = static_cast<double>(fit.clipped);
  r.diagnostics["jitter"] = fit.chol.jitter;
  return r;
}

MatrixXd squared_exponential_gram(const MatrixXd& X1, const MatrixXd& X2) {
  return (-sqdist(VectorXd(), X1, VectorXd(), X2).array()).exp().matrix();
}

ParametricPosterior gp_parametric_posterior(const MatrixXd& Z, const VectorXd& y, const MatrixXd& K, double noise_var,
                                            double prior_var) {
  const Index n = Z.rows();
  require(y.size() == n && K.rows() == n && K.cols() == n, "gp_parametric_posterior: shape mismatch");
  require(noise_var > 0.0 && prior_var > 0.0, "gp_parametric_posterior: variances must be positive");
  MatrixXd c = K;
  c.diagonal().array() += noise_var;
  const JitteredCholesky chol = jittered_cholesky(c);
  const MatrixXd ciz = chol.llt.solve(Z);
  MatrixXd prec = Z.transpose() * ciz;
  prec.diagonal().array() += 1.0 / prior_var;
  const Eigen::LLT<MatrixXd> pl(prec);
  if (pl.info() != Eigen::Success) throw NumericError("gp_parametric_posterior: posterior precision not PD");
  ParametricPosterior out;
  out.covariance = pl.solve(MatrixXd::Identity(Z.cols(), Z.cols()));
  out.mean = out.covariance * (ciz.transpose() * y);
  return out;
}

PilotFit pilot_exposure_fit(const Dataset& data, const EbOptions& options) {
  data.validate();
  require(data.n() >= 10, "pilot_exposure_fit: need N >= 10");
  Problem prob;
  prob.dist = sqdist(VectorXd(), data.X, VectorXd(), data.X);
  prob.y = data.A;
  const Hyper h = maximize(prob, true, options);
  PilotFit out;
  out.amplitude = h.amplitude;
  out.inv_bandwidth = h.inv_bandwidth;
  out.noise_sd = h.noise_sd;
  const JitteredCholesky chol = jittered_cholesky(prob.covariance(h.amplitude, h.inv_bandwidth, h.noise_sd));
  VectorXd alpha;
  out.log_likelihood = prob.loglik(chol, &alpha);
  out.fitted = h.amplitude * ((-h.inv_bandwidth * prob.dist.array()).exp().matrix() * alpha);
  const VectorXd inv_diag = chol.llt.solve(MatrixXd::Identity(data.n(), data.n())).diagonal();
  out.loo = data.A - alpha.cwiseQuotient(inv_diag);
  return out;
}

namespace {

EstimatorResult semipar_result(const ParametricPosterior& post, const SemiparConfig& config, std::string method) {
  EstimatorResult r;
  r.method = std::move(method);
  r.estimate = post.mean[0];
  r.posterior_sd = std::sqrt(post.covariance(0, 0));
  std::tie(r.lo, r.hi) = credible_interval(r.estimate, r.posterior_sd, config.level);
  r.level = config.level;
  return r;
}

void check_semipar(const Dataset& data, const SemiparConfig& config) {
  data.validate();
  require(data.n() >= 20, "semiparametric fit: need N >= 20");
  require(config.kernel_scale > 0.0 && config.coef_prior_var > 0.0 && config.noise_var > 0.0,
          "semiparametric fit: variances must be positive");
}

}  // namespace

EstimatorResult fit_semipar_naive(const Dataset& data, const SemiparConfig& config) {
  check_semipar(data, config);
  const MatrixXd K = config.kernel_scale * squared_exponential_gram(data.X, data.X);
  const MatrixXd Z = data.A;
  return semipar_result(gp_parametric_posterior(Z, data.Y, K, config.noise_var, config.coef_prior_var), config,
                        "naive");
}

EstimatorResult fit_semipar_direct(const Dataset& data, const SemiparConfig& config) {
  check_semipar(data, config);
  const PilotFit pilot = pilot_exposure_fit(data, config.pilot);
  const double spread = sample_sd(as_span(pilot.fitted));
  if (!(spread > 1e-8 * std::max(1.0, sample_sd(as_span(data.A)))))
    throw DegeneracyError("fit_semipar_direct: pilot exposure fit is constant");
  MatrixXd Z(data.n(), 2);
  Z.col(0) = data.A;
  Z.col(1) = pilot.loo;
  const MatrixXd K = config.kernel_scale * squared_exponential_gram(data.X, data.X);
  const ParametricPosterior post = gp_parametric_posterior(Z, data.Y, K, config.noise_var, config.coef_prior_var);
  EstimatorResult r = semipar_result(post, config, "direct");
  r.diagnostics["omega_hat"] = post.mean[1];
  r.diagnostics["pilot_amplitude"] = pilot.amplitude;
  r.diagnostics["pilot_inv_bandwidth"] = pilot.inv_bandwidth;
  r.diagnostics["pilot_noise_sd"] = pilot.noise_sd;
  return r;
}

}  // namespace dogma::gp
