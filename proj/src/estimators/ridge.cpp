#include "dogma/estimators/ridge.hpp"

#include "dogma/core/error.hpp"
#include "dogma/estimators/intervals.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace dogma {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double GaussianPosterior::sd(Index i) const { return std::sqrt(covariance(i, i)); }

namespace {

void check_flat_block(const MatrixXd& design, const VectorXd& penalty) {
  std::vector<Index> flat;
  for (Index j = 0; j < penalty.size(); ++j)
    if (penalty[j] == 0.0) flat.push_back(j);
  if (flat.empty()) return;
  if (static_cast<Index>(flat.size()) > design.rows())
    throw IdentifiabilityError("ridge: more flat coefficients than observations");
  MatrixXd f(design.rows(), static_cast<Index>(flat.size()));
  for (std::size_t k = 0; k < flat.size(); ++k) {
    const double nrm = design.col(flat[k]).norm();
    if (!(nrm > 0.0)) throw IdentifiabilityError("ridge: flat coefficient has an all-zero design column");
    f.col(static_cast<Index>(k)) = design.col(flat[k]) / nrm;
  }
  Eigen::ColPivHouseholderQR<MatrixXd> qr(f);
  qr.setThreshold(1e-8);
  if (qr.rank() < f.cols()) throw IdentifiabilityError("ridge: flat coefficient block is not identified (collinear columns)");
}

Eigen::LLT<MatrixXd> factor_system(const MatrixXd& design, const VectorXd& penalty, double noise_var) {
  require(design.rows() >= 1, "ridge: at least one observation required");
  require(penalty.size() == design.cols(), "ridge: penalty length must equal design columns");
  require(noise_var > 0.0, "ridge: noise variance must be positive");
  require((penalty.array() >= 0.0).all(), "ridge: penalties must be nonnegative");
  require(design.allFinite(), "ridge: non-finite design entries");
  check_flat_block(design, penalty);

  const Index q = design.cols();
  MatrixXd m = MatrixXd::Zero(q, q);
  m.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose());
  m.diagonal() += noise_var * penalty;
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt;
  // Jitter the penalized block only; flat coordinates are never regularized.
  for (Index j = 0; j < q; ++j)
    if (penalty[j] > 0.0) m(j, j) += 1e-10;
  llt.compute(m);
  if (llt.info() != Eigen::Success) throw NumericError("ridge: normal equations are not positive definite");
  return llt;
}

}  // namespace

GaussianPosterior ridge_posterior(const MatrixXd& design, const VectorXd& y, const VectorXd& penalty,
                                  double noise_var) {
  require(y.size() == design.rows(), "ridge_posterior: response length mismatch");
  const auto llt = factor_system(design, penalty, noise_var);
  GaussianPosterior post;
  post.mean = llt.solve(design.transpose() * y);
  post.covariance = noise_var * llt.solve(MatrixXd::Identity(design.cols(), design.cols()));
  post.covariance = 0.5 * (post.covariance + post.covariance.transpose()).eval();
  post.noise_var = noise_var;
  return post;
}

CoordinatePosterior ridge_coordinate(const MatrixXd& design, const VectorXd& y, const VectorXd& penalty,
                                     double noise_var, Index coordinate) {
  require(y.size() == design.rows(), "ridge_coordinate: response length mismatch");
  require(coordinate >= 0 && coordinate < design.cols(), "ridge_coordinate: coordinate out of range");
  const auto llt = factor_system(design, penalty, noise_var);
  CoordinatePosterior out;
  out.mean = llt.solve(design.transpose() * y);
  const VectorXd e = VectorXd::Unit(design.cols(), coordinate);
  out.variance = noise_var * llt.solve(e)[coordinate];
  return out;
}

namespace {

EstimatorResult summarize_first(const MatrixXd& design, const VectorXd& y, const VectorXd& penalty, double noise_var,
                                double level, std::string method) {
  const auto post = ridge_coordinate(design, y, penalty, noise_var, 0);
  EstimatorResult r;
  r.method = std::move(method);
  r.estimate = post.mean[0];
  r.posterior_sd = std::sqrt(post.variance);
  std::tie(r.lo, r.hi) = credible_interval(r.estimate, r.posterior_sd, level);
  r.level = level;
  if (design.cols() > 1 && penalty.size() > 1 && penalty[1] == 0.0) r.diagnostics["omega_hat"] = post.mean[1];
  return r;
}

}  // namespace

EstimatorResult fit_naive_ridge(const Dataset& data, double lambda, double noise_var, double level) {
  data.validate();
  require(lambda > 0.0, "fit_naive_ridge: lambda must be positive");
  const Index n = data.n(), p = data.p();
  MatrixXd design(n, p + 1);
  design.col(0) = data.A;
  design.rightCols(p) = data.X;
  VectorXd penalty = VectorXd::Constant(p + 1, static_cast<double>(n) * lambda);
  penalty[0] = 0.0;
  auto r = summarize_first(design, data.Y, penalty, noise_var, level, "naive");
  r.diagnostics["lambda"] = lambda;
  return r;
}

ExposureEvidence::ExposureEvidence(const MatrixXd& X, const VectorXd& A, double noise_var)
    : n_(X.rows()), p_(X.cols()), noise_var_(noise_var) {
  require(X.rows() >= 2, "eb_tau2: need N >= 2");
  require(A.size() == X.rows(), "eb_tau2: exposure length mismatch");
  require(noise_var > 0.0, "eb_tau2: noise variance must be positive");
  Eigen::BDCSVD<MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  U_ = svd.matrixU();
  V_ = svd.matrixV();
  s2_ = svd.singularValues().array().square();
  ua_ = U_.transpose() * A;
  rest_ = std::max(0.0, A.squaredNorm() - ua_.squaredNorm());
}

double ExposureEvidence::log_likelihood(double tau2) const {
  const double pd = static_cast<double>(p_);
  const VectorXd ev = (noise_var_ + tau2 * s2_.array() / pd).matrix();
  const double k = static_cast<double>(s2_.size());
  const double nd = static_cast<double>(n_);
  double ll = -0.5 * ev.array().log().sum() - 0.5 * (ua_.array().square() / ev.array()).sum();
  ll += -0.5 * (nd - k) * std::log(noise_var_) - 0.5 * rest_ / noise_var_;
  ll += -0.5 * nd * std::log(2.0 * std::numbers::pi);
  return ll;
}

VectorXd ExposureEvidence::fitted(double tau2) const {
  require(tau2 > 0.0, "ExposureEvidence: tau2 must be positive");
  const double c = noise_var_ * static_cast<double>(p_) / tau2;
  return U_ * (s2_.array() / (s2_.array() + c) * ua_.array()).matrix();
}

VectorXd ExposureEvidence::fitted_penalty(double lambda) const {
  require(lambda > 0.0, "ExposureEvidence: lambda must be positive");
  const double c = noise_var_ * static_cast<double>(n_) * lambda;
  return U_ * (s2_.array() / (s2_.array() + c) * ua_.array()).matrix();
}

VectorXd ExposureEvidence::coefficients(double tau2) const {
  const double c = noise_var_ * static_cast<double>(p_) / tau2;
  return V_ * (s2_.array().sqrt() / (s2_.array() + c) * ua_.array()).matrix();
}

EbTau2Fit eb_tau2_fit(const VectorXd& A, const MatrixXd& X, double noise_var) {
  const ExposureEvidence ev(X, A, noise_var);
  EbTau2Fit fit;
  constexpr int grid_points = 81;  // 10 per decade on [1e-4, 1e4]
  const double lo = std::log(1e-4), hi = std::log(1e4);
  Index best = 0;
  for (int i = 0; i < grid_points; ++i) {
    const double t = std::exp(lo + (hi - lo) * i / (grid_points - 1));
    const double ll = ev.log_likelihood(t);
    if (!std::isfinite(ll)) throw NumericError("eb_tau2: non-finite marginal likelihood");
    fit.grid.push_back(t);
    fit.grid_loglik.push_back(ll);
    if (ll > fit.grid_loglik[static_cast<std::size_t>(best)]) best = i;
  }
  // Golden-section on log tau2 between the neighbours of the best grid point.
  const auto ib = static_cast<std::size_t>(best);
  double a = std::log(fit.grid[ib > 0 ? ib - 1 : ib]);
  double b = std::log(fit.grid[std::min(ib + 1, fit.grid.size() - 1)]);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  auto f = [&](double lt) { return ev.log_likelihood(std::exp(lt)); };
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > 1e-8) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  const double t_refined = std::exp(0.5 * (a + b));
  const double ll_refined = ev.log_likelihood(t_refined);
  if (ll_refined >= fit.grid_loglik[ib]) {
    fit.tau2 = t_refined;
    fit.log_likelihood = ll_refined;
  } else {
    fit.tau2 = fit.grid[ib];
    fit.log_likelihood = fit.grid_loglik[ib];
  }
  return fit;
}

double eb_tau2(const VectorXd& A, const MatrixXd& X, double noise_var) { return eb_tau2_fit(A, X, noise_var).tau2; }

CleverCovariate clever_covariate(const Dataset& data, const FirstStage& stage, double noise_var) {
  data.validate();
  CleverCovariate cc;
  cc.tau2_phi = std::numeric_limits<double>::quiet_NaN();
  switch (stage.kind) {
    case FirstStage::Kind::oracle:
      require(stage.phi.has_value() && stage.phi->size() == data.p(), "clever_covariate: oracle phi has wrong length");
      cc.a_hat = data.X * *stage.phi;
      break;
    case FirstStage::Kind::fixed_penalty: {
      const ExposureEvidence ev(data.X, data.A, noise_var);
      cc.a_hat = ev.fitted_penalty(stage.lambda);
      break;
    }
    case FirstStage::Kind::empirical_bayes: {
      const EbTau2Fit fit = eb_tau2_fit(data.A, data.X, noise_var);
      const ExposureEvidence ev(data.X, data.A, noise_var);
      cc.a_hat = ev.fitted(fit.tau2);
      cc.tau2_phi = fit.tau2;
      break;
    }
  }
  return cc;
}

EstimatorResult fit_direct_zprior(const Dataset& data, double lambda, const CleverCovariate& cc, double noise_var,
                                  double level) {
  data.validate();
  require(lambda > 0.0, "fit_direct_zprior: lambda must be positive");
  require(cc.a_hat.size() == data.n(), "fit_direct_zprior: clever covariate length mismatch");
  const Index n = data.n(), p = data.p();
  MatrixXd design(n, p + 2);
  design.col(0) = data.A;
  design.col(1) = cc.a_hat;
  design.rightCols(p) = data.X;
  VectorXd penalty = VectorXd::Constant(p + 2, static_cast<double>(n) * lambda);
  penalty[0] = penalty[1] = 0.0;
  auto r = summarize_first(design, data.Y, penalty, noise_var, level, "direct");
  r.diagnostics["lambda"] = lambda;
  if (!std::isnan(cc.tau2_phi)) r.diagnostics["tau2_phi_hat"] = cc.tau2_phi;
  return r;
}

EstimatorResult fit_direct_zprior(const Dataset& data, double lambda, const FirstStage& stage, double noise_var,
                                  double level) {
  return fit_direct_zprior(data, lambda, clever_covariate(data, stage, noise_var), noise_var, level);
}

EstimatorResult fit_debiased(const Dataset& data, double lambda, const CleverCovariate& cc, double noise_var,
                             double level) {
  data.validate();
  require(lambda > 0.0, "fit_debiased: lambda must be positive");
  require(cc.a_hat.size() == data.n(), "fit_debiased: clever covariate length mismatch");
  const Index n = data.n(), p = data.p();
  MatrixXd design(n, p + 1);
  design.col(0) = data.A - cc.a_hat;
  design.rightCols(p) = data.X;
  VectorXd penalty = VectorXd::Constant(p + 1, static_cast<double>(n) * lambda);
  penalty[0] = 0.0;
  auto r = summarize_first(design, data.Y, penalty, noise_var, level, "debiased");
  r.diagnostics["lambda"] = lambda;
  if (!std::isnan(cc.tau2_phi)) r.diagnostics["tau2_phi_hat"] = cc.tau2_phi;
  return r;
}

EstimatorResult fit_debiased(const Dataset& data, double lambda, const FirstStage& stage, double noise_var,
                             double level) {
  return fit_debiased(data, lambda, clever_covariate(data, stage, noise_var), noise_var, level);
}

}  // namespace dogma
