#include "dogma/selection_bias.hpp"

#include "dogma/core/error.hpp"
#include "dogma/core/linalg.hpp"
#include "dogma/core/stats.hpp"

#include <cmath>
#include <sstream>

namespace dogma::selection_bias {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError(std::string(what) + " must lie in [0, 1]");
}

}  // namespace

void LinearModelPair::validate() const {
  require(beta.size() == phi.size(), "LinearModelPair: beta and phi lengths differ");
  require(sigma2_a > 0.0 && sigma2_y > 0.0, "LinearModelPair: variances must be positive");
}

CovarianceModel CovarianceModel::explicit_matrix(MatrixXd sigma) {
  require(sigma.rows() == sigma.cols() && sigma.rows() > 0, "CovarianceModel: Sigma must be square");
  require(relative_asymmetry(sigma) <= 1e-8, "CovarianceModel: Sigma must be symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sigma, Eigen::EigenvaluesOnly);
  require(es.eigenvalues().minCoeff() >= -1e-10 * std::max(1.0, es.eigenvalues().maxCoeff()),
          "CovarianceModel: Sigma must be positive semidefinite");
  return CovarianceModel(Explicit{std::move(sigma)});
}

CovarianceModel CovarianceModel::isotropic(Index dim, double sigma2_x) {
  require(dim > 0, "CovarianceModel: dimension must be positive");
  require(sigma2_x > 0.0, "CovarianceModel: sigma2_x must be positive");
  return CovarianceModel(Isotropic{dim, sigma2_x});
}

CovarianceModel CovarianceModel::latent_factor(MatrixXd loadings, double sigma_x) {
  require(loadings.rows() > 0 && loadings.cols() > 0, "CovarianceModel: empty loadings");
  require(sigma_x >= 0.0, "CovarianceModel: sigma_x must be nonnegative");
  return CovarianceModel(LatentFactor{std::move(loadings), sigma_x});
}

Index CovarianceModel::dim() const {
  return std::visit(overloaded{[](const Explicit& e) { return e.sigma.rows(); },
                               [](const Isotropic& i) { return i.dim; },
                               [](const LatentFactor& f) { return f.loadings.rows(); }},
                    model_);
}

MatrixXd CovarianceModel::matrix() const {
  return std::visit(overloaded{[](const Explicit& e) -> MatrixXd { return e.sigma; },
                               [](const Isotropic& i) -> MatrixXd {
                                 return i.sigma2_x * MatrixXd::Identity(i.dim, i.dim);
                               },
                               [](const LatentFactor& f) -> MatrixXd {
                                 MatrixXd s = f.loadings * f.loadings.transpose();
                                 s.diagonal().array() += f.sigma_x * f.sigma_x;
                                 return s;
                               }},
                    model_);
}

double CovarianceModel::quad_form(const VectorXd& u, const VectorXd& v) const {
  require(u.size() == dim() && v.size() == dim(), "CovarianceModel::quad_form: dimension mismatch");
  return std::visit(overloaded{[&](const Explicit& e) { return u.dot(e.sigma * v); },
                               [&](const Isotropic& i) { return i.sigma2_x * u.dot(v); },
                               [&](const LatentFactor& f) {
                                 return (f.loadings.transpose() * u).dot(f.loadings.transpose() * v) +
                                        f.sigma_x * f.sigma_x * u.dot(v);
                               }},
                    model_);
}

MatrixXd CovarianceModel::sample(Index n, Rng& rng) const {
  return std::visit(overloaded{[&](const Explicit& e) -> MatrixXd {
                                 Eigen::SelfAdjointEigenSolver<MatrixXd> es(e.sigma);
                                 const VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
                                 const MatrixXd z = rng.normal_matrix(n, e.sigma.rows());
                                 return z * root.asDiagonal() * es.eigenvectors().transpose();
                               },
                               [&](const Isotropic& i) -> MatrixXd {
                                 return std::sqrt(i.sigma2_x) * rng.normal_matrix(n, i.dim);
                               },
                               [&](const LatentFactor& f) -> MatrixXd {
                                 const MatrixXd eta = rng.normal_matrix(n, f.loadings.cols());
                                 const MatrixXd nu = rng.normal_matrix(n, f.loadings.rows());
                                 return eta * f.loadings.transpose() + f.sigma_x * nu;
                               }},
                    model_);
}

VectorXd CovarianceModel::eigenvalues() const {
  VectorXd ev = std::visit(
      overloaded{[](const Explicit& e) -> VectorXd {
                   return Eigen::SelfAdjointEigenSolver<MatrixXd>(e.sigma, Eigen::EigenvaluesOnly).eigenvalues();
                 },
                 [](const Isotropic& i) -> VectorXd { return VectorXd::Constant(i.dim, i.sigma2_x); },
                 [](const LatentFactor& f) -> VectorXd {
                   // Nonzero eigenvalues of Lambda Lambda^T are those of Lambda^T Lambda.
                   const MatrixXd small = f.loadings.transpose() * f.loadings;
                   const VectorXd k = Eigen::SelfAdjointEigenSolver<MatrixXd>(small, Eigen::EigenvaluesOnly)
                                          .eigenvalues()
                                          .cwiseMax(0.0);
                   const Index p = f.loadings.rows();
                   VectorXd out = VectorXd::Constant(p, f.sigma_x * f.sigma_x);
                   const Index l = std::min(p, k.size());
                   out.head(l) += k.tail(l);
                   return out;
                 }},
      model_);
  std::sort(ev.data(), ev.data() + ev.size(), std::greater<>());
  return ev;
}

CovariateSampler standard_normal_sampler(Index p) {
  return [p](Index n, Rng& rng) { return rng.normal_matrix(n, p); };
}

KernelFn gaussian_kernel(const MatrixXd& bandwidth) {
  require(bandwidth.rows() == bandwidth.cols(), "gaussian_kernel: bandwidth must be square");
  Eigen::LDLT<MatrixXd> ldlt(bandwidth);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-12 * std::max(1.0, ldlt.vectorD().maxCoeff()))
    throw ArgumentError("gaussian_kernel: bandwidth matrix H is singular");
  const MatrixXd h_inv = ldlt.solve(MatrixXd::Identity(bandwidth.rows(), bandwidth.cols()));
  return [h_inv](const Eigen::Ref<const VectorXd>& x, const Eigen::Ref<const VectorXd>& y) {
    const VectorXd d = x - y;
    return std::exp(-0.5 * d.dot(h_inv * d));
  };
}

KernelFn gaussian_kernel_isotropic(double xi) {
  if (!(xi > 0.0)) throw ArgumentError("gaussian_kernel_isotropic: bandwidth matrix H is singular");
  return [xi](const Eigen::Ref<const VectorXd>& x, const Eigen::Ref<const VectorXd>& y) {
    return std::exp(-0.5 * (x - y).squaredNorm() / xi);
  };
}

KernelFn linear_kernel() {
  return [](const Eigen::Ref<const VectorXd>& x, const Eigen::Ref<const VectorXd>& y) { return x.dot(y); };
}

void PriorSpec::validate() const {
  std::visit(overloaded{[](const RidgePrior& r) {
                          require(r.tau2_beta > 0.0 && r.tau2_phi > 0.0, "PriorSpec: ridge scales must be positive");
                        },
                        [](const SpikeSlabPrior& s) {
                          check_probability(s.p_beta, "PriorSpec: p_beta");
                          check_probability(s.p_phi, "PriorSpec: p_phi");
                          require(s.tau2_beta > 0.0 && s.tau2_phi > 0.0,
                                  "PriorSpec: spike-and-slab scales must be positive");
                        },
                        [](const GpPrior& g) {
                          require(static_cast<bool>(g.kernel), "PriorSpec: GP prior needs a kernel");
                          require(static_cast<bool>(g.propensity), "PriorSpec: GP prior needs a propensity");
                          require(g.tau2_beta > 0.0, "PriorSpec: GP scale must be positive");
                          require(g.support_points >= 2, "PriorSpec: GP prior needs >= 2 support points");
                        }},
             prior);
  require(sigma2_a > 0.0, "PriorSpec: sigma2_a must be positive");
}

double delta_linear(double a, const LinearModelPair& models, const CovarianceModel& cov) {
  models.validate();
  require(models.beta.size() == cov.dim(), "delta_linear: covariance dimension mismatch");
  const double num = cov.quad_form(models.phi, models.beta);
  const double den = models.sigma2_a + cov.quad_form(models.phi, models.phi);
  return a * num / den;
}

double delta_eigen(double a, const LinearModelPair& models, const MatrixXd& sigma) {
  models.validate();
  require(sigma.rows() == models.beta.size() && sigma.cols() == sigma.rows(), "delta_eigen: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sigma);
  const VectorXd w = es.eigenvectors().transpose() * models.beta;
  const VectorXd z = es.eigenvectors().transpose() * models.phi;
  const VectorXd& l = es.eigenvalues();
  const double num = (l.array() * w.array() * z.array()).sum();
  const double den = models.sigma2_a + (l.array() * z.array().square()).sum();
  return a * num / den;
}

double delta_sparse(double a, const VectorXd& beta, const VectorXd& phi, double sigma2_x, double sigma2_a) {
  require(beta.size() == phi.size(), "delta_sparse: beta and phi lengths differ");
  require(sigma2_x > 0.0 && sigma2_a > 0.0, "delta_sparse: variances must be positive");
  double num = 0.0;
  double den = sigma2_a;
  for (Index j = 0; j < phi.size(); ++j) {
    if (phi[j] == 0.0) continue;
    den += sigma2_x * phi[j] * phi[j];
    if (beta[j] != 0.0) num += sigma2_x * phi[j] * beta[j];
  }
  return a * num / den;
}

McEstimate delta_functional(const FunctionalPair& pair, Index n_draws, std::uint64_t seed) {
  require(n_draws >= 100, "delta_functional: n_draws must be >= 100");
  require(pair.outcome && pair.propensity && pair.sampler, "delta_functional: incomplete functional pair");
  Rng rng(seed);
  const MatrixXd x = pair.sampler(n_draws, rng);
  require(x.rows() == n_draws && x.cols() == pair.dim, "delta_functional: sampler dimension mismatch");
  VectorXd b(n_draws), p(n_draws);
  for (Index i = 0; i < n_draws; ++i) {
    b[i] = pair.outcome(x.row(i).transpose());
    p[i] = pair.propensity(x.row(i).transpose());
  }
  const double nd = static_cast<double>(n_draws);
  const double pbar = p.mean();
  if (pbar < 1e-6) throw DegeneracyError("delta_functional: mean propensity below 1e-6");
  const VectorXd bc = b.array() - b.mean();
  const VectorXd pc = p.array() - pbar;
  const double cov = bc.dot(pc) / nd;
  const double est = cov / pbar;
  // Influence function of cov / mean.
  const VectorXd infl = ((bc.array() * pc.array() - cov) - est * pc.array()) / pbar;
  const double se = std::sqrt(infl.squaredNorm() / (nd - 1.0) / nd);
  return {est, se};
}

double clt_scale(double a, const RidgePrior& prior, const VectorXd& sigma_eigenvalues) {
  require(prior.tau2_beta > 0.0 && prior.tau2_phi > 0.0, "clt_scale: prior scales must be positive");
  require(sigma_eigenvalues.size() > 0, "clt_scale: empty spectrum");
  const double p = static_cast<double>(sigma_eigenvalues.size());
  const double m1 = sigma_eigenvalues.mean();
  const double m2 = sigma_eigenvalues.squaredNorm() / p;
  if (!(m1 > 0.0)) throw DegeneracyError("clt_scale: mean eigenvalue is zero");
  const double c = a * a * (prior.tau2_beta / prior.tau2_phi) * (m2 / (m1 * m1));
  return c / p;
}

namespace {

VectorXd draw_gaussian(Index p, double tau2, Rng& rng) { return std::sqrt(tau2) * rng.normal_vector(p); }

VectorXd draw_spike_slab(Index p, double incl, double tau2, Rng& rng) {
  VectorXd v = VectorXd::Zero(p);
  const double sd = std::sqrt(tau2);
  for (Index j = 0; j < p; ++j) {
    const bool in = rng.bernoulli(incl);
    const double z = rng.normal();
    if (in) v[j] = sd * z;
  }
  return v;
}

double gp_delta_once(const GpPrior& g, const CovarianceModel& cov, double a, Rng& rng) {
  const Index m = g.support_points;
  const MatrixXd x = cov.sample(m, rng);
  MatrixXd k(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j <= i; ++j) k(i, j) = k(j, i) = g.tau2_beta * g.kernel(x.row(i).transpose(), x.row(j).transpose());
  const JitteredCholesky chol = jittered_cholesky(k, 1e-10, 1e-6);
  const VectorXd beta = chol.llt.matrixL() * rng.normal_vector(m);
  VectorXd p(m);
  for (Index i = 0; i < m; ++i) p[i] = g.propensity(x.row(i).transpose());
  const double pbar = p.mean();
  if (pbar < 1e-6) throw DegeneracyError("prior_delta_draws: mean propensity below 1e-6");
  const double cov_bp = (beta.array() - beta.mean()).matrix().dot((p.array() - pbar).matrix()) / static_cast<double>(m);
  return a * cov_bp / pbar;
}

}  // namespace

std::vector<double> prior_delta_draws(const PriorSpec& prior, const CovarianceModel& cov, double a, Index n_draws,
                                      std::uint64_t seed) {
  require(n_draws >= 1, "prior_delta_draws: n_draws must be >= 1");
  prior.validate();
  const Index p = cov.dim();
  const double shift = prior.omega.value_or(0.0);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n_draws));
  for (Index d = 0; d < n_draws; ++d) {
    // One substream per draw keeps draws independent of any partitioning.
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(d)}));
    const double value = std::visit(
        overloaded{[&](const RidgePrior& r) {
                     const VectorXd phi = draw_gaussian(p, r.tau2_phi, rng);
                     const VectorXd beta = draw_gaussian(p, r.tau2_beta, rng) + shift * phi;
                     return a * cov.quad_form(phi, beta) / (prior.sigma2_a + cov.quad_form(phi, phi));
                   },
                   [&](const SpikeSlabPrior& s) {
                     const VectorXd phi = draw_spike_slab(p, s.p_phi, s.tau2_phi, rng);
                     const VectorXd beta = draw_spike_slab(p, s.p_beta, s.tau2_beta, rng) + shift * phi;
                     return a * cov.quad_form(phi, beta) / (prior.sigma2_a + cov.quad_form(phi, phi));
                   },
                   [&](const GpPrior& g) {
                     if (prior.omega) throw ArgumentError("prior_delta_draws: a shift is not defined for GP priors");
                     return gp_delta_once(g, cov, a, rng);
                   }},
        prior.prior);
    out.push_back(value);
  }
  return out;
}

MatrixXd centered_kernel(const KernelFn& rho, const MatrixXd& x_sample) {
  const Index m = x_sample.rows();
  require(m >= 2, "centered_kernel: need at least two covariate rows");
  MatrixXd k(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j <= i; ++j) k(i, j) = k(j, i) = rho(x_sample.row(i).transpose(), x_sample.row(j).transpose());
  if (!k.allFinite()) throw NumericError("centered_kernel: non-finite kernel value");
  const VectorXd row_mean = k.rowwise().mean();
  const double grand = row_mean.mean();
  MatrixXd out = k;
  out.colwise() -= row_mean;
  out.rowwise() -= row_mean.transpose();
  out.array() += grand;
  return out;
}

GpDeltaVariance gp_delta_variance(const KernelFn& rho, double tau2_beta, const FunctionalPair& pair, Index n_draws,
                                  std::uint64_t seed) {
  require(n_draws >= 100, "gp_delta_variance: n_draws must be >= 100");
  require(tau2_beta > 0.0, "gp_delta_variance: tau2_beta must be positive");
  require(pair.propensity && pair.sampler, "gp_delta_variance: incomplete functional pair");
  Rng rng(seed);
  const MatrixXd x = pair.sampler(n_draws, rng);
  require(x.rows() == n_draws && x.cols() == pair.dim, "gp_delta_variance: sampler dimension mismatch");
  VectorXd p(n_draws);
  for (Index i = 0; i < n_draws; ++i) p[i] = pair.propensity(x.row(i).transpose());
  const double pbar = p.mean();
  if (pbar < 1e-6) throw DegeneracyError("gp_delta_variance: mean propensity below 1e-6");
  const VectorXd pc = p.array() - pbar;

  // U-statistic over distinct pairs; h1 is its Hoeffding projection.
  VectorXd h1 = VectorXd::Zero(n_draws);
  for (Index i = 0; i < n_draws; ++i) {
    for (Index j = 0; j < i; ++j) {
      const double kij = rho(x.row(i).transpose(), x.row(j).transpose());
      if (!std::isfinite(kij)) throw NumericError("gp_delta_variance: non-finite kernel value");
      const double t = pc[i] * pc[j] * kij;
      h1[i] += t;
      h1[j] += t;
    }
  }
  const double nd = static_cast<double>(n_draws);
  h1 /= (nd - 1.0);
  const double u = h1.mean();
  const double scale = tau2_beta / (pbar * pbar);
  const double se = 2.0 * std::sqrt(sample_variance(as_span(h1)) / nd);
  return {scale * u, scale * se, pbar};
}

KernelDecayCurve kernel_decay_curve(const std::function<CovarianceModel(Index)>& cov_family,
                                    const std::function<FunctionalPair(Index)>& pair_family,
                                    const std::vector<Index>& p_list, const KernelDecayOptions& options,
                                    std::uint64_t seed) {
  require(p_list.size() >= 3, "kernel_decay_curve: need at least three dimensions");
  for (std::size_t i = 1; i < p_list.size(); ++i)
    require(p_list[i] > p_list[i - 1], "kernel_decay_curve: dimensions must be increasing");
  require(options.scale > 0.0, "kernel_decay_curve: bandwidth scale must be positive");

  KernelDecayCurve curve;
  curve.min_mean_propensity = INFINITY;
  for (std::size_t idx = 0; idx < p_list.size(); ++idx) {
    const Index p = p_list[idx];
    const CovarianceModel cov = cov_family(p);
    const FunctionalPair pair = pair_family(p);
    require(pair.dim == p && cov.dim() == p, "kernel_decay_curve: family dimension mismatch");
    const KernelFn rho = options.rule == BandwidthRule::isotropic ? gaussian_kernel_isotropic(options.scale)
                                                                  : gaussian_kernel(options.scale * cov.matrix());
    const auto v = gp_delta_variance(rho, 1.0, pair, options.n_draws, derive_seed(seed, {static_cast<std::uint64_t>(p)}));
    curve.points.push_back({p, v.c, v.mc_se, v.mean_propensity});
    curve.min_mean_propensity = std::min(curve.min_mean_propensity, v.mean_propensity);
  }

  // Least-squares fit of log c on P over the points with c > 0.
  std::vector<double> xs, ys;
  for (const auto& pt : curve.points) {
    if (pt.c > 0.0) {
      xs.push_back(static_cast<double>(pt.p));
      ys.push_back(std::log(pt.c));
    }
  }
  if (xs.size() < 3) throw NumericError("kernel_decay_curve: fewer than three positive variance estimates");
  const double n = static_cast<double>(xs.size());
  const double xm = mean(xs);
  const double ym = mean(ys);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - xm) * (xs[i] - xm);
    sxy += (xs[i] - xm) * (ys[i] - ym);
  }
  curve.slope = sxy / sxx;
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - ym - curve.slope * (xs[i] - xm);
    rss += e * e;
  }
  curve.slope_se = std::sqrt(rss / (n - 2.0) / sxx);
  return curve;
}

}  // namespace dogma::selection_bias
