#include "dogma/core/error.hpp"
#include "dogma/core/linalg.hpp"
#include "dogma/core/random.hpp"
#include "dogma/core/stats.hpp"
#include "dogma/simlab.hpp"

#include <cmath>
#include <string>

namespace dogma::simlab {

namespace {

/// Spike-and-slab draw: zero with probability 1 - p, Normal(0, tau2) otherwise.
double spike_slab(Rng& rng, double p, double tau2) {
  const bool on = rng.bernoulli(p);
  const double z = rng.normal();
  return on ? std::sqrt(tau2) * z : 0.0;
}

Simulated linear_outcome(MatrixXd X, const VectorXd& phi, const VectorXd& beta, double gamma, Rng& rng) {
  Simulated s;
  const Index n = X.rows();
  s.data.A = X * phi + rng.normal_vector(n);
  s.data.Y = X * beta + gamma * s.data.A + rng.normal_vector(n);
  s.data.X = std::move(X);
  s.truth.estimand = gamma;
  s.truth.gamma = gamma;
  s.truth.beta = beta;
  s.truth.phi = phi;
  return s;
}

}  // namespace

Simulated dgp_ridge(std::string_view setting, Index n, Index p, std::uint64_t seed) {
  require(n >= 2 && p >= 2, "dgp_ridge: need N, P >= 2");
  Rng rng(seed);
  double gamma = 2.0, omega = 0.0;
  if (setting == "random") {
    gamma = rng.normal();
    omega = rng.normal();
  } else if (setting == "fixed") {
    omega = -gamma / 4.0;
  } else if (setting == "debiased") {
    omega = -gamma;
  } else if (setting != "naive") {
    throw ArgumentError("dgp_ridge: unknown setting " + std::string(setting));
  }
  MatrixXd X = rng.normal_matrix(n, p);
  const VectorXd phi = VectorXd::Constant(p, 1.0 / std::sqrt(static_cast<double>(p)));
  const VectorXd b = rng.normal_vector(p) / std::sqrt(static_cast<double>(p));
  Simulated s = linear_outcome(std::move(X), phi, b + omega * phi, gamma, rng);
  s.truth.omega = omega;
  return s;
}

Simulated dgp_rem(Index n, Index p, double tau2, double omega0, double gamma, std::uint64_t seed) {
  require(n >= 2 && p >= 1, "dgp_rem: bad dimensions");
  require(tau2 > 0.0, "dgp_rem: tau2 must be positive");
  Rng rng(seed);
  const double sd = std::sqrt(tau2 / static_cast<double>(p));
  MatrixXd X = rng.normal_matrix(n, p);
  const VectorXd phi = sd * rng.normal_vector(p);
  const VectorXd beta = omega0 * phi + sd * rng.normal_vector(p);
  Simulated s = linear_outcome(std::move(X), phi, beta, gamma, rng);
  s.truth.omega = omega0;
  return s;
}

Simulated dgp_sas(std::string_view scheme, std::uint64_t seed, Index n, Index p) {
  require(n >= 2 && p >= 1, "dgp_sas: bad dimensions");
  const bool shared = scheme == "shared" || scheme == "both";
  const bool shifted = scheme == "direct" || scheme == "both";
  if (!shared && !shifted && scheme != "naive") throw ArgumentError("dgp_sas: unknown scheme " + std::string(scheme));
  constexpr double p_sparse = 5.0 / 200.0;
  Rng rng(seed);
  VectorXd phi(p), beta(p);
  for (Index j = 0; j < p; ++j) phi[j] = spike_slab(rng, p_sparse, 1.0);
  for (Index j = 0; j < p; ++j) beta[j] = spike_slab(rng, shared && phi[j] != 0.0 ? 1.0 : p_sparse, 1.0);
  if (shifted) beta -= phi;
  MatrixXd X = rng.normal_matrix(n, p);
  return linear_outcome(std::move(X), phi, beta, 1.0, rng);
}

GpSetting parse_gp_setting(std::string_view tag) {
  GpSetting s;
  const auto cut = tag.find('_');
  if (cut == std::string_view::npos) throw ArgumentError("gp setting must look like nonlinear_hetero: " + std::string(tag));
  const auto mu = tag.substr(0, cut), tau = tag.substr(cut + 1);
  if (mu == "linear")
    s.linear = true;
  else if (mu == "nonlinear")
    s.linear = false;
  else
    throw ArgumentError("gp setting: expected linear or nonlinear, got " + std::string(mu));
  if (tau == "homo")
    s.heterogeneous = false;
  else if (tau == "hetero")
    s.heterogeneous = true;
  else
    throw ArgumentError("gp setting: expected homo or hetero, got " + std::string(tau));
  return s;
}

Simulated dgp_gp(bool linear, bool heterogeneous, Index n, Index p, std::uint64_t seed) {
  require(p >= 5, "dgp_gp: need P >= 5");
  require(n >= 2, "dgp_gp: need N >= 2");
  Rng rng(seed);
  MatrixXd X = rng.normal_matrix(n, p);
  for (Index i = 0; i < n; ++i) {
    X(i, 1) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    X(i, 3) = static_cast<double>(rng.uniform_int(1, 3));
  }
  auto g = [](double x4) { return x4 == 1.0 ? 2.0 : (x4 == 2.0 ? -1.0 : -4.0); };
  auto mu = [=](const Eigen::Ref<const VectorXd>& x) {
    return linear ? 1.0 + g(x[3]) + x[0] * x[2] : -6.0 + g(x[3]) + 6.0 * std::abs(x[2] - 1.0);
  };
  auto tau = [=](const Eigen::Ref<const VectorXd>& x) { return heterogeneous ? 1.0 + 2.0 * x[1] * x[4] : 3.0; };

  VectorXd m(n);
  for (Index i = 0; i < n; ++i) m[i] = mu(X.row(i).transpose());
  const double s = sample_sd(as_span(m));
  if (!(s > 0.0)) throw DegeneracyError("dgp_gp: outcome surface has zero spread");
  auto propensity = [=](const Eigen::Ref<const VectorXd>& x) {
    return 0.8 * normal_cdf(3.0 * mu(x) / s - 0.5 * x[0]) + 0.1;
  };

  Simulated out;
  out.data.A.resize(n);
  out.data.Y.resize(n);
  double ate = 0.0;
  for (Index i = 0; i < n; ++i) {
    const VectorXd xi = X.row(i).transpose();
    const double t = tau(xi);
    out.data.A[i] = rng.bernoulli(propensity(xi)) ? 1.0 : 0.0;
    out.data.Y[i] = m[i] + out.data.A[i] * t + rng.normal();
    ate += t;
  }
  out.data.X = std::move(X);
  out.data.propensity_oracle = propensity;
  out.truth.estimand = ate / static_cast<double>(n);
  out.truth.gamma = out.truth.estimand;
  return out;
}

FactorCoefficients factor_coefficients(const MatrixXd& loadings, double sigma_x) {
  require(sigma_x >= 0.0, "factor_coefficients: sigma_x must be nonnegative");
  const Index L = loadings.cols();
  MatrixXd inner = loadings.transpose() * loadings;
  inner.diagonal().array() += sigma_x * sigma_x;
  const VectorXd ones = VectorXd::Ones(L);
  FactorCoefficients out;
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(inner);
  cod.setThreshold(1e-10);
  out.rank = cod.rank();
  if (out.rank == L) {
    out.beta = loadings * inner.llt().solve(ones);
  } else {
    // sigma_x = 0 with collinear loadings: minimum-norm solution
    out.beta = loadings * cod.pseudoInverse() * ones;
  }
  return out;
}

Simulated dgp_factor(double sigma_x, Index n, Index p, Index L, std::uint64_t seed) {
  require(L >= 1 && L <= p, "dgp_factor: need 1 <= L <= P");
  require(n >= 2, "dgp_factor: need N >= 2");
  require(sigma_x >= 0.0, "dgp_factor: sigma_x must be nonnegative");
  Rng rng(seed);
  const MatrixXd loadings = rng.normal_matrix(p, L);
  const MatrixXd eta = rng.normal_matrix(n, L);
  MatrixXd X = eta * loadings.transpose() + sigma_x * rng.normal_matrix(n, p);
  const FactorCoefficients fc = factor_coefficients(loadings, sigma_x);
  Simulated s = linear_outcome(std::move(X), fc.beta, fc.beta, 1.0, rng);
  s.truth.rank = fc.rank;
  return s;
}

Simulated dgp_manifold(Index p, double sigma_x, Index n, std::uint64_t seed) {
  require(n >= 20, "dgp_manifold: need N >= 20");
  require(p >= 1, "dgp_manifold: need P >= 1");
  require(sigma_x >= 0.0, "dgp_manifold: sigma_x must be nonnegative");
  Rng rng(seed);
  const VectorXd eta = rng.normal_vector(n);
  MatrixXd k_eta(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) k_eta(i, j) = std::exp(-(eta[i] - eta[j]) * (eta[i] - eta[j]));
  const JitteredCholesky ce = jittered_cholesky(k_eta);
  MatrixXd X = ce.llt.matrixL() * rng.normal_matrix(n, p);
  X += sigma_x * rng.normal_matrix(n, p);
  for (Index j = 0; j < p; ++j) {
    const VectorXd col = X.col(j);
    const double sd = sample_sd(as_span(col));
    if (!(sd > 0.0)) throw DegeneracyError("dgp_manifold: constant covariate column");
    X.col(j) /= sd;
  }

  MatrixXd k_x = -2.0 * (X * X.transpose());
  k_x.colwise() += X.rowwise().squaredNorm();
  k_x.rowwise() += X.rowwise().squaredNorm().transpose();
  k_x = (-k_x.cwiseMax(0.0).array()).exp().matrix();
  const JitteredCholesky cx = jittered_cholesky(k_x);
  const VectorXd r_a = cx.llt.matrixL() * rng.normal_vector(n);
  const VectorXd r_star = cx.llt.matrixL() * rng.normal_vector(n);

  Simulated s;
  s.data.A = r_a + rng.normal_vector(n);
  s.data.Y = r_star + r_a + s.data.A + rng.normal_vector(n);
  s.data.X = std::move(X);
  s.truth.estimand = 1.0;
  s.truth.gamma = 1.0;
  return s;
}

}  // namespace dogma::simlab
