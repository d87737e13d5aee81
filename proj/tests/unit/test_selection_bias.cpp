#include "dogma/core/error.hpp"
#include "dogma/core/linalg.hpp"
#include "dogma/core/random.hpp"
#include "dogma/core/stats.hpp"
#include "dogma/selection_bias.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace dogma;
using namespace dogma::selection_bias;

namespace {

LinearModelPair pair_of(VectorXd beta, VectorXd phi, double sigma2_a = 1.0) {
  LinearModelPair m;
  m.beta = std::move(beta);
  m.phi = std::move(phi);
  m.sigma2_a = sigma2_a;
  return m;
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

FunctionalPair probit_pair(Index p) {
  FunctionalPair f;
  f.dim = p;
  f.sampler = standard_normal_sampler(p);
  f.outcome = [](const Eigen::Ref<const VectorXd>& x) { return x[0]; };
  f.propensity = [](const Eigen::Ref<const VectorXd>& x) { return normal_cdf(x[0]); };
  return f;
}

}  // namespace

TEST(DeltaLinear, HandValues) {
  const auto cov = CovarianceModel::isotropic(2);
  EXPECT_EQ(delta_linear(1.7, pair_of(Eigen::Vector2d(1, 2), VectorXd::Zero(2)), cov), 0.0);
  EXPECT_DOUBLE_EQ(delta_linear(1.0, pair_of(Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 0)), cov), 0.5);
  EXPECT_THROW(delta_linear(1.0, pair_of(VectorXd::Ones(3), VectorXd::Ones(3)), cov), ArgumentError);
}

TEST(DeltaLinear, LinearInExposure) {
  Rng rng(1);
  const auto cov = CovarianceModel::isotropic(6, 1.3);
  const auto m = pair_of(rng.normal_vector(6), rng.normal_vector(6));
  const double d1 = delta_linear(1.0, m, cov);
  for (double a : {-2.0, 0.5, 3.0}) EXPECT_EQ(delta_linear(a, m, cov), a * d1);
}

TEST(DeltaLinear, MatchesDefinitionalMonteCarlo) {
  Rng rng(2);
  const MatrixXd G = rng.normal_matrix(3, 3);
  const auto cov = CovarianceModel::explicit_matrix(G * G.transpose() + 0.5 * MatrixXd::Identity(3, 3));
  LinearModelPair m = pair_of(Eigen::Vector3d(0.8, -0.3, 0.5), Eigen::Vector3d(0.4, 0.6, -0.2), 1.5);
  m.gamma = 1.0;
  const double truth = delta_linear(1.0, m, cov);

  // E[Y(1) | A = a] - E[Y(1)] is linear in a for Gaussian (X, A, Y(1)); estimate its slope.
  const Index n = 1000000;
  const MatrixXd X = cov.sample(n, rng);
  const VectorXd A = X * m.phi + std::sqrt(m.sigma2_a) * rng.normal_vector(n);
  const VectorXd Y1 = X * m.beta + VectorXd::Constant(n, m.gamma) + rng.normal_vector(n);
  const VectorXd ac = A.array() - A.mean();
  const VectorXd yc = Y1.array() - Y1.mean();
  const double slope = ac.dot(yc) / ac.squaredNorm();
  const VectorXd resid = yc - slope * ac;
  const double se = std::sqrt(resid.squaredNorm() / (n - 2.0) / ac.squaredNorm());
  EXPECT_NEAR(slope, truth, 3.0 * se);
}

TEST(DeltaLinear, EigenFormAgrees) {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const Index p = 2 + trial % 19;
    const MatrixXd G = rng.normal_matrix(p, p);
    const MatrixXd S = G * G.transpose() / static_cast<double>(p);
    const auto m = pair_of(rng.normal_vector(p), rng.normal_vector(p), 0.7);
    const double a = delta_linear(1.3, m, CovarianceModel::explicit_matrix(S));
    EXPECT_NEAR(delta_eigen(1.3, m, S), a, 1e-10 * std::max(1.0, std::abs(a)));
  }
}

TEST(DeltaLinear, LatentFactorQuadFormMatchesDense) {
  Rng rng(4);
  const MatrixXd L = rng.normal_matrix(12, 3);
  const auto lf = CovarianceModel::latent_factor(L, 0.4);
  const auto dense = CovarianceModel::explicit_matrix(L * L.transpose() + 0.16 * MatrixXd::Identity(12, 12));
  const auto m = pair_of(rng.normal_vector(12), rng.normal_vector(12));
  EXPECT_NEAR(delta_linear(1.0, m, lf), delta_linear(1.0, m, dense), 1e-12);
}

TEST(DeltaSparse, HandValues) {
  EXPECT_EQ(delta_sparse(1.0, Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1), 1.0, 1.0), 0.0);
  EXPECT_NEAR(delta_sparse(1.0, Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 1), 1.0, 1.0), 1.0 / 3.0, 1e-15);
}

TEST(DeltaSparse, AgreesWithLinear) {
  Rng rng(5);
  VectorXd beta = VectorXd::Zero(50), phi = VectorXd::Zero(50);
  for (Index j = 0; j < 50; ++j) {
    if (rng.bernoulli(0.2)) beta[j] = rng.normal();
    if (rng.bernoulli(0.2)) phi[j] = rng.normal();
  }
  const double s = delta_sparse(0.9, beta, phi, 2.0, 1.2);
  const double l = delta_linear(0.9, pair_of(beta, phi, 1.2), CovarianceModel::isotropic(50, 2.0));
  EXPECT_NEAR(s, l, 1e-12 * std::max(1.0, std::abs(l)));
}

TEST(DeltaFunctional, ZeroCovariance) {
  FunctionalPair f = probit_pair(2);
  f.outcome = [](const Eigen::Ref<const VectorXd>&) { return 3.0; };
  auto e = delta_functional(f, 5000, 1);
  EXPECT_NEAR(e.estimate, 0.0, 1e-12);

  f = probit_pair(2);
  f.propensity = [](const Eigen::Ref<const VectorXd>&) { return 0.3; };
  e = delta_functional(f, 5000, 1);
  EXPECT_NEAR(e.estimate, 0.0, 1e-12);
}

TEST(DeltaFunctional, ProbitOracle) {
  // Cov(X, Phi(X)) = E[pdf(X)] = 1 / (2 sqrt(pi)) and E[Phi(X)] = 1/2.
  const double truth = 1.0 / std::sqrt(std::numbers::pi);
  const auto e = delta_functional(probit_pair(1), 200000, 7);
  EXPECT_NEAR(e.estimate, truth, 3.0 * e.mc_se);
  EXPECT_GT(e.mc_se, 0.0);
}

TEST(DeltaFunctional, DegeneratePropensity) {
  FunctionalPair f = probit_pair(1);
  f.propensity = [](const Eigen::Ref<const VectorXd>&) { return 1e-9; };
  EXPECT_THROW(delta_functional(f, 1000, 1), DegeneracyError);
}

TEST(CltScale, IdentityCovariance) {
  EXPECT_DOUBLE_EQ(clt_scale(2.0, RidgePrior{3.0, 1.5}, VectorXd::Ones(10)), 4.0 * 2.0 / 10.0);
  EXPECT_DOUBLE_EQ(clt_scale(1.0, RidgePrior{1.0, 1.0}, VectorXd::Ones(400)), 1.0 / 400.0);
  EXPECT_THROW(clt_scale(1.0, RidgePrior{}, VectorXd::Zero(4)), DegeneracyError);
}

TEST(PriorDeltaDraws, ConcentrationMatchesClt) {
  PriorSpec prior{RidgePrior{1.0, 1.0}, std::nullopt, 1.0};
  const auto d = prior_delta_draws(prior, CovarianceModel::isotropic(400), 1.0, 2000, 11);
  const double sd = sample_sd(d);
  EXPECT_NEAR(sd / std::sqrt(clt_scale(1.0, RidgePrior{1.0, 1.0}, VectorXd::Ones(400))), 1.0, 0.1);
}

TEST(PriorDeltaDraws, ScalarCaseMatchesHandSimulation) {
  const RidgePrior rp{2.0, 0.5};
  PriorSpec prior{rp, std::nullopt, 1.0};
  const auto d = prior_delta_draws(prior, CovarianceModel::isotropic(1), 1.5, 20000, 3);
  Rng rng(99);
  std::vector<double> oracle;
  for (int i = 0; i < 100000; ++i) {
    const double phi = std::sqrt(rp.tau2_phi) * rng.normal();
    const double beta = std::sqrt(rp.tau2_beta) * rng.normal();
    oracle.push_back(1.5 * phi * beta / (1.0 + phi * phi));
  }
  EXPECT_LT(ks_distance(d, oracle), 0.05);
}

TEST(PriorDeltaDraws, ShiftMean) {
  const double omega = 0.8;
  PriorSpec prior{RidgePrior{1.0, 1.0}, omega, 1.0};
  const auto cov = CovarianceModel::isotropic(5);
  const auto d = prior_delta_draws(prior, cov, 1.0, 20000, 5);
  const MeanSe est = mean_and_se(d);
  Rng rng(123);
  std::vector<double> ratio;
  for (int i = 0; i < 20000; ++i) {
    const VectorXd phi = rng.normal_vector(5);
    ratio.push_back(omega * phi.squaredNorm() / (1.0 + phi.squaredNorm()));
  }
  const MeanSe orc = mean_and_se(ratio);
  EXPECT_NEAR(est.mean, orc.mean, 3.0 * std::hypot(est.se, orc.se));
}

TEST(PriorDeltaDraws, Reproducible) {
  PriorSpec prior{RidgePrior{}, std::nullopt, 1.0};
  const auto a = prior_delta_draws(prior, CovarianceModel::isotropic(7), 1.0, 1, 42);
  const auto b = prior_delta_draws(prior, CovarianceModel::isotropic(7), 1.0, 1, 42);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0], b[0]);
}

TEST(PriorDeltaDraws, LatentFactorScalesWithFactors) {
  PriorSpec prior{RidgePrior{}, std::nullopt, 1.0};
  Rng rng(8);
  const auto c200 = CovarianceModel::latent_factor(rng.normal_matrix(200, 5), 1e-3);
  const auto c400 = CovarianceModel::latent_factor(rng.normal_matrix(400, 5), 1e-3);
  const double s200 = sample_sd(prior_delta_draws(prior, c200, 1.0, 2000, 1));
  const double s400 = sample_sd(prior_delta_draws(prior, c400, 1.0, 2000, 2));
  EXPECT_NEAR(s200 / s400, 1.0, 0.15);
}

TEST(PriorDeltaDraws, SparseNegligibleInHighDimension) {
  auto sd_at = [](Index p) {
    const double q = 10.0 / static_cast<double>(p);
    PriorSpec prior{SpikeSlabPrior{q, q, 1.0, 1.0}, std::nullopt, 1.0};
    return sample_sd(prior_delta_draws(prior, CovarianceModel::isotropic(p), 1.0, 20000, 17));
  };
  EXPECT_GE(sd_at(40) / sd_at(400), 3.0);
}

TEST(PriorDeltaDraws, GpVarianceMatchesU) {
  const double tau2 = 1.0;
  const auto v = gp_delta_variance(linear_kernel(), tau2, probit_pair(1), 2000, 21);
  GpPrior gp;
  gp.kernel = linear_kernel();
  gp.tau2_beta = tau2;
  gp.propensity = [](const Eigen::Ref<const VectorXd>& x) { return normal_cdf(x[0]); };
  gp.support_points = 200;
  PriorSpec prior{gp, std::nullopt, 1.0};
  const auto d = prior_delta_draws(prior, CovarianceModel::isotropic(1), 1.0, 1000, 22);
  EXPECT_NEAR(sample_variance(d) / v.c, 1.0, 0.15);
}

TEST(PriorDeltaDraws, RejectsBadPrior) {
  PriorSpec prior{SpikeSlabPrior{1.5, 0.1, 1.0, 1.0}, std::nullopt, 1.0};
  EXPECT_THROW(prior_delta_draws(prior, CovarianceModel::isotropic(3), 1.0, 10, 1), ArgumentError);
}

TEST(CenteredKernel, ConstantKernelVanishes) {
  Rng rng(1);
  const KernelFn c = [](const Eigen::Ref<const VectorXd>&, const Eigen::Ref<const VectorXd>&) { return 2.5; };
  EXPECT_LT(centered_kernel(c, rng.normal_matrix(6, 2)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(CenteredKernel, TwoPointHandValue) {
  MatrixXd x(2, 1);
  x << 0.0, 1.0;
  const double k = std::exp(-0.5);
  const MatrixXd c = centered_kernel(gaussian_kernel_isotropic(1.0), x);
  EXPECT_NEAR(c(0, 0), (1.0 - k) / 2.0, 1e-15);
  EXPECT_NEAR(c(0, 1), -(1.0 - k) / 2.0, 1e-15);
  EXPECT_NEAR(c(1, 1), (1.0 - k) / 2.0, 1e-15);
}

TEST(CenteredKernel, RowsSumToZero) {
  Rng rng(2);
  const MatrixXd c = centered_kernel(gaussian_kernel_isotropic(2.0), rng.normal_matrix(40, 3));
  EXPECT_LT(c.rowwise().sum().cwiseAbs().maxCoeff(), 1e-8 * c.cwiseAbs().maxCoeff());
  EXPECT_LT(c.colwise().sum().cwiseAbs().maxCoeff(), 1e-8 * c.cwiseAbs().maxCoeff());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(c);
  EXPECT_GT(es.eigenvalues().minCoeff(), -1e-10);
}

TEST(GpDeltaVariance, ConstantPropensity) {
  FunctionalPair f = probit_pair(2);
  f.propensity = [](const Eigen::Ref<const VectorXd>&) { return 0.4; };
  EXPECT_NEAR(gp_delta_variance(gaussian_kernel_isotropic(1.0), 1.0, f, 500, 3).c, 0.0, 1e-14);
}

TEST(GpDeltaVariance, LinearKernelOracle) {
  // c = tau2 Cov(X, Phi(X))^2 / E[Phi(X)]^2 = tau2 / pi.
  const auto v = gp_delta_variance(linear_kernel(), 1.0, probit_pair(1), 3000, 4);
  EXPECT_NEAR(v.c, 1.0 / std::numbers::pi, 3.0 * v.mc_se);
}

TEST(GpDeltaVariance, ProportionalToScale) {
  const auto a = gp_delta_variance(gaussian_kernel_isotropic(1.0), 1.0, probit_pair(2), 300, 5);
  const auto b = gp_delta_variance(gaussian_kernel_isotropic(1.0), 2.0, probit_pair(2), 300, 5);
  EXPECT_NEAR(b.c, 2.0 * a.c, 1e-14 * std::abs(a.c));
}

TEST(KernelDecay, DecaysInDimension) {
  KernelDecayOptions opt;
  opt.rule = BandwidthRule::isotropic;
  opt.scale = 1.0;
  opt.n_draws = 1500;
  const auto curve = kernel_decay_curve([](Index p) { return CovarianceModel::isotropic(p); }, probit_pair, {2, 4, 8, 16},
                                        opt, 9);
  EXPECT_LT(curve.slope, -0.05);
  EXPECT_GT(curve.slope_se, 0.0);
  EXPECT_GT(curve.min_mean_propensity, 0.4);
}

TEST(KernelDecay, PermutationInvariant) {
  const Index p = 4;
  const std::vector<Index> perm{2, 0, 3, 1};
  FunctionalPair base = probit_pair(p);
  FunctionalPair shuffled = base;
  shuffled.sampler = [perm, p, s = base.sampler](Index n, Rng& rng) {
    const MatrixXd x = s(n, rng);
    MatrixXd y(n, p);
    for (Index j = 0; j < p; ++j) y.col(perm[static_cast<std::size_t>(j)]) = x.col(j);
    return y;
  };
  shuffled.propensity = [perm](const Eigen::Ref<const VectorXd>& x) { return normal_cdf(x[perm[0]]); };
  const auto a = gp_delta_variance(gaussian_kernel_isotropic(1.0), 1.0, base, 400, 6);
  const auto b = gp_delta_variance(gaussian_kernel_isotropic(1.0), 1.0, shuffled, 400, 6);
  EXPECT_NEAR(a.c, b.c, 1e-12 * std::abs(a.c));
}

TEST(KernelDecay, RequiresThreeDimensions) {
  EXPECT_THROW(kernel_decay_curve([](Index p) { return CovarianceModel::isotropic(p); }, probit_pair, {2, 4}, {}, 1),
               ArgumentError);
}
