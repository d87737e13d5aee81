#pragma once

// Random-matrix calculators: empirical spectra, Stieltjes transforms, the
// Marchenko-Pastur density and the closed-form asymptotic bias of ridge-type
// estimators of a treatment coefficient.
//
// All spectra are finite empirical ones. F denotes the spectrum of X X^T / N
// (N eigenvalues), G the companion spectrum of X^T X / N (P eigenvalues,
// including the P - rank exact zeros).

#include "dogma/core/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

namespace dogma::spectra {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Eigenvalue multiset with cached first and second moments.
template <typename Scalar>
class SpectrumSummary {
 public:
  SpectrumSummary() = default;

  /// Eigenvalues in [-tol, 0) are clamped to zero; anything below is rejected.
  /// `tol` is relative to max(1, largest eigenvalue).
  static SpectrumSummary from_eigenvalues(Vector<Scalar> values, Scalar tol = Scalar(1e-10)) {
    require(values.size() > 0, "SpectrumSummary: empty spectrum");
    require(values.allFinite(), "SpectrumSummary: non-finite eigenvalue");
    const Scalar scale = std::max(Scalar(1), values.maxCoeff());
    for (auto& x : values) {
      if (x < Scalar(0)) {
        if (x < -tol * scale) {
          std::ostringstream msg;
          msg << "SpectrumSummary: eigenvalue " << static_cast<double>(x) << " is negative beyond tolerance";
          throw ArgumentError(msg.str());
        }
        x = Scalar(0);
      }
    }
    std::sort(values.begin(), values.end(), [](Scalar a, Scalar b) { return a > b; });
    SpectrumSummary s;
    s.eigenvalues_ = std::move(values);
    s.mean_eig_ = s.eigenvalues_.mean();
    s.mean_sq_eig_ = s.eigenvalues_.squaredNorm() / static_cast<Scalar>(s.eigenvalues_.size());
    return s;
  }

  static SpectrumSummary constant(Eigen::Index dim, Scalar value) {
    return from_eigenvalues(Vector<Scalar>::Constant(dim, value));
  }

  /// Nonincreasing.
  const Vector<Scalar>& eigenvalues() const noexcept { return eigenvalues_; }
  Eigen::Index dim() const noexcept { return eigenvalues_.size(); }
  Scalar mean_eig() const noexcept { return mean_eig_; }
  Scalar mean_sq_eig() const noexcept { return mean_sq_eig_; }

  /// Recomputes the moments and compares them with the cache.
  bool moments_consistent(Scalar rel_tol = Scalar(1e-12)) const {
    const Scalar n = static_cast<Scalar>(dim());
    const Scalar m1 = eigenvalues_.sum() / n;
    const Scalar m2 = eigenvalues_.array().square().sum() / n;
    auto close = [&](Scalar a, Scalar b) { return std::abs(a - b) <= rel_tol * std::max(Scalar(1), std::abs(b)); };
    return close(m1, mean_eig_) && close(m2, mean_sq_eig_);
  }

 private:
  Vector<Scalar> eigenvalues_;
  Scalar mean_eig_{0};
  Scalar mean_sq_eig_{0};
};

using Spectrum = SpectrumSummary<double>;

/// Inputs of the asymptotic bias formulas.
struct BiasInputs {
  double ridge_penalty = 1.0;  // lambda
  double eta = 1.0;            // r / tau^2
  double aspect_ratio = 1.0;   // r = P / N
  double omega0 = 1.0;
  std::optional<double> tau2;

  /// Sets eta = r / tau2.
  static BiasInputs from_tau2(double lambda, double r, double tau2, double omega0) {
    require(tau2 > 0.0, "BiasInputs: tau2 must be positive");
    require(r > 0.0, "BiasInputs: aspect ratio must be positive");
    return BiasInputs{lambda, r / tau2, r, omega0, tau2};
  }

  void validate() const {
    require(ridge_penalty > 0.0, "BiasInputs: ridge penalty must be positive");
    require(eta > 0.0, "BiasInputs: eta must be positive");
    require(aspect_ratio > 0.0, "BiasInputs: aspect ratio must be positive");
    if (tau2) {
      require(*tau2 > 0.0, "BiasInputs: tau2 must be positive");
      const double implied = aspect_ratio / *tau2;
      require(std::abs(eta - implied) <= 1e-12 * std::abs(implied), "BiasInputs: eta != r / tau2");
    }
  }
};

/// All eigenvalues of a symmetric PSD matrix, nonincreasing.
template <typename Derived>
SpectrumSummary<typename Derived::Scalar> empirical_spectrum(const Eigen::MatrixBase<Derived>& S) {
  using Scalar = typename Derived::Scalar;
  require(S.rows() == S.cols(), "empirical_spectrum: matrix is not square");
  require(S.rows() > 0, "empirical_spectrum: empty matrix");
  const Matrix<Scalar> M = S;
  require(M.allFinite(), "empirical_spectrum: non-finite entries");
  const Scalar scale = std::max(Scalar(1), M.cwiseAbs().maxCoeff());
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-8) * scale)
    throw ArgumentError("empirical_spectrum: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(M, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError("empirical_spectrum: eigen-decomposition failed");
  return SpectrumSummary<Scalar>::from_eigenvalues(es.eigenvalues());
}

/// F (spectrum of X X^T / N) and G (spectrum of X^T X / N) from one SVD of X.
template <typename Scalar>
struct SampleSpectra {
  SpectrumSummary<Scalar> outer;  // F: N eigenvalues
  SpectrumSummary<Scalar> inner;  // G: P eigenvalues
};

template <typename Derived>
SampleSpectra<typename Derived::Scalar> sample_spectra(const Eigen::MatrixBase<Derived>& X) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  require(n > 0 && p > 0, "sample_spectra: empty design");
  const Matrix<Scalar> Xm = X;
  Eigen::BDCSVD<Matrix<Scalar>> svd(Xm);
  const Vector<Scalar> sq = svd.singularValues().array().square() / static_cast<Scalar>(n);
  Vector<Scalar> f = Vector<Scalar>::Zero(n);
  Vector<Scalar> g = Vector<Scalar>::Zero(p);
  f.head(sq.size()) = sq;
  g.head(sq.size()) = sq;
  return {SpectrumSummary<Scalar>::from_eigenvalues(f), SpectrumSummary<Scalar>::from_eigenvalues(g)};
}

/// v(-lambda) = (1/dim) sum_i 1 / (x_i + lambda).
template <typename Scalar>
Scalar stieltjes(const SpectrumSummary<Scalar>& spec, Scalar lambda) {
  require(lambda > Scalar(0), "stieltjes: lambda must be positive");
  return (spec.eigenvalues().array() + lambda).inverse().mean();
}

/// psi_jk = (1/dim) sum_i x_i^k / (x_i + lambda)^j, evaluated directly.
template <typename Scalar>
Scalar psi_moment(const SpectrumSummary<Scalar>& spec, int j, int k, Scalar lambda) {
  require(j >= 1, "psi_moment: j must be >= 1");
  require(k >= 0, "psi_moment: k must be >= 0");
  require(lambda > Scalar(0), "psi_moment: lambda must be positive");
  const auto& x = spec.eigenvalues().array();
  return (x.pow(Scalar(k)) / (x + lambda).pow(Scalar(j))).mean();
}

/// Table of psi_jk for 0 <= j <= max_j, 0 <= k <= max_k built from the seeds
/// psi_j0 = (1/dim) sum (x + lambda)^-j and psi_0k = (1/dim) sum x^k with the
/// recursion psi_jk = psi_{j-1,k-1} - lambda psi_{j,k-1}.
template <typename Scalar>
class PsiTable {
 public:
  PsiTable(const SpectrumSummary<Scalar>& spec, int max_j, int max_k, Scalar lambda)
      : max_k_(max_k), values_(static_cast<std::size_t>((max_j + 1) * (max_k + 1))) {
    require(max_j >= 1 && max_k >= 0, "PsiTable: bad extents");
    require(lambda > Scalar(0), "PsiTable: lambda must be positive");
    const auto& x = spec.eigenvalues().array();
    for (int k = 0; k <= max_k; ++k) at(0, k) = x.pow(Scalar(k)).mean();
    for (int j = 1; j <= max_j; ++j) {
      at(j, 0) = (x + lambda).pow(Scalar(-j)).mean();
      for (int k = 1; k <= max_k; ++k) at(j, k) = at(j - 1, k - 1) - lambda * at(j, k - 1);
    }
  }

  Scalar operator()(int j, int k) const { return values_[index(j, k)]; }

 private:
  std::size_t index(int j, int k) const { return static_cast<std::size_t>(j * (max_k_ + 1) + k); }
  Scalar& at(int j, int k) { return values_[index(j, k)]; }

  int max_k_;
  std::vector<Scalar> values_;
};

template <typename Scalar>
Scalar psi_moment_recursive(const SpectrumSummary<Scalar>& spec, int j, int k, Scalar lambda) {
  require(j >= 1, "psi_moment_recursive: j must be >= 1");
  require(k >= 0, "psi_moment_recursive: k must be >= 0");
  return PsiTable<Scalar>(spec, j, k, lambda)(j, k);
}

/// Support (a, b) = (1 -/+ sqrt(1/r))^2 of the Marchenko-Pastur law.
inline std::pair<double, double> mp_support(double r) {
  if (!(r >= 1.0)) throw UnsupportedRegimeError("mp_support: density form requires r >= 1");
  const double s = std::sqrt(1.0 / r);
  return {(1.0 - s) * (1.0 - s), (1.0 + s) * (1.0 + s)};
}

/// q(x) = r sqrt((b - x)(x - a)) / (2 pi x) on (a, b), zero elsewhere.
///
/// This is the limiting eigenvalue density of X X^T / P for an N x P standard
/// Gaussian X with P / N -> r >= 1; the spectrum of X X^T / N is the same law
/// dilated by r. The factor r makes q integrate to one.
inline double mp_density(double r, double x) {
  const auto [a, b] = mp_support(r);
  if (!(x > a && x < b)) return 0.0;
  return r * std::sqrt((b - x) * (x - a)) / (2.0 * std::numbers::pi * x);
}

/// Probability mass of the Marchenko-Pastur law on [lo, hi], by Simpson's rule
/// after the substitution x = c - d cos(t), which removes the edge singularities.
inline double mp_mass(double r, double lo, double hi, int panels = 64) {
  const auto [a, b] = mp_support(r);
  lo = std::max(lo, a);
  hi = std::min(hi, b);
  if (!(hi > lo)) return 0.0;
  const double c = 0.5 * (a + b), d = 0.5 * (b - a);
  auto angle = [&](double x) { return std::acos(std::clamp((c - x) / d, -1.0, 1.0)); };
  // dx = d sin(t) dt and sqrt((b - x)(x - a)) = d sin(t)
  auto f = [&](double t) {
    const double x = c - d * std::cos(t);
    const double s = std::sin(t);
    return x > 0.0 ? d * d * s * s / (2.0 * std::numbers::pi * x) : d * (1.0 + std::cos(t)) / (2.0 * std::numbers::pi);
  };
  const double t0 = angle(lo), t1 = angle(hi);
  const int m = 2 * std::max(1, panels / 2);
  const double h = (t1 - t0) / m;
  double sum = f(t0) + f(t1);
  for (int i = 1; i < m; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(t0 + i * h);
  return r * sum * h / 3.0;
}

/// Equal-width histogram of `values` on [lo, hi], normalized by the total count.
struct Histogram {
  std::vector<double> edges;
  std::vector<double> density;
  double outside = 0.0;  // fraction of values outside [lo, hi]
};

inline Histogram histogram(const std::vector<double>& values, double lo, double hi, int bins) {
  require(bins >= 1 && hi > lo, "histogram: need bins >= 1 and hi > lo");
  require(!values.empty(), "histogram: no values");
  Histogram h;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int k = 0; k <= bins; ++k) h.edges[static_cast<std::size_t>(k)] = lo + (hi - lo) * k / bins;
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  double out = 0.0;
  for (double v : values) {
    if (v < lo || v > hi) {
      out += 1.0;
      continue;
    }
    const auto k = std::min(bins - 1, static_cast<int>((v - lo) / (hi - lo) * bins));
    counts[static_cast<std::size_t>(k)] += 1.0;
  }
  const double total = static_cast<double>(values.size()), width = (hi - lo) / bins;
  h.density.resize(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) h.density[k] = counts[k] / (total * width);
  h.outside = out / total;
  return h;
}

/// L1 distance between a histogram on the Marchenko-Pastur support and the law:
/// sum_k |mass_k - q mass_k| plus the histogram mass outside the bins.
inline double mp_l1_distance(const Histogram& h, double r) {
  double l1 = h.outside;
  for (std::size_t k = 0; k < h.density.size(); ++k) {
    const double w = h.edges[k + 1] - h.edges[k];
    l1 += std::abs(h.density[k] * w - mp_mass(r, h.edges[k], h.edges[k + 1]));
  }
  return l1;
}

/// Asymptotic bias of the naive ridge estimator of the treatment coefficient:
/// omega0 (1 - lambda v) / (1 - (lambda - eta) v) with v = v(-lambda) over F.
template <typename Scalar>
Scalar naive_ridge_bias(const SpectrumSummary<Scalar>& spec_f, const BiasInputs& in) {
  in.validate();
  const Scalar lambda = static_cast<Scalar>(in.ridge_penalty);
  const Scalar eta = static_cast<Scalar>(in.eta);
  const Scalar v = stieltjes(spec_f, lambda);
  const Scalar den = Scalar(1) - (lambda - eta) * v;
  if (std::abs(den) <= Scalar(1e-12)) throw DegeneracyError("naive_ridge_bias: denominator is numerically zero");
  return static_cast<Scalar>(in.omega0) * (Scalar(1) - lambda * v) / den;
}

/// Same quantity in integral form: omega0 int x/(x+lambda) dF / int (x+eta)/(x+lambda) dF.
template <typename Scalar>
Scalar naive_ridge_bias_integral(const SpectrumSummary<Scalar>& spec_f, const BiasInputs& in) {
  in.validate();
  const Scalar lambda = static_cast<Scalar>(in.ridge_penalty);
  const Scalar eta = static_cast<Scalar>(in.eta);
  const auto& x = spec_f.eigenvalues().array();
  const Scalar num = (x / (x + lambda)).mean();
  const Scalar den = ((x + eta) / (x + lambda)).mean();
  if (std::abs(den) <= Scalar(1e-12)) throw DegeneracyError("naive_ridge_bias_integral: denominator is numerically zero");
  return static_cast<Scalar>(in.omega0) * num / den;
}

/// Asymptotic bias of the two-stage Z-prior estimator whose clever covariate
/// X phi_hat comes from a ridge fit of A on X at the same penalty lambda.
/// spec_g must be the companion spectrum (P eigenvalues, zeros retained).
template <typename Scalar>
Scalar zprior_ridge_bias(const SpectrumSummary<Scalar>& spec_g, const BiasInputs& in) {
  in.validate();
  if (!(in.aspect_ratio > 1.0)) throw UnsupportedRegimeError("zprior_ridge_bias: requires r > 1");
  if (in.ridge_penalty < 1e-3)
    throw OutOfDomainError("zprior_ridge_bias: lambda < 1e-3; the Z-prior bias is ill-behaved near zero");
  const Scalar lambda = static_cast<Scalar>(in.ridge_penalty);
  const Scalar eta = static_cast<Scalar>(in.eta);
  const Scalar r = static_cast<Scalar>(in.aspect_ratio);
  const PsiTable<Scalar> psi(spec_g, 3, 3, lambda);

  const Scalar cross = psi(2, 1) + psi(2, 2) / eta;
  const Scalar curv = psi(3, 2) + psi(3, 3) / eta;
  if (std::abs(curv) <= Scalar(1e-300)) throw DegeneracyError("zprior_ridge_bias: degenerate spectrum");
  const Scalar num = static_cast<Scalar>(in.omega0) * lambda * (psi(1, 1) / eta - (psi(2, 2) / eta) * cross / curv);
  const Scalar den = (Scalar(1) - r) / r + lambda * (psi(1, 0) + psi(1, 1) / eta - cross * cross / curv);
  if (std::abs(den) <= Scalar(1e-12)) throw DegeneracyError("zprior_ridge_bias: denominator is numerically zero");
  return num / den;
}

/// Probability limit of Delta(1) under the random-effects model:
/// omega0 tau2 mean_eig / (1 + tau2 mean_eig).
inline double delta_limit(double omega0, double tau2, double mean_eig) {
  require(tau2 > 0.0, "delta_limit: tau2 must be positive");
  require(mean_eig > 0.0, "delta_limit: mean eigenvalue must be positive");
  const double s = tau2 * mean_eig;
  return omega0 * s / (1.0 + s);
}

}  // namespace dogma::spectra
