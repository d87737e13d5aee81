#pragma once

#include <Eigen/Dense>

namespace dogma {

/// Cholesky factor of K + jitter*I where jitter starts at `first` and grows x10
/// until the factorization succeeds or exceeds `max_jitter` (then NumericError).
struct JitteredCholesky {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return llt.solve(b); }
  double log_det() const;
};

JitteredCholesky jittered_cholesky(const Eigen::MatrixXd& K, double first = 1e-10, double max_jitter = 1e-6);

/// Relative asymmetry ||S - S^T||_max / max(1, ||S||_max).
double relative_asymmetry(const Eigen::MatrixXd& S);

bool all_finite(const Eigen::MatrixXd& m);

}  // namespace dogma
