#include "dogma/core/linalg.hpp"

#include "dogma/core/error.hpp"

#include <cmath>
#include <sstream>

namespace dogma {

double JitteredCholesky::log_det() const {
  const auto& L = llt.matrixLLT();
  double s = 0.0;
  for (Eigen::Index i = 0; i < L.rows(); ++i) s += std::log(L(i, i));
  return 2.0 * s;
}

JitteredCholesky jittered_cholesky(const Eigen::MatrixXd& K, double first, double max_jitter) {
  if (!all_finite(K)) throw NumericError("jittered_cholesky: non-finite matrix entries");
  const Eigen::Index n = K.rows();
  JitteredCholesky out;
  for (double jitter = first; jitter <= max_jitter * (1.0 + 1e-12); jitter *= 10.0) {
    Eigen::MatrixXd A = K;
    A.diagonal().array() += jitter;
    out.llt.compute(A);
    if (out.llt.info() == Eigen::Success) {
      const auto& L = out.llt.matrixLLT();
      bool ok = true;
      for (Eigen::Index i = 0; i < n && ok; ++i) ok = L(i, i) > 0.0 && std::isfinite(L(i, i));
      if (ok) {
        out.jitter = jitter;
        return out;
      }
    }
    if (jitter == 0.0) jitter = first > 0.0 ? first / 10.0 : 1e-11;
  }
  std::ostringstream msg;
  msg << "jittered_cholesky: factorization failed with jitter up to " << max_jitter;
  throw NumericError(msg.str());
}

double relative_asymmetry(const Eigen::MatrixXd& S) {
  if (S.size() == 0) return 0.0;
  const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
  return (S - S.transpose()).cwiseAbs().maxCoeff() / scale;
}

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

}  // namespace dogma
