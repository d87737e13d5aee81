#include "dogma/core/optimize.hpp"

#include "dogma/core/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace dogma {

SimplexResult nelder_mead_maximize(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                                   double step, double ftol, int max_evals) {
  const Eigen::Index d = x0.size();
  require(d >= 1, "nelder_mead: empty parameter vector");
  require(step > 0.0 && ftol > 0.0 && max_evals > 0, "nelder_mead: bad tuning constants");

  SimplexResult res;
  // Work with g = -f so the textbook minimization steps read naturally.
  auto g = [&](const Eigen::VectorXd& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
  };

  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(d + 1), x0);
  std::vector<double> vals(static_cast<std::size_t>(d + 1));
  for (Eigen::Index i = 0; i < d; ++i) pts[static_cast<std::size_t>(i + 1)][i] += step;
  for (std::size_t i = 0; i < pts.size(); ++i) vals[i] = g(pts[i]);

  std::vector<std::size_t> order(pts.size());
  while (res.evaluations < max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];
    if (std::isfinite(vals[worst]) && vals[worst] - vals[best] < ftol) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (i != worst) centroid += pts[i];
    centroid /= static_cast<double>(d);

    const Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
    const double fr = g(xr);
    if (fr < vals[best]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = g(xe);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    const Eigen::VectorXd xc =
        outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid)) : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = g(xc);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = xc;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i == best) continue;
      pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
      vals[i] = g(pts[i]);
    }
  }
  const auto it = std::min_element(vals.begin(), vals.end());
  const auto k = static_cast<std::size_t>(it - vals.begin());
  res.x = pts[k];
  res.value = -vals[k];
  return res;
}

}  // namespace dogma
