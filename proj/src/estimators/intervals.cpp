#include "dogma/estimators/intervals.hpp"

#include "dogma/core/error.hpp"
#include "dogma/core/stats.hpp"

namespace dogma {

std::pair<double, double> credible_interval(double mean, double sd, double level) {
  require(level > 0.0 && level < 1.0, "credible_interval: level must lie in (0, 1)");
  require(sd >= 0.0, "credible_interval: sd must be nonnegative");
  const double z = normal_quantile(0.5 * (1.0 + level));
  return {mean - z * sd, mean + z * sd};
}

std::pair<double, double> credible_interval(std::span<const double> draws, double level) {
  require(level > 0.0 && level < 1.0, "credible_interval: level must lie in (0, 1)");
  if (draws.size() < 10) throw InsufficientSampleError("credible_interval: fewer than 10 draws");
  const double tail = 0.5 * (1.0 - level);
  return {quantile(draws, tail), quantile(draws, 1.0 - tail)};
}

}  // namespace dogma
