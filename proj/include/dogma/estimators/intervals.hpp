#pragma once

#include <span>
#include <utility>

namespace dogma {

/// mean -/+ z_{(1+level)/2} sd.
std::pair<double, double> credible_interval(double mean, double sd, double level);

/// Equal-tailed empirical quantiles; at least 10 draws.
std::pair<double, double> credible_interval(std::span<const double> draws, double level);

}  // namespace dogma
