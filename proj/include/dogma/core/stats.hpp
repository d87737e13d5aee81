#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace dogma {

double normal_pdf(double x);
double normal_cdf(double x);
/// Inverse standard normal CDF, accurate to ~1e-15 after one Halley step.
double normal_quantile(double p);

double mean(std::span<const double> xs);
/// Unbiased (n-1) sample variance; 0 for n < 2.
double sample_variance(std::span<const double> xs);
double sample_sd(std::span<const double> xs);
/// Linear-interpolation quantile (Hyndman-Fan type 7) of an unsorted sample.
double quantile(std::span<const double> xs, double p);

inline std::span<const double> as_span(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

/// Mean and its standard error.
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_and_se(std::span<const double> xs);

}  // namespace dogma
