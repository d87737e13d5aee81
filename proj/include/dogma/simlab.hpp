#pragma once

// Data-generating processes for the simulation studies, a seeded replication
// engine and metric aggregation.

#include "dogma/estimators/dataset.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dogma::simlab {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Study { ridge, sas, gp, factor, manifold };
Study parse_study(std::string_view tag);
std::string_view to_string(Study s);

/// Default method list of a study.
std::vector<std::string> default_methods(Study s);
/// Setting tags recognised by a study; empty when any tag is accepted.
std::vector<std::string> known_settings(Study s);

/// Ground truth attached to a simulated dataset.
struct Truth {
  double estimand = 0.0;  // gamma, or the sample ATE for the gp study
  double gamma = 0.0;
  double omega = 0.0;
  VectorXd beta;
  VectorXd phi;
  Index rank = 0;  // factor study: rank used in the coefficient solve
};

struct Simulated {
  Dataset data;
  Truth truth;
};

Simulated dgp_ridge(std::string_view setting, Index n, Index p, std::uint64_t seed);
Simulated dgp_sas(std::string_view scheme, std::uint64_t seed, Index n = 200, Index p = 200);
Simulated dgp_gp(bool linear, bool heterogeneous, Index n, Index p, std::uint64_t seed);
Simulated dgp_factor(double sigma_x, Index n, Index p, Index L, std::uint64_t seed);
Simulated dgp_manifold(Index p, double sigma_x, Index n, std::uint64_t seed);

/// Random-effects model with X ~ Normal(0, I): phi ~ Normal(0, tau2/P I),
/// beta ~ Normal(omega0 phi, tau2/P I), A = X phi + nu, Y = X beta + gamma A + eps.
Simulated dgp_rem(Index n, Index p, double tau2, double omega0, double gamma, std::uint64_t seed);

/// (Lambda Lambda^T + sigma_x^2 I)^{-1} Lambda 1 via the L x L system; pseudo-inverse when singular.
struct FactorCoefficients {
  VectorXd beta;
  Index rank = 0;
};
FactorCoefficients factor_coefficients(const MatrixXd& loadings, double sigma_x);

/// Splits "nonlinear_hetero"-style tags.
struct GpSetting {
  bool linear = false;
  bool heterogeneous = true;
};
GpSetting parse_gp_setting(std::string_view tag);

struct StudySpec {
  Study study = Study::ridge;
  std::string setting;
  Index n = 0;  // 0 selects the study default
  Index p = 0;
  Index reps = 1;
  std::uint64_t base_seed = 1;
  std::vector<std::string> methods;  // empty selects the study default
  std::optional<double> lambda;      // ridge-type outcome penalty; default P/N
  double sigma_x = 1.0;              // factor and manifold
  Index factors = 5;                 // factor study L
  int sas_iterations = 2000;
  int sas_burn_in = 500;
  double level = 0.95;
  bool record_timing = false;

  /// Fills defaults and checks methods and settings; throws ArgumentError.
  StudySpec resolved() const;
};

struct ReplicationRecord {
  std::string study;
  std::string setting;
  std::string method;
  Index rep = 0;
  std::uint64_t seed = 0;
  double estimate = 0.0;
  double post_sd = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double truth = 0.0;
  double elapsed_s = 0.0;
  std::string status = "ok";  // "ok" or "error:<kind>"
  std::string message;

  bool ok() const { return status == "ok"; }
};

/// Seed of replication `rep`; independent of the method list.
std::uint64_t replication_seed(const StudySpec& spec, Index rep);

/// Dataset of one replication.
Simulated simulate(const StudySpec& spec, Index rep);

class StudyAbortError : public std::runtime_error {
 public:
  StudyAbortError(const std::string& what, std::vector<ReplicationRecord> records)
      : std::runtime_error(what), records_(std::move(records)) {}
  const std::vector<ReplicationRecord>& records() const { return records_; }

 private:
  std::vector<ReplicationRecord> records_;
};

/// Records ordered by (rep, method list order); identical for any worker count.
/// Throws StudyAbortError when more than 10% of records failed.
std::vector<ReplicationRecord> run_study(const StudySpec& spec, unsigned workers = 1);

struct SummaryRow {
  std::string study;
  std::string setting;
  std::string method;
  Index n_reps = 0;
  double coverage = 0.0;
  double coverage_mcse = 0.0;
  double mean_width = 0.0;
  double mean_post_sd = 0.0;
  double rmse = 0.0;
  double rmse_mcse = 0.0;
  double bias = 0.0;
  double bias_mcse = 0.0;
};

/// One row per (study, setting, method) in order of first appearance; failed records are skipped.
std::vector<SummaryRow> summarize(const std::vector<ReplicationRecord>& records);

}  // namespace dogma::simlab
