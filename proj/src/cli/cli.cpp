#include "dogma/cli.hpp"

#include "dogma/core/error.hpp"
#include "dogma/core/random.hpp"
#include "dogma/core/stats.hpp"
#include "dogma/estimators/ridge.hpp"
#include "dogma/selection_bias.hpp"
#include "dogma/spectra.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#ifndef DOGMA_VERSION
#define DOGMA_VERSION "0.0.0"
#endif

namespace dogma::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) { row(header); }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os_ << ',';
      os_ << csv_field(cells[i]);
    }
    os_ << '\n';
  }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

std::string num(double v) { return format_double(v); }
template <typename I>
std::string integer(I v) {
  return std::to_string(v);
}

}  // namespace

std::string records_csv(const std::vector<simlab::ReplicationRecord>& records) {
  CsvWriter w({"study", "setting", "method", "rep", "seed", "estimate", "post_sd", "ci_lo", "ci_hi", "truth", "elapsed_s",
               "status"});
  for (const auto& r : records)
    w.row({r.study, r.setting, r.method, integer(r.rep), integer(r.seed), num(r.estimate), num(r.post_sd), num(r.lo),
           num(r.hi), num(r.truth), num(r.elapsed_s), r.status});
  return w.str();
}

std::string summary_csv(const std::vector<simlab::SummaryRow>& rows) {
  CsvWriter w({"study", "setting", "method", "n_reps", "coverage", "coverage_mcse", "mean_width", "mean_post_sd", "rmse",
               "rmse_mcse", "bias", "bias_mcse"});
  for (const auto& r : rows)
    w.row({r.study, r.setting, r.method, integer(r.n_reps), num(r.coverage), num(r.coverage_mcse), num(r.mean_width),
           num(r.mean_post_sd), num(r.rmse), num(r.rmse_mcse), num(r.bias), num(r.bias_mcse)});
  return w.str();
}

void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ArgumentError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw ArgumentError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace {

/// Raised for configuration problems detected outside CLI11 parsing.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void prepare_output(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("output directory is not usable: " + dir.string());
  const fs::path probe = dir / ".dogma_probe";
  std::ofstream out(probe);
  if (!out) throw ConfigError("output directory is not writable: " + dir.string());
  out.close();
  fs::remove(probe, ec);
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config, std::uint64_t seed,
                    const std::vector<std::string>& outputs, const json& extra = json::object()) {
  json m;
  m["artifact"] = "dogma";
  m["version"] = DOGMA_VERSION;
  m["schema_version"] = schema_version;
  m["command"] = command;
  m["timestamp"] = utc_timestamp();
  m["base_seed"] = seed;
  m["config"] = config;
  m["outputs"] = outputs;
  if (!extra.empty()) m["results"] = extra;
  write_atomic(dir / "manifest.json", m.dump(2) + "\n");
}

/// Values from a JSON config file (or a manifest's "config" block) fill options not given on the command line.
void apply_config(CLI::App& sub, const std::string& path, const std::string& command) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  if (doc.contains("config") && doc.contains("command")) {
    if (doc["command"] != command) throw ConfigError("manifest was written by command " + doc["command"].dump());
    doc = doc["config"];
  }
  if (!doc.is_object()) throw ConfigError("config file must hold a JSON object");
  auto text = [](const json& v) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
    if (v.is_number()) return format_double(v.get<double>());
    throw ConfigError("unsupported config value " + v.dump());
  };
  for (const auto& [key, value] : doc.items()) {
    CLI::Option* opt = key == "config" ? nullptr : sub.get_option_no_throw("--" + key);
    if (opt == nullptr) throw ConfigError("unknown config key: " + key);
    if (opt->count() > 0) continue;  // command line wins
    if (value.is_null()) continue;
    opt->clear();
    if (value.is_array()) {
      for (const auto& v : value) opt->add_result(text(v));
    } else {
      opt->add_result(text(value));
    }
    opt->run_callback();
  }
}

json doubles(const std::vector<double>& v) { return json(v); }

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string study;
  std::string setting;
  Index n = 0, p = 0, reps = 10;
  std::uint64_t seed = 1;
  std::vector<std::string> methods;
  std::string out = "out";
  unsigned workers = 1;
  std::optional<double> lambda;
  double sigma_x = 1.0;
  Index factors = 5;
  int sas_iterations = 2000, sas_burn_in = 500;
  double level = 0.95;
  bool record_timing = false;
  std::string config;
};

void add_simulate(CLI::App& app, SimulateArgs& a) {
  auto* s = app.add_subcommand("simulate", "Run a replicated simulation study");
  s->add_option("--study", a.study, "ridge | sas | gp | factor | manifold");
  s->add_option("--setting", a.setting, "Setting tag of the study");
  s->add_option("--n", a.n, "Observations (0 = study default)");
  s->add_option("--p", a.p, "Covariates (0 = study default)");
  s->add_option("--reps", a.reps, "Replications");
  s->add_option("--seed", a.seed, "Base seed");
  s->add_option("--methods", a.methods, "Comma-separated methods (default: all of the study)")->delimiter(',');
  s->add_option("--out", a.out, "Output directory");
  s->add_option("--workers", a.workers, "Worker threads");
  s->add_option("--lambda", a.lambda, "Outcome ridge penalty (default P/N)");
  s->add_option("--sigma-x", a.sigma_x, "Idiosyncratic noise scale (factor, manifold)");
  s->add_option("--factors", a.factors, "Latent factors L (factor)");
  s->add_option("--sas-iterations", a.sas_iterations, "Gibbs iterations (sas)");
  s->add_option("--sas-burn-in", a.sas_burn_in, "Gibbs burn-in (sas)");
  s->add_option("--level", a.level, "Credible level");
  s->add_flag("--record-timing", a.record_timing, "Store wall-clock seconds in elapsed_s");
  s->add_option("--config", a.config, "JSON config file or manifest");
}

int cmd_simulate(const SimulateArgs& a) {
  if (a.study.empty()) throw ConfigError("--study is required");
  simlab::StudySpec spec;
  spec.study = simlab::parse_study(a.study);
  spec.setting = a.setting;
  spec.n = a.n;
  spec.p = a.p;
  spec.reps = a.reps;
  spec.base_seed = a.seed;
  spec.methods = a.methods;
  spec.lambda = a.lambda;
  spec.sigma_x = a.sigma_x;
  spec.factors = a.factors;
  spec.sas_iterations = a.sas_iterations;
  spec.sas_burn_in = a.sas_burn_in;
  spec.level = a.level;
  spec.record_timing = a.record_timing;
  if (a.workers < 1) throw ConfigError("--workers must be positive");
  const simlab::StudySpec resolved = spec.resolved();
  const fs::path dir = a.out;
  prepare_output(dir);

  json config;
  config["study"] = a.study;
  config["setting"] = resolved.setting;
  config["n"] = resolved.n;
  config["p"] = resolved.p;
  config["reps"] = resolved.reps;
  config["seed"] = resolved.base_seed;
  config["methods"] = resolved.methods;
  config["workers"] = a.workers;
  if (resolved.lambda) config["lambda"] = *resolved.lambda;
  config["sigma-x"] = resolved.sigma_x;
  config["factors"] = resolved.factors;
  config["sas-iterations"] = resolved.sas_iterations;
  config["sas-burn-in"] = resolved.sas_burn_in;
  config["level"] = resolved.level;
  config["record-timing"] = resolved.record_timing;

  std::vector<simlab::ReplicationRecord> records;
  int status = exit_ok;
  std::string abort_message;
  try {
    records = simlab::run_study(resolved, a.workers);
  } catch (const simlab::StudyAbortError& e) {
    records = e.records();
    abort_message = e.what();
    status = exit_abort;
  }
  write_atomic(dir / "records.csv", records_csv(records));
  std::vector<std::string> outputs{"records.csv"};
  if (status == exit_ok) {
    write_atomic(dir / "summary.csv", summary_csv(simlab::summarize(records)));
    outputs.emplace_back("summary.csv");
  }
  write_manifest(dir, "simulate", config, resolved.base_seed, outputs);
  if (status != exit_ok) std::cerr << "dogma: " << abort_message << "\n";
  return status;
}

// -------------------------------------------------------------- bias-curve

struct BiasCurveArgs {
  std::vector<double> lambdas{0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0};
  double r = 2.0;
  std::optional<double> eta;
  std::optional<double> tau2;
  double omega0 = 1.0;
  std::string estimator = "naive";
  Index n = 150;
  bool with_mc = false;
  Index reps = 200;
  std::uint64_t seed = 1;
  std::string out = "out";
  std::string config;
};

void add_bias_curve(CLI::App& app, BiasCurveArgs& a) {
  auto* s = app.add_subcommand("bias-curve", "Asymptotic bias of naive ridge or the Z-prior over a penalty grid");
  s->add_option("--lambdas", a.lambdas, "Comma-separated ridge penalties")->delimiter(',');
  s->add_option("--r", a.r, "Aspect ratio P/N");
  auto* eta = s->add_option("--eta", a.eta, "eta = r / tau2");
  auto* tau = s->add_option("--tau2", a.tau2, "Signal level tau2 (default 1)");
  eta->excludes(tau);
  s->add_option("--omega0", a.omega0, "Selection shift omega0");
  s->add_option("--estimator", a.estimator, "naive | zprior")->check(CLI::IsMember({"naive", "zprior"}));
  s->add_option("--n", a.n, "Observations for the spectrum and Monte Carlo");
  s->add_flag("--with-mc", a.with_mc, "Add Monte Carlo bias columns");
  s->add_option("--reps", a.reps, "Monte Carlo replications");
  s->add_option("--seed", a.seed, "Base seed");
  s->add_option("--out", a.out, "Output directory");
  s->add_option("--config", a.config, "JSON config file or manifest");
}

int cmd_bias_curve(const BiasCurveArgs& a) {
  if (a.lambdas.empty()) throw ConfigError("--lambdas must not be empty");
  for (double l : a.lambdas)
    if (!(l > 0.0)) throw ConfigError("--lambdas must be positive");
  if (!(a.r > 0.0)) throw ConfigError("--r must be positive");
  if (a.eta && a.tau2) throw ConfigError("--eta and --tau2 are mutually exclusive");
  const double tau2 = a.eta ? a.r / *a.eta : a.tau2.value_or(1.0);
  if (!(tau2 > 0.0)) throw ConfigError("eta / tau2 must be positive");
  if (a.n < 2) throw ConfigError("--n must be at least 2");
  if (a.with_mc && a.reps < 2) throw ConfigError("--reps must be at least 2");
  const bool zprior = a.estimator == "zprior";
  const Index p = std::max<Index>(1, static_cast<Index>(std::llround(a.r * static_cast<double>(a.n))));
  const double r = static_cast<double>(p) / static_cast<double>(a.n);
  const fs::path dir = a.out;
  prepare_output(dir);

  Rng rng(derive_seed(a.seed, {hash_tag("spectrum")}));
  const auto spectra_pair = spectra::sample_spectra(rng.normal_matrix(a.n, p));
  std::vector<double> formula;
  for (double l : a.lambdas) {
    const auto in = spectra::BiasInputs::from_tau2(l, r, tau2, a.omega0);
    formula.push_back(zprior ? spectra::zprior_ridge_bias(spectra_pair.inner, in)
                             : spectra::naive_ridge_bias(spectra_pair.outer, in));
  }

  std::vector<std::vector<double>> errors(a.lambdas.size());
  if (a.with_mc) {
    for (Index rep = 0; rep < a.reps; ++rep) {
      const auto sim = simlab::dgp_rem(a.n, p, tau2, a.omega0, 1.0, derive_seed(a.seed, {hash_tag("mc"), static_cast<std::uint64_t>(rep)}));
      for (std::size_t k = 0; k < a.lambdas.size(); ++k) {
        const double l = a.lambdas[k];
        const EstimatorResult res = zprior ? fit_direct_zprior(sim.data, l, FirstStage::fixed_penalty(l))
                                           : fit_naive_ridge(sim.data, l);
        errors[k].push_back(res.estimate - 1.0);
      }
    }
  }

  std::vector<std::string> header{"lambda", "formula_bias"};
  if (a.with_mc) {
    header.emplace_back("mc_bias");
    header.emplace_back("mc_se");
  }
  CsvWriter w(header);
  for (std::size_t k = 0; k < a.lambdas.size(); ++k) {
    std::vector<std::string> row{num(a.lambdas[k]), num(formula[k])};
    if (a.with_mc) {
      const MeanSe ms = mean_and_se(errors[k]);
      row.push_back(num(ms.mean));
      row.push_back(num(ms.se));
    }
    w.row(row);
  }
  write_atomic(dir / "bias_curve.csv", w.str());

  json config;
  config["lambdas"] = doubles(a.lambdas);
  config["r"] = a.r;
  config["tau2"] = tau2;
  config["omega0"] = a.omega0;
  config["estimator"] = a.estimator;
  config["n"] = a.n;
  config["with-mc"] = a.with_mc;
  config["reps"] = a.reps;
  config["seed"] = a.seed;
  json extra;
  extra["p"] = p;
  extra["eta"] = r / tau2;
  write_manifest(dir, "bias-curve", config, a.seed, {"bias_curve.csv"}, extra);
  return exit_ok;
}

// ----------------------------------------------------------- concentration

struct ConcentrationArgs {
  std::string prior = "ridge";
  std::vector<Index> p_list{1, 10, 50};
  Index draws = 2000;
  double a = 1.0;
  double tau2_beta = 1.0, tau2_phi = 1.0;
  double p_beta = 0.1, p_phi = 0.1;
  std::optional<double> omega;
  double sigma2_a = 1.0;
  std::uint64_t seed = 1;
  std::string out = "out";
  std::string config;
};

void add_concentration(CLI::App& app, ConcentrationArgs& a) {
  auto* s = app.add_subcommand("concentration", "Prior draws of the selection bias for a list of dimensions");
  s->add_option("--prior", a.prior, "ridge | sas");
  s->add_option("--p-list", a.p_list, "Comma-separated dimensions")->delimiter(',');
  s->add_option("--draws", a.draws, "Prior draws per dimension");
  s->add_option("--a", a.a, "Exposure level a");
  s->add_option("--tau2-beta", a.tau2_beta, "Outcome coefficient variance");
  s->add_option("--tau2-phi", a.tau2_phi, "Selection coefficient variance");
  s->add_option("--p-beta", a.p_beta, "Outcome inclusion probability (sas)");
  s->add_option("--p-phi", a.p_phi, "Selection inclusion probability (sas)");
  s->add_option("--omega", a.omega, "Centre beta on omega * phi");
  s->add_option("--sigma2-a", a.sigma2_a, "Exposure noise variance");
  s->add_option("--seed", a.seed, "Base seed");
  s->add_option("--out", a.out, "Output directory");
  s->add_option("--config", a.config, "JSON config file or manifest");
}

int cmd_concentration(const ConcentrationArgs& a) {
  namespace sb = selection_bias;
  if (a.p_list.empty()) throw ConfigError("--p-list must not be empty");
  for (Index p : a.p_list)
    if (p < 1) throw ConfigError("--p-list entries must be positive");
  if (a.draws < 2) throw ConfigError("--draws must be at least 2");
  sb::PriorSpec prior;
  if (a.prior == "ridge")
    prior.prior = sb::RidgePrior{a.tau2_beta, a.tau2_phi};
  else if (a.prior == "sas")
    prior.prior = sb::SpikeSlabPrior{a.p_beta, a.p_phi, a.tau2_beta, a.tau2_phi};
  else
    throw ConfigError("unsupported prior for concentration: " + a.prior + " (use ridge or sas)");
  prior.omega = a.omega;
  prior.sigma2_a = a.sigma2_a;
  prior.validate();
  const fs::path dir = a.out;
  prepare_output(dir);

  CsvWriter draws({"P", "draw", "delta"});
  CsvWriter summary({"P", "n_draws", "mean", "sd", "predicted_sd"});
  for (Index p : a.p_list) {
    const auto cov = sb::CovarianceModel::isotropic(p, 1.0);
    const std::vector<double> d =
        sb::prior_delta_draws(prior, cov, a.a, a.draws, derive_seed(a.seed, {static_cast<std::uint64_t>(p)}));
    for (std::size_t i = 0; i < d.size(); ++i) draws.row({integer(p), integer(i), num(d[i])});
    std::string predicted;
    if (a.prior == "ridge" && !a.omega)
      predicted = num(std::sqrt(sb::clt_scale(a.a, sb::RidgePrior{a.tau2_beta, a.tau2_phi}, VectorXd::Ones(p))));
    summary.row({integer(p), integer(d.size()), num(mean(d)), num(sample_sd(d)), predicted});
  }
  write_atomic(dir / "concentration.csv", draws.str());
  write_atomic(dir / "concentration_summary.csv", summary.str());

  json config;
  config["prior"] = a.prior;
  config["p-list"] = a.p_list;
  config["draws"] = a.draws;
  config["a"] = a.a;
  config["tau2-beta"] = a.tau2_beta;
  config["tau2-phi"] = a.tau2_phi;
  config["p-beta"] = a.p_beta;
  config["p-phi"] = a.p_phi;
  if (a.omega) config["omega"] = *a.omega;
  config["sigma2-a"] = a.sigma2_a;
  config["seed"] = a.seed;
  write_manifest(dir, "concentration", config, a.seed, {"concentration.csv", "concentration_summary.csv"});
  return exit_ok;
}

// ----------------------------------------------------------------- spectra

struct SpectraArgs {
  std::string cov = "identity";
  Index n = 500;
  Index p = 1000;
  Index factors = 5;
  double sigma_x = 1.0;
  std::vector<double> lambdas{1e-3, 1e-2, 0.1, 1.0, 10.0};
  int bins = 50;
  std::uint64_t seed = 1;
  std::string out = "out";
  std::string config;
};

void add_spectra(CLI::App& app, SpectraArgs& a) {
  auto* s = app.add_subcommand("spectra", "Eigenvalue histograms, Marchenko-Pastur density and Stieltjes curves");
  s->add_option("--cov", a.cov, "identity | factor");
  s->add_option("--n", a.n, "Observations");
  s->add_option("--p", a.p, "Covariates");
  s->add_option("--factors", a.factors, "Latent factors L (factor)");
  s->add_option("--sigma-x", a.sigma_x, "Idiosyncratic noise scale (factor)");
  s->add_option("--lambdas", a.lambdas, "Comma-separated penalties for v(-lambda)")->delimiter(',');
  s->add_option("--bins", a.bins, "Histogram bins");
  s->add_option("--seed", a.seed, "Seed");
  s->add_option("--out", a.out, "Output directory");
  s->add_option("--config", a.config, "JSON config file or manifest");
}

int cmd_spectra(const SpectraArgs& a) {
  namespace sb = selection_bias;
  if (a.n < 2 || a.p < 1) throw ConfigError("--n must be >= 2 and --p >= 1");
  if (a.bins < 1) throw ConfigError("--bins must be positive");
  for (double l : a.lambdas)
    if (!(l > 0.0)) throw ConfigError("--lambdas must be positive");
  std::optional<sb::CovarianceModel> cov;
  Rng rng(a.seed);
  if (a.cov == "identity") {
    cov = sb::CovarianceModel::isotropic(a.p, 1.0);
  } else if (a.cov == "factor") {
    if (a.factors < 1 || a.factors > a.p) throw ConfigError("--factors must lie in [1, P]");
    if (!(a.sigma_x >= 0.0)) throw ConfigError("--sigma-x must be nonnegative");
    cov = sb::CovarianceModel::latent_factor(rng.normal_matrix(a.p, a.factors), a.sigma_x);
  } else {
    throw ConfigError("invalid covariance spec: " + a.cov + " (use identity or factor)");
  }
  const fs::path dir = a.out;
  prepare_output(dir);

  const MatrixXd X = cov->sample(a.n, rng);
  const auto sp = spectra::sample_spectra(X);
  const double r = static_cast<double>(a.p) / static_cast<double>(a.n);
  const VectorXd& ev = sp.outer.eigenvalues();

  json results;
  CsvWriter hist({"bin_lo", "bin_hi", "density", "mp_density"});
  const bool mp = a.cov == "identity" && r >= 1.0;
  if (mp) {
    // Eigenvalues of X X^T / P follow the law on (a, b).
    const auto [lo, hi] = spectra::mp_support(r);
    std::vector<double> scaled(static_cast<std::size_t>(ev.size()));
    for (Index i = 0; i < ev.size(); ++i) scaled[static_cast<std::size_t>(i)] = ev[i] / r;
    const auto h = spectra::histogram(scaled, lo, hi, a.bins);
    for (std::size_t k = 0; k < h.density.size(); ++k) {
      const double w = h.edges[k + 1] - h.edges[k];
      hist.row({num(h.edges[k]), num(h.edges[k + 1]), num(h.density[k]),
                num(spectra::mp_mass(r, h.edges[k], h.edges[k + 1]) / w)});
    }
    results["mp_l1"] = spectra::mp_l1_distance(h, r);
  } else {
    std::vector<double> vals(ev.data(), ev.data() + ev.size());
    const double top = std::max(ev.maxCoeff(), 1e-12);
    const auto h = spectra::histogram(vals, 0.0, top, a.bins);
    for (std::size_t k = 0; k < h.density.size(); ++k)
      hist.row({num(h.edges[k]), num(h.edges[k + 1]), num(h.density[k]), ""});
  }
  CsvWriter st({"lambda", "stieltjes", "inv_lambda", "ratio"});
  for (double l : a.lambdas) {
    const double v = spectra::stieltjes(sp.outer, l);
    st.row({num(l), num(v), num(1.0 / l), num(v * l)});
  }
  write_atomic(dir / "spectra_hist.csv", hist.str());
  write_atomic(dir / "stieltjes.csv", st.str());

  json config;
  config["cov"] = a.cov;
  config["n"] = a.n;
  config["p"] = a.p;
  config["factors"] = a.factors;
  config["sigma-x"] = a.sigma_x;
  config["lambdas"] = doubles(a.lambdas);
  config["bins"] = a.bins;
  config["seed"] = a.seed;
  write_manifest(dir, "spectra", config, a.seed, {"spectra_hist.csv", "stieltjes.csv"}, results);
  return exit_ok;
}

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::argument:
    case ErrorKind::unsupported_regime:
    case ErrorKind::out_of_domain: return exit_config;
    default: return exit_numeric;
  }
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"dogma: selection-bias priors, ridge and GP estimators, simulation studies"};
  app.set_version_flag("--version", DOGMA_VERSION);
  app.require_subcommand(1);
  SimulateArgs sim;
  BiasCurveArgs bias;
  ConcentrationArgs conc;
  SpectraArgs spec;
  add_simulate(app, sim);
  add_bias_curve(app, bias);
  add_concentration(app, conc);
  add_spectra(app, spec);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    auto with_config = [&](const std::string& path) {
      if (!path.empty()) apply_config(*sub, path, name);
    };
    if (name == "simulate") {
      with_config(sim.config);
      return cmd_simulate(sim);
    }
    if (name == "bias-curve") {
      with_config(bias.config);
      return cmd_bias_curve(bias);
    }
    if (name == "concentration") {
      with_config(conc.config);
      return cmd_concentration(conc);
    }
    with_config(spec.config);
    return cmd_spectra(spec);
  } catch (const ConfigError& e) {
    std::cerr << "dogma: " << e.what() << "\n";
    return exit_config;
  } catch (const CLI::Error& e) {
    std::cerr << "dogma: " << e.what() << "\n";
    return exit_config;
  } catch (const Error& e) {
    std::cerr << "dogma: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "dogma: " << e.what() << "\n";
    return exit_numeric;
  }
}

}  // namespace dogma::cli
