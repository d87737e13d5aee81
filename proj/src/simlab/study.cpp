#include "dogma/core/error.hpp"
#include "dogma/core/random.hpp"
#include "dogma/estimators/ridge.hpp"
#include "dogma/estimators/spike_slab.hpp"
#include "dogma/gp.hpp"
#include "dogma/simlab.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

namespace dogma::simlab {

Study parse_study(std::string_view tag) {
  if (tag == "ridge") return Study::ridge;
  if (tag == "sas") return Study::sas;
  if (tag == "gp") return Study::gp;
  if (tag == "factor") return Study::factor;
  if (tag == "manifold") return Study::manifold;
  throw ArgumentError("unknown study: " + std::string(tag));
}

std::string_view to_string(Study s) {
  switch (s) {
    case Study::ridge: return "ridge";
    case Study::sas: return "sas";
    case Study::gp: return "gp";
    case Study::factor: return "factor";
    case Study::manifold: return "manifold";
  }
  return "ridge";
}

std::vector<std::string> default_methods(Study s) {
  switch (s) {
    case Study::ridge: return {"naive", "direct", "debiased"};
    case Study::sas: return {"naive", "shared", "direct"};
    case Study::gp: return {"naive", "ipw", "sop", "sop_gp"};
    case Study::factor: return {"naive", "direct"};
    case Study::manifold: return {"naive", "direct"};
  }
  return {};
}

namespace {

std::vector<std::string> allowed_methods(Study s) {
  auto m = default_methods(s);
  if (s == Study::ridge || s == Study::factor) {
    m.emplace_back("debiased");
    m.emplace_back("direct_oracle");
    m.emplace_back("debiased_oracle");
  }
  std::sort(m.begin(), m.end());
  m.erase(std::unique(m.begin(), m.end()), m.end());
  return m;
}

}  // namespace

std::vector<std::string> known_settings(Study s) {
  switch (s) {
    case Study::ridge: return {"random", "fixed", "debiased", "naive"};
    case Study::sas: return {"naive", "shared", "direct", "both"};
    case Study::gp: return {"linear_homo", "linear_hetero", "nonlinear_homo", "nonlinear_hetero"};
    case Study::factor:
    case Study::manifold: return {};
  }
  return {};
}

StudySpec StudySpec::resolved() const {
  StudySpec s = *this;
  require(reps >= 1, "study: replications must be positive");
  if (s.methods.empty()) s.methods = default_methods(study);
  const auto allowed = allowed_methods(study);
  for (const auto& m : s.methods)
    if (std::find(allowed.begin(), allowed.end(), m) == allowed.end())
      throw ArgumentError("method " + m + " is not available for study " + std::string(to_string(study)));
  std::vector<std::string> seen = s.methods;
  std::sort(seen.begin(), seen.end());
  require(std::adjacent_find(seen.begin(), seen.end()) == seen.end(), "study: duplicate method");

  const auto settings = known_settings(study);
  if (s.setting.empty()) {
    if (!settings.empty()) {
      s.setting = study == Study::gp ? "nonlinear_hetero" : settings.front();
    } else {
      std::ostringstream tag;
      tag << "sigma_x=" << s.sigma_x;
      s.setting = tag.str();
    }
  }
  if (!settings.empty() && std::find(settings.begin(), settings.end(), s.setting) == settings.end())
    throw ArgumentError("setting " + s.setting + " is not defined for study " + std::string(to_string(study)));

  switch (study) {
    case Study::ridge:
      if (s.n == 0) s.n = 200;
      if (s.p == 0) s.p = 1000;
      break;
    case Study::sas:
      if (s.n == 0) s.n = 200;
      if (s.p == 0) s.p = 200;
      break;
    case Study::gp:
      if (s.n == 0) s.n = 250;
      if (s.p == 0) s.p = 5;
      require(s.p >= 5, "gp study: need P >= 5");
      break;
    case Study::factor:
      if (s.n == 0) s.n = 200;
      if (s.p == 0) s.p = 200;
      require(s.factors >= 1 && s.factors <= s.p, "factor study: need 1 <= L <= P");
      break;
    case Study::manifold:
      if (s.n == 0) s.n = 300;
      if (s.p == 0) s.p = 10;
      break;
  }
  require(s.n >= 2 && s.p >= 1, "study: bad dimensions");
  require(s.sigma_x >= 0.0, "study: sigma_x must be nonnegative");
  if (s.lambda) require(*s.lambda > 0.0, "study: lambda must be positive");
  require(s.sas_burn_in >= 0 && s.sas_iterations > s.sas_burn_in, "study: need sas iterations > burn-in");
  require(s.level > 0.0 && s.level < 1.0, "study: level must lie in (0, 1)");
  return s;
}

std::uint64_t replication_seed(const StudySpec& spec, Index rep) {
  return derive_seed(spec.base_seed,
                     {hash_tag(to_string(spec.study)), hash_tag(spec.setting), static_cast<std::uint64_t>(rep)});
}

Simulated simulate(const StudySpec& spec, Index rep) {
  const std::uint64_t seed = derive_seed(replication_seed(spec, rep), {hash_tag("data")});
  switch (spec.study) {
    case Study::ridge: return dgp_ridge(spec.setting, spec.n, spec.p, seed);
    case Study::sas: return dgp_sas(spec.setting, seed, spec.n, spec.p);
    case Study::gp: {
      const GpSetting g = parse_gp_setting(spec.setting);
      return dgp_gp(g.linear, g.heterogeneous, spec.n, spec.p, seed);
    }
    case Study::factor: return dgp_factor(spec.sigma_x, spec.n, spec.p, spec.factors, seed);
    case Study::manifold: return dgp_manifold(spec.p, spec.sigma_x, spec.n, seed);
  }
  throw ArgumentError("unknown study");
}

namespace {

std::string kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::argument: return "argument";
    case ErrorKind::unsupported_regime: return "unsupported_regime";
    case ErrorKind::out_of_domain: return "out_of_domain";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::degeneracy: return "degeneracy";
    case ErrorKind::identifiability: return "identifiability";
    case ErrorKind::insufficient_sample: return "insufficient_sample";
  }
  return "unknown";
}

/// Fits every method of one replication on a shared dataset.
class ReplicationRunner {
 public:
  ReplicationRunner(const StudySpec& spec, Index rep) : spec_(spec), rep_(rep), seed_(replication_seed(spec, rep)) {}

  std::vector<ReplicationRecord> run() {
    std::vector<ReplicationRecord> out;
    std::optional<Simulated> sim;
    std::string failure;
    try {
      sim = simulate(spec_, rep_);
    } catch (const Error& e) {
      failure = "error:" + kind_name(e.kind()) + "|" + e.what();
    } catch (const std::exception& e) {
      failure = std::string("error:internal|") + e.what();
    }
    for (const auto& method : spec_.methods) {
      ReplicationRecord r;
      r.study = std::string(to_string(spec_.study));
      r.setting = spec_.setting;
      r.method = method;
      r.rep = rep_;
      r.seed = seed_;
      if (!sim) {
        set_failure(r, failure);
        out.push_back(std::move(r));
        continue;
      }
      r.truth = sim->truth.estimand;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const EstimatorResult res = fit(method, *sim);
        r.estimate = res.estimate;
        r.post_sd = res.posterior_sd;
        r.lo = res.lo;
        r.hi = res.hi;
        if (!std::isfinite(r.estimate) || !std::isfinite(r.post_sd) || !(r.lo <= r.hi))
          throw NumericError("non-finite or unordered estimator summary");
      } catch (const Error& e) {
        set_failure(r, "error:" + kind_name(e.kind()) + "|" + e.what());
      } catch (const std::exception& e) {
        set_failure(r, std::string("error:internal|") + e.what());
      }
      if (spec_.record_timing)
        r.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      out.push_back(std::move(r));
    }
    return out;
  }

 private:
  static void set_failure(ReplicationRecord& r, const std::string& tagged) {
    const auto bar = tagged.find('|');
    r.status = tagged.substr(0, bar);
    r.message = bar == std::string::npos ? std::string() : tagged.substr(bar + 1);
    r.estimate = r.post_sd = r.lo = r.hi = std::nan("");
  }

  double lambda() const {
    return spec_.lambda.value_or(static_cast<double>(spec_.p) / static_cast<double>(spec_.n));
  }

  const CleverCovariate& clever(const Dataset& data) {
    if (!clever_) clever_ = clever_covariate(data, FirstStage::empirical_bayes());
    return *clever_;
  }

  const SasConfig& sas_config() {
    if (!sas_) {
      sas_.emplace();
      sas_->iterations = spec_.sas_iterations;
      sas_->burn_in = spec_.sas_burn_in;
      sas_->level = spec_.level;
    }
    return *sas_;
  }

  EstimatorResult fit(const std::string& method, const Simulated& sim) {
    const Dataset& data = sim.data;
    const double level = spec_.level;
    switch (spec_.study) {
      case Study::ridge:
      case Study::factor: {
        if (method == "naive") return fit_naive_ridge(data, lambda(), 1.0, level);
        if (method == "direct") return fit_direct_zprior(data, lambda(), clever(data), 1.0, level);
        if (method == "debiased") return fit_debiased(data, lambda(), clever(data), 1.0, level);
        const auto oracle = FirstStage::oracle(sim.truth.phi);
        if (method == "direct_oracle") return fit_direct_zprior(data, lambda(), oracle, 1.0, level);
        if (method == "debiased_oracle") return fit_debiased(data, lambda(), oracle, 1.0, level);
        break;
      }
      case Study::sas: {
        const SasVariant v = parse_sas_variant(method);
        const std::uint64_t s = derive_seed(seed_, {hash_tag(method)});
        if (v == SasVariant::naive) return fit_sas(data, v, sas_config(), SelectionStage{}, s);
        if (!stage_) stage_ = sas_selection_stage(data, sas_config(), derive_seed(seed_, {hash_tag("stage1")}));
        return fit_sas(data, v, sas_config(), *stage_, s);
      }
      case Study::gp: return gp::fit_gp_method(data, gp::parse_kernel_variant(method), level);
      case Study::manifold: {
        gp::SemiparConfig c;
        c.level = level;
        if (method == "naive") return gp::fit_semipar_naive(data, c);
        if (method == "direct") return gp::fit_semipar_direct(data, c);
        break;
      }
    }
    throw ArgumentError("method " + method + " is not available for this study");
  }

  const StudySpec& spec_;
  Index rep_;
  std::uint64_t seed_;
  std::optional<CleverCovariate> clever_;
  std::optional<SasConfig> sas_;
  std::optional<SelectionStage> stage_;
};

}  // namespace

std::vector<ReplicationRecord> run_study(const StudySpec& input, unsigned workers) {
  const StudySpec spec = input.resolved();
  const auto reps = static_cast<std::size_t>(spec.reps);
  std::vector<std::vector<ReplicationRecord>> slots(reps);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t r = next++; r < reps; r = next++)
      slots[r] = ReplicationRunner(spec, static_cast<Index>(r)).run();
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(reps)));
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(work);
  }

  std::vector<ReplicationRecord> records;
  records.reserve(reps * spec.methods.size());
  for (auto& s : slots)
    for (auto& r : s) records.push_back(std::move(r));
  const auto failed = std::count_if(records.begin(), records.end(), [](const auto& r) { return !r.ok(); });
  if (static_cast<double>(failed) > 0.1 * static_cast<double>(records.size())) {
    std::ostringstream msg;
    msg << "study aborted: " << failed << " of " << records.size() << " fits failed";
    throw StudyAbortError(msg.str(), std::move(records));
  }
  return records;
}

std::vector<SummaryRow> summarize(const std::vector<ReplicationRecord>& records) {
  struct Acc {
    SummaryRow row;
    std::vector<double> err;
    double covered = 0.0, width = 0.0, sd = 0.0;
    Index total = 0;
  };
  std::vector<Acc> groups;
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> index;
  for (const auto& r : records) {
    const auto key = std::make_tuple(r.study, r.setting, r.method);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, groups.size()).first;
      Acc a;
      a.row.study = r.study;
      a.row.setting = r.setting;
      a.row.method = r.method;
      groups.push_back(std::move(a));
    }
    Acc& a = groups[it->second];
    ++a.total;
    if (!r.ok()) continue;
    a.err.push_back(r.estimate - r.truth);
    a.covered += (r.lo <= r.truth && r.truth <= r.hi) ? 1.0 : 0.0;
    a.width += r.hi - r.lo;
    a.sd += r.post_sd;
  }

  std::vector<SummaryRow> out;
  out.reserve(groups.size());
  for (auto& a : groups) {
    const auto n = static_cast<double>(a.err.size());
    if (a.err.empty())
      throw InsufficientSampleError("summarize: no successful records for " + a.row.setting + "/" + a.row.method);
    SummaryRow& row = a.row;
    row.n_reps = static_cast<Index>(a.err.size());
    row.coverage = a.covered / n;
    row.coverage_mcse = std::sqrt(row.coverage * (1.0 - row.coverage) / n);
    row.mean_width = a.width / n;
    row.mean_post_sd = a.sd / n;
    double sum = 0.0, sum_sq = 0.0;
    for (double e : a.err) {
      sum += e;
      sum_sq += e * e;
    }
    row.bias = sum / n;
    const double mse = sum_sq / n;
    row.rmse = std::sqrt(mse);
    double var_e = 0.0, var_e2 = 0.0;
    for (double e : a.err) {
      var_e += (e - row.bias) * (e - row.bias);
      var_e2 += (e * e - mse) * (e * e - mse);
    }
    if (a.err.size() > 1) {
      row.bias_mcse = std::sqrt(var_e / (n - 1.0) / n);
      const double mse_se = std::sqrt(var_e2 / (n - 1.0) / n);
      row.rmse_mcse = row.rmse > 0.0 ? mse_se / (2.0 * row.rmse) : 0.0;
    }
    out.push_back(row);
  }
  return out;
}

}  // namespace dogma::simlab
