// Acceptance criteria runner. Prints one PASS/FAIL line per criterion.
//   acceptance [--criterion k]

#include "dogma/cli.hpp"
#include "dogma/core/random.hpp"
#include "dogma/core/stats.hpp"
#include "dogma/estimators/ridge.hpp"
#include "dogma/estimators/spike_slab.hpp"
#include "dogma/gp.hpp"
#include "dogma/selection_bias.hpp"
#include "dogma/simlab.hpp"
#include "dogma/spectra.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

namespace {

using namespace dogma;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;
namespace sl = dogma::simlab;
namespace sb = dogma::selection_bias;

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [x]");
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// ---------------------------------------------------------------------------
// Bias formulas against Monte Carlo

constexpr Index kN = 150, kP = 300;
constexpr double kTau2 = 1.0, kOmega0 = 1.0, kGamma = 1.0;
constexpr int kReps = 500;
const std::vector<double> kLambdas{0.5, 1.0, 2.0};

template <typename Fit, typename Formula>
Outcome bias_check(std::uint64_t tag, Fit fit, Formula formula, double k_se, bool oracle_zero = false) {
  Outcome out;
  const double r = static_cast<double>(kP) / kN;
  for (double l : kLambdas) {
    std::vector<double> err, pred;
    for (int rep = 0; rep < kReps; ++rep) {
      const auto s = sl::dgp_rem(kN, kP, kTau2, kOmega0, kGamma, derive_seed(20240601, {tag, static_cast<std::uint64_t>(rep)}));
      err.push_back(fit(s, l) - s.truth.gamma);
      if (!oracle_zero) {
        const auto sp = spectra::sample_spectra(s.data.X);
        pred.push_back(formula(sp, spectra::BiasInputs::from_tau2(l, r, kTau2, kOmega0)));
      }
    }
    const MeanSe mc = mean_and_se(err);
    const double target = oracle_zero ? 0.0 : mean(pred);
    const double z = std::abs(mc.mean - target) / mc.se;
    out.check(z <= k_se, fmt("lambda=%g mc=%.4f se=%.4f target=%.4f z=%.2f", l, mc.mean, mc.se, target, z));
  }
  return out;
}

Outcome criterion_1() {
  return bias_check(
      hash_tag("naive"), [](const sl::Simulated& s, double l) { return fit_naive_ridge(s.data, l).estimate; },
      [](const auto& sp, const spectra::BiasInputs& in) { return spectra::naive_ridge_bias(sp.outer, in); }, 3.0);
}

Outcome criterion_2() {
  Outcome eb = bias_check(
      hash_tag("zprior"),
      [](const sl::Simulated& s, double l) { return fit_direct_zprior(s.data, l, FirstStage::empirical_bayes()).estimate; },
      [](const auto& sp, const spectra::BiasInputs& in) { return spectra::zprior_ridge_bias(sp.inner, in); }, 3.0);
  Outcome orc = bias_check(
      hash_tag("zprior-oracle"),
      [](const sl::Simulated& s, double l) {
        return fit_direct_zprior(s.data, l, FirstStage::oracle(s.truth.phi)).estimate;
      },
      [](const auto&, const spectra::BiasInputs&) { return 0.0; }, 2.0, true);
  const Outcome same = bias_check(
      hash_tag("zprior-same-lambda"),
      [](const sl::Simulated& s, double l) { return fit_direct_zprior(s.data, l, FirstStage::fixed_penalty(l)).estimate; },
      [](const auto& sp, const spectra::BiasInputs& in) { return spectra::zprior_ridge_bias(sp.inner, in); }, 3.0);
  Outcome out;
  out.check(eb.pass, "eb first stage vs formula: " + eb.detail);
  out.check(orc.pass, "oracle phi vs 0: " + orc.detail);
  out.detail += "; not gating, same-lambda first stage vs formula: " + same.detail;
  return out;
}

// ---------------------------------------------------------------------------
// Prior concentration

Outcome criterion_3() {
  const sb::PriorSpec prior{sb::RidgePrior{1.0, 1.0}, std::nullopt, 1.0};
  const auto d = sb::prior_delta_draws(prior, sb::CovarianceModel::isotropic(400), 1.0, 2000, 3);
  const double sd = sample_sd(d);
  Outcome out;
  out.check(std::abs(sd / 0.05 - 1.0) <= 0.10, fmt("sd=%.5f target=0.05", sd));
  return out;
}

Outcome criterion_4() {
  const Index p = 2000;
  const double tau2 = 1.0, omega0 = 1.0, sd = std::sqrt(tau2 / static_cast<double>(p));
  const auto cov = sb::CovarianceModel::isotropic(p);
  Rng rng(4);
  std::vector<double> d;
  for (int i = 0; i < 500; ++i) {
    sb::LinearModelPair m;
    m.phi = sd * rng.normal_vector(p);
    m.beta = omega0 * m.phi + sd * rng.normal_vector(p);
    m.sigma2_a = 1.0;
    d.push_back(sb::delta_linear(1.0, m, cov));
  }
  const double m = mean(d);
  Outcome out;
  out.check(std::abs(m - 0.5) <= 0.05, fmt("mean=%.4f target=0.5", m));
  return out;
}

// ---------------------------------------------------------------------------
// Simulation studies

std::map<std::string, sl::SummaryRow> summary_by_method(const sl::StudySpec& spec) {
  std::map<std::string, sl::SummaryRow> m;
  for (const auto& row : sl::summarize(sl::run_study(spec, workers()))) m[row.method] = row;
  return m;
}

Outcome criterion_5() {
  Outcome out;
  for (const std::string setting : {"random", "fixed", "debiased", "naive"}) {
    sl::StudySpec spec;
    spec.study = sl::Study::ridge;
    spec.setting = setting;
    spec.n = 100;
    spec.p = 400;
    spec.reps = 100;
    spec.base_seed = 5;
    auto s = summary_by_method(spec);
    out.check(s["direct"].coverage >= 0.85, fmt("%s: direct cov=%.2f", setting.c_str(), s["direct"].coverage));
    if (setting == "naive") {
      out.check(s["naive"].coverage >= 0.8, fmt("%s: naive cov=%.2f", setting.c_str(), s["naive"].coverage));
      out.check(s["debiased"].mean_width >= s["direct"].mean_width,
                fmt("%s: debiased width=%.3f direct width=%.3f", setting.c_str(), s["debiased"].mean_width,
                    s["direct"].mean_width));
    } else {
      out.check(s["naive"].coverage <= 0.5, fmt("%s: naive cov=%.2f", setting.c_str(), s["naive"].coverage));
    }
  }
  return out;
}

Outcome criterion_6() {
  Outcome out;
  for (const std::string setting : {"shared", "direct", "both"}) {
    sl::StudySpec spec;
    spec.study = sl::Study::sas;
    spec.setting = setting;
    spec.n = 200;
    spec.p = 200;
    spec.reps = 100;
    spec.base_seed = 6;
    auto s = summary_by_method(spec);
    out.check(s["naive"].coverage <= 0.8, fmt("%s: naive cov=%.2f", setting.c_str(), s["naive"].coverage));
    out.check(s["shared"].coverage >= 0.85, fmt("%s: shared cov=%.2f", setting.c_str(), s["shared"].coverage));
    out.check(s["direct"].coverage >= 0.85, fmt("%s: direct cov=%.2f", setting.c_str(), s["direct"].coverage));
    if (setting == "direct")
      out.check(s["naive"].rmse >= 2.0 * s["direct"].rmse,
                fmt("%s: naive rmse=%.3f direct rmse=%.3f", setting.c_str(), s["naive"].rmse, s["direct"].rmse));
  }
  return out;
}

Outcome criterion_7() {
  Outcome out;
  double sop_rmse = 0.0, ipw_rmse = 0.0;
  for (Index p : {Index{5}, Index{20}}) {
    sl::StudySpec spec;
    spec.study = sl::Study::gp;
    spec.setting = "nonlinear_hetero";
    spec.n = 250;
    spec.p = p;
    spec.reps = 50;
    spec.base_seed = 7;
    spec.methods = {"naive", "ipw", "sop_gp"};
    auto s = summary_by_method(spec);
    sop_rmse += s["sop_gp"].rmse / 2.0;
    ipw_rmse += s["ipw"].rmse / 2.0;
    if (p == 20)
      out.check(s["naive"].coverage <= s["sop_gp"].coverage - 0.15,
                fmt("P=20: naive cov=%.2f sop_gp cov=%.2f", s["naive"].coverage, s["sop_gp"].coverage));
    else
      out.check(s["naive"].coverage >= 0.8, fmt("P=5: naive cov=%.2f", s["naive"].coverage));
  }
  out.check(sop_rmse <= ipw_rmse, fmt("mean rmse sop_gp=%.3f ipw=%.3f", sop_rmse, ipw_rmse));
  return out;
}

Outcome criterion_8() {
  const Index n = 500, p = 1000;
  const double r = static_cast<double>(p) / n;
  Rng rng(8);
  const auto sp = spectra::sample_spectra(rng.normal_matrix(n, p));
  const VectorXd scaled = sp.outer.eigenvalues() / r;
  const auto [a, b] = spectra::mp_support(r);
  const auto h = spectra::histogram(std::vector<double>(scaled.data(), scaled.data() + scaled.size()), a, b, 50);
  const double l1 = spectra::mp_l1_distance(h, r);
  Outcome out;
  out.check(l1 <= 0.05, fmt("L1=%.4f", l1));
  return out;
}

Outcome criterion_9() {
  std::map<double, std::map<std::string, sl::SummaryRow>> s;
  for (double sx : {0.05, 1.0}) {
    sl::StudySpec spec;
    spec.study = sl::Study::factor;
    spec.n = 200;
    spec.p = 200;
    spec.reps = 100;
    spec.factors = 5;
    spec.sigma_x = sx;
    spec.setting = fmt("sigma_x=%g", sx);
    spec.base_seed = 9;
    s[sx] = summary_by_method(spec);
  }
  const double n_lo = s[0.05]["naive"].rmse, n_hi = s[1.0]["naive"].rmse;
  const double d_lo = s[0.05]["direct"].rmse, d_hi = s[1.0]["direct"].rmse;
  Outcome out;
  out.check(n_lo <= 0.5 * n_hi, fmt("naive rmse %.4f (0.05) vs %.4f (1.0)", n_lo, n_hi));
  const double rel = std::abs(d_lo - d_hi) / std::max(d_lo, d_hi);
  out.check(rel < 0.30, fmt("direct rmse %.4f vs %.4f, relative change %.2f", d_lo, d_hi, rel));
  return out;
}

// ---------------------------------------------------------------------------
// Oracle suites

double log_gauss_marginal(const MatrixXd& S, const VectorXd& y) {
  const Eigen::LLT<MatrixXd> llt(S);
  const MatrixXd L = llt.matrixL();
  return -0.5 * (2.0 * L.diagonal().array().log().sum() + y.dot(llt.solve(y)));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dogma");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

Outcome criterion_10() {
  Outcome out;
  {
    Rng rng(101);
    const MatrixXd psi = rng.normal_matrix(8, 4);
    const VectorXd y = rng.normal_vector(8);
    const VectorXd pen = (VectorXd(4) << 0.0, 0.5, 2.0, 7.0).finished();
    const double s2 = 0.9;
    const auto post = ridge_posterior(psi, y, pen, s2);
    MatrixXd M = psi.transpose() * psi;
    M.diagonal() += s2 * pen;
    const MatrixXd Minv = M.fullPivLu().inverse();
    const double e = std::max((post.mean - Minv * psi.transpose() * y).cwiseAbs().maxCoeff(),
                              (post.covariance - s2 * Minv).cwiseAbs().maxCoeff());
    out.check(e <= 1e-8, fmt("ridge dense solve err=%.1e", e));
  }
  {
    Rng rng(102);
    const Index n = 30;
    const MatrixXd X = rng.normal_matrix(n, 2);
    const VectorXd y = 0.35 * X.col(0) + 0.05 * X.col(1) + rng.normal_vector(n);
    const VectorXd p = Eigen::Vector2d(0.4, 0.3), v = Eigen::Vector2d(1.0, 2.0);
    double w[2][2], total = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        MatrixXd S = MatrixXd::Identity(n, n);
        if (i) S += v[0] * X.col(0) * X.col(0).transpose();
        if (j) S += v[1] * X.col(1) * X.col(1).transpose();
        w[i][j] = (i ? p[0] : 1 - p[0]) * (j ? p[1] : 1 - p[1]) * std::exp(log_gauss_marginal(S, y));
        total += w[i][j];
      }
    SpikeSlabConfig cfg;
    cfg.inclusion = p;
    cfg.slab_var = v;
    cfg.iterations = 50000;
    cfg.burn_in = 1000;
    const VectorXd ip = spike_slab_gibbs(X, y, cfg, 103).inclusion_probabilities();
    const double e = std::max(std::abs(ip[0] - (w[1][0] + w[1][1]) / total), std::abs(ip[1] - (w[0][1] + w[1][1]) / total));
    out.check(e <= 0.03, fmt("gibbs enumeration err=%.3f", e));
  }
  {
    Rng rng(104);
    const MatrixXd G = rng.normal_matrix(3, 3);
    const auto cov = sb::CovarianceModel::explicit_matrix(G * G.transpose() + 0.5 * MatrixXd::Identity(3, 3));
    sb::LinearModelPair m;
    m.beta = Eigen::Vector3d(0.8, -0.3, 0.5);
    m.phi = Eigen::Vector3d(0.4, 0.6, -0.2);
    m.sigma2_a = 1.5;
    const double truth = sb::delta_linear(1.0, m, cov);
    const Index n = 1000000;
    const MatrixXd Xs = cov.sample(n, rng);
    const VectorXd A = Xs * m.phi + std::sqrt(m.sigma2_a) * rng.normal_vector(n);
    const VectorXd Y1 = Xs * m.beta + rng.normal_vector(n);
    const VectorXd ac = A.array() - A.mean(), yc = Y1.array() - Y1.mean();
    const double slope = ac.dot(yc) / ac.squaredNorm();
    const double se = std::sqrt((yc - slope * ac).squaredNorm() / (n - 2.0) / ac.squaredNorm());
    out.check(std::abs(slope - truth) <= 3.0 * se, fmt("delta_linear mc z=%.2f", std::abs(slope - truth) / se));
  }
  {
    Rng rng(105);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      VectorXd x = (rng.normal_vector(40).array().square() * 2.0).matrix();
      x.tail(10).setZero();
      const auto s = spectra::Spectrum::from_eigenvalues(x);
      const double lambda = 0.1 + 5.0 * rng.uniform();
      for (int j = 1; j <= 4; ++j)
        for (int k = 0; k <= 3; ++k) {
          const double direct = (x.array().pow(k) / (x.array() + lambda).pow(j)).mean();
          worst = std::max(worst, std::abs(spectra::psi_moment_recursive(s, j, k, lambda) - direct) / std::abs(direct));
        }
    }
    out.check(worst <= 1e-10, fmt("psi recursion rel err=%.1e", worst));
  }
  {
    Rng rng(106);
    std::vector<double> vals;
    for (int i = 0; i < 200; ++i) vals.push_back(rng.uniform());
    const auto basis = gp::SplineBasis::fit(vals, 10);
    const VectorXd t = VectorXd::LinSpaced(101, -0.2, 1.2);
    const MatrixXd B = basis.evaluate(t);
    const VectorXd target = (3.0 * t.array() + 1.0).matrix();
    const VectorXd coef = B.colPivHouseholderQr().solve(target);
    const double e = (B * coef - target).cwiseAbs().maxCoeff();
    out.check(e <= 1e-8, fmt("spline linear reproduction err=%.1e", e));
  }
  {
    const fs::path root = fs::temp_directory_path() / ("dogma_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    const std::string a = (root / "a").string(), b = (root / "b").string(), c = (root / "c").string();
    bool ok = run_cli({"simulate", "--study", "ridge", "--setting", "fixed", "--n", "40", "--p", "80", "--reps", "4",
                       "--seed", "11", "--out", a}) == 0;
    ok = ok && run_cli({"simulate", "--config", (root / "a" / "manifest.json").string(), "--out", b}) == 0;
    ok = ok && run_cli({"simulate", "--study", "ridge", "--setting", "fixed", "--n", "40", "--p", "80", "--reps", "4",
                        "--seed", "11", "--workers", "3", "--out", c}) == 0;
    for (const char* f : {"records.csv", "summary.csv"}) {
      const std::string ref = slurp(root / "a" / f);
      ok = ok && !ref.empty() && ref == slurp(root / "b" / f) && ref == slurp(root / "c" / f);
    }
    fs::remove_all(root);
    out.check(ok, "cli replay byte-identical");
  }
  return out;
}

const std::map<int, std::pair<const char*, std::function<Outcome()>>>& criteria() {
  static const std::map<int, std::pair<const char*, std::function<Outcome()>>> c{
      {1, {"naive ridge bias formula vs Monte Carlo", criterion_1}},
      {2, {"Z-prior bias formula and oracle unbiasedness", criterion_2}},
      {3, {"prior concentration of the selection bias", criterion_3}},
      {4, {"random-effects limit of the selection bias", criterion_4}},
      {5, {"ridge study at reduced scale", criterion_5}},
      {6, {"spike-and-slab study", criterion_6}},
      {7, {"Gaussian-process study subset", criterion_7}},
      {8, {"Marchenko-Pastur histogram", criterion_8}},
      {9, {"latent-factor mitigation", criterion_9}},
      {10, {"oracle suites", criterion_10}},
  };
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criterion" && i + 1 < argc) {
      which.push_back(std::atoi(argv[++i]));
    } else {
      std::fprintf(stderr, "usage: acceptance [--criterion k]...\n");
      return 2;
    }
  }
  if (which.empty())
    for (const auto& [k, _] : criteria()) which.push_back(k);

  int failures = 0;
  for (int k : which) {
    const auto it = criteria().find(k);
    if (it == criteria().end()) {
      std::fprintf(stderr, "unknown criterion %d\n", k);
      return 2;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = it->second.second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %d (%s): %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", k, it->second.first, o.detail.c_str(),
                secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
