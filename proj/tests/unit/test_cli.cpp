#include "dogma/cli.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using dogma::cli::run;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() / ("dogma_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  int call(std::vector<std::string> args) {
    args.insert(args.begin(), "dogma");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
  }

  std::string out(const std::string& name) const { return (root_ / name).string(); }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  }

  static std::vector<std::vector<std::string>> csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::stringstream ls(line);
      std::string cell;
      while (std::getline(ls, cell, ',')) cells.push_back(cell);
      if (!line.empty() && line.back() == ',') cells.emplace_back();
      rows.push_back(cells);
    }
    return rows;
  }

  fs::path root_;
};

}  // namespace

TEST(CliFormat, SeventeenDigits) {
  EXPECT_EQ(dogma::cli::format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(dogma::cli::format_double(2.0), "2");
  EXPECT_EQ(dogma::cli::format_double(NAN), "nan");
  EXPECT_EQ(dogma::cli::schema_version, 1);
}

TEST(CliFormat, GoldenHeaders) {
  EXPECT_EQ(dogma::cli::records_csv({}),
            "study,setting,method,rep,seed,estimate,post_sd,ci_lo,ci_hi,truth,elapsed_s,status\n");
  EXPECT_EQ(dogma::cli::summary_csv({}),
            "study,setting,method,n_reps,coverage,coverage_mcse,mean_width,mean_post_sd,rmse,rmse_mcse,bias,bias_mcse\n");
}

TEST_F(CliTest, SimulateCardinalityAndDeterminism) {
  const std::vector<std::string> args{"simulate", "--study", "ridge", "--setting", "naive", "--reps", "10", "--seed", "7",
                                      "--n", "40", "--p", "80"};
  auto a = args, b = args;
  a.insert(a.end(), {"--out", out("a")});
  b.insert(b.end(), {"--out", out("b"), "--workers", "2"});
  ASSERT_EQ(call(a), 0);
  ASSERT_EQ(call(b), 0);
  const auto rows = csv(root_ / "a" / "records.csv");
  EXPECT_EQ(rows.size(), 31u);
  EXPECT_EQ(slurp(root_ / "a" / "records.csv"), slurp(root_ / "b" / "records.csv"));
  EXPECT_EQ(slurp(root_ / "a" / "summary.csv"), slurp(root_ / "b" / "summary.csv"));
  EXPECT_TRUE(fs::exists(root_ / "a" / "manifest.json"));
}

TEST_F(CliTest, ManifestReplay) {
  ASSERT_EQ(call({"simulate", "--study", "sas", "--setting", "direct", "--reps", "3", "--seed", "5", "--n", "40", "--p", "30",
                  "--sas-iterations", "300", "--sas-burn-in", "50", "--out", out("first")}),
            0);
  ASSERT_EQ(call({"simulate", "--config", (root_ / "first" / "manifest.json").string(), "--out", out("replay")}), 0);
  EXPECT_EQ(slurp(root_ / "first" / "records.csv"), slurp(root_ / "replay" / "records.csv"));

  ASSERT_EQ(call({"spectra", "--n", "40", "--p", "80", "--seed", "3", "--out", out("s1")}), 0);
  ASSERT_EQ(call({"spectra", "--config", (root_ / "s1" / "manifest.json").string(), "--out", out("s2")}), 0);
  EXPECT_EQ(slurp(root_ / "s1" / "spectra_hist.csv"), slurp(root_ / "s2" / "spectra_hist.csv"));
  EXPECT_EQ(slurp(root_ / "s1" / "stieltjes.csv"), slurp(root_ / "s2" / "stieltjes.csv"));

  ASSERT_EQ(call({"concentration", "--p-list", "1,5", "--draws", "50", "--out", out("c1")}), 0);
  ASSERT_EQ(call({"concentration", "--config", (root_ / "c1" / "manifest.json").string(), "--out", out("c2")}), 0);
  EXPECT_EQ(slurp(root_ / "c1" / "concentration.csv"), slurp(root_ / "c2" / "concentration.csv"));

  ASSERT_EQ(call({"bias-curve", "--with-mc", "--reps", "5", "--n", "30", "--out", out("b1")}), 0);
  ASSERT_EQ(call({"bias-curve", "--config", (root_ / "b1" / "manifest.json").string(), "--out", out("b2")}), 0);
  EXPECT_EQ(slurp(root_ / "b1" / "bias_curve.csv"), slurp(root_ / "b2" / "bias_curve.csv"));
}

TEST_F(CliTest, ConfigErrors) {
  const fs::path cfg = root_ / "bad.json";
  std::ofstream(cfg) << R"({"study": "ridge", "colour": "blue"})";
  EXPECT_EQ(call({"simulate", "--config", cfg.string(), "--out", out("x")}), dogma::cli::exit_config);
  EXPECT_EQ(call({"simulate", "--study", "nonsense", "--out", out("x")}), dogma::cli::exit_config);
  EXPECT_EQ(call({"simulate", "--study", "ridge", "--setting", "sideways", "--out", out("x")}), dogma::cli::exit_config);
  EXPECT_EQ(call({"spectra", "--cov", "banded", "--out", out("x")}), dogma::cli::exit_config);
  EXPECT_EQ(call({"concentration", "--prior", "gp", "--out", out("x")}), dogma::cli::exit_config);
  EXPECT_EQ(call({"bias-curve", "--estimator", "zprior", "--r", "1", "--out", out("x")}), dogma::cli::exit_config);
  EXPECT_EQ(call({"bias-curve", "--lambdas", "1,-2", "--out", out("x")}), dogma::cli::exit_config);
  EXPECT_EQ(call({"spectra", "--out", "/proc/dogma_cannot_write"}), dogma::cli::exit_config);
  EXPECT_EQ(call({"frobnicate"}), dogma::cli::exit_config);
}

TEST_F(CliTest, ConfigFileAndFlagPrecedence) {
  const fs::path cfg = root_ / "c.json";
  std::ofstream(cfg) << R"({"n": 40, "p": 60, "seed": 4, "lambdas": [0.5, 2.0]})";
  ASSERT_EQ(call({"spectra", "--config", cfg.string(), "--seed", "9", "--out", out("s")}), 0);
  const std::string m = slurp(root_ / "s" / "manifest.json");
  EXPECT_NE(m.find("\"seed\": 9"), std::string::npos);
  EXPECT_NE(m.find("\"n\": 40"), std::string::npos);
  EXPECT_EQ(csv(root_ / "s" / "stieltjes.csv").size(), 3u);
}

TEST_F(CliTest, BiasCurveZeroShiftAndLimit) {
  ASSERT_EQ(call({"bias-curve", "--omega0", "0", "--out", out("z")}), 0);
  auto rows = csv(root_ / "z" / "bias_curve.csv");
  ASSERT_EQ(rows[0], (std::vector<std::string>{"lambda", "formula_bias"}));
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(std::stod(rows[i][1]), 0.0);

  // r = 2, tau2 = 1: eta = 2 and the mean eigenvalue of X X^T / N is close to r.
  ASSERT_EQ(call({"bias-curve", "--lambdas", "0.1,1,10,100,1000", "--r", "2", "--tau2", "1", "--n", "300", "--out", out("l")}), 0);
  rows = csv(root_ / "l" / "bias_curve.csv");
  const double limit = 2.0 / (2.0 + 2.0);
  EXPECT_NEAR(std::stod(rows.back()[1]), limit, 0.05 * limit);
}

TEST_F(CliTest, BiasCurveMonteCarloAgrees) {
  ASSERT_EQ(call({"bias-curve", "--r", "2", "--eta", "1", "--n", "100", "--lambdas", "0.5,1,2,5", "--with-mc", "--reps",
                  "300", "--out", out("mc")}),
            0);
  const auto rows = csv(root_ / "mc" / "bias_curve.csv");
  ASSERT_EQ(rows[0].size(), 4u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double f = std::stod(rows[i][1]), m = std::stod(rows[i][2]), se = std::stod(rows[i][3]);
    EXPECT_NEAR(m, f, 3.0 * se) << "lambda " << rows[i][0];
  }
}

TEST_F(CliTest, ConcentrationShrinksWithDimension) {
  ASSERT_EQ(call({"concentration", "--p-list", "1,10,50,400", "--draws", "2000", "--seed", "2", "--out", out("c")}), 0);
  const auto rows = csv(root_ / "c" / "concentration_summary.csv");
  ASSERT_EQ(rows.size(), 5u);
  for (std::size_t i = 2; i < rows.size(); ++i) EXPECT_LT(std::stod(rows[i][3]), std::stod(rows[i - 1][3]));
  const double ratio = std::stod(rows[4][3]) / std::stod(rows[4][4]);
  EXPECT_GE(ratio, 0.9);
  EXPECT_LE(ratio, 1.1);
  EXPECT_EQ(csv(root_ / "c" / "concentration.csv").size(), 1u + 4u * 2000u);
}

TEST_F(CliTest, SpectraLatentFactorApproachesInverse) {
  ASSERT_EQ(call({"spectra", "--cov", "factor", "--n", "200", "--p", "200", "--factors", "5", "--sigma-x", "0.001",
                  "--lambdas", "0.001,0.01", "--out", out("f")}),
            0);
  const auto rows = csv(root_ / "f" / "stieltjes.csv");
  EXPECT_GE(std::stod(rows[1][3]), 0.9);
}
