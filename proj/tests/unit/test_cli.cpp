#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "oscid/cli.hpp"
#include "oscid/config.hpp"
#include "oscid/data.hpp"

namespace {

using namespace oscid;
namespace fs = std::filesystem;
using Json = nlohmann::json;

const fs::path kConfigs = fs::path(OSCID_SOURCE_DIR) / "configs";

int tool(const std::string& args) {
  const std::string cmd = std::string(OSCID_TOOL) + " -q " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("oscid_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Generated once: gen, calibrate, fit and report on the bundled config.
class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new fs::path(scratch("pipeline"));
    gen_rc_ = tool("gen --config " + (kConfigs / "table1_q1.cfg").string() + " --out " +
                   (data() / "").string());
    cal_rc_ = tool("calibrate --config " + cfg().string() + " --out " + (*root_ / "cal").string());
    fit_rc_ = tool("fit --config " + cfg().string() + " --out " + (*root_ / "fit").string());
    rep_rc_ = tool("report --data " + (*root_ / "fit").string() + " --out " +
                   (*root_ / "rep").string());
  }
  static void TearDownTestSuite() {
    fs::remove_all(*root_);
    delete root_;
  }
  static fs::path data() { return *root_ / "data"; }
  static fs::path cfg() { return data() / "experiment.cfg"; }

  static fs::path* root_;
  static int gen_rc_, cal_rc_, fit_rc_, rep_rc_;
};

fs::path* Pipeline::root_ = nullptr;
int Pipeline::gen_rc_ = -1;
int Pipeline::cal_rc_ = -1;
int Pipeline::fit_rc_ = -1;
int Pipeline::rep_rc_ = -1;

TEST_F(Pipeline, GenWritesALoadableExperiment) {
  ASSERT_EQ(gen_rc_, 0);
  for (int m = 1; m <= 5; ++m)
    EXPECT_TRUE(fs::exists(data() / ("pair_" + std::to_string(m) + ".csv")));
  const ExperimentSet set = load_experiment(cfg(), data());
  EXPECT_EQ(set.n_c(), 5u);
  EXPECT_EQ(set.pairs[0].u1, 6940160.0);
  const KeyValueFile kv = KeyValueFile::read(cfg());
  EXPECT_EQ(read_scenario(kv).truth.seed, 42u);
}

TEST_F(Pipeline, GenIsReproducible) {
  const fs::path again = *root_ / "again";
  ASSERT_EQ(tool("gen --config " + (kConfigs / "table1_q1.cfg").string() + " --out " +
                 again.string()),
            0);
  for (const auto& entry : fs::directory_iterator(data()))
    EXPECT_EQ(slurp(entry.path()), slurp(again / entry.path().filename()))
        << entry.path().filename();
  const fs::path other = *root_ / "other";
  ASSERT_EQ(tool("gen --config " + (kConfigs / "table1_q1.cfg").string() + " --seed 7 --out " +
                 other.string()),
            0);
  EXPECT_NE(slurp(data() / "pair_1.csv"), slurp(other / "pair_1.csv"));
}

TEST_F(Pipeline, CalibrateRecoversTheEigenfrequency) {
  ASSERT_EQ(cal_rc_, 0);
  const Json j = Json::parse(slurp(*root_ / "cal" / "calibration.json"));
  EXPECT_EQ(j.at("channel").get<int>(), 1);
  EXPECT_LT(std::abs(j.at("eta_Hz").get<double>() / 6.94e6 - 1.0), 1e-6);
  EXPECT_GT(j.at("chi_ref").get<double>(), 0.0);
  // The squared response is the exact Lorentzian; its width recovers Q.
  EXPECT_LT(std::abs(j.at("power_fit").at("Q_fit").get<double>() / 69400.0 - 1.0), 0.02);
}

TEST_F(Pipeline, FitWritesReportDeviationAndHistory) {
  ASSERT_EQ(fit_rc_, 0);
  const auto dev = csv_rows(*root_ / "fit" / "deviation.csv");
  EXPECT_EQ(dev.size(), 10u);
  EXPECT_EQ(slurp(*root_ / "fit" / "deviation.csv").substr(0, 37),
            "pair,tone,u_Hz,dev_initial,dev_final\n");
  const auto hist = csv_rows(*root_ / "fit" / "history.csv");
  EXPECT_GE(hist.size(), 2u);
  EXPECT_LE(hist.size(), 18u);
  const Json j = Json::parse(slurp(*root_ / "fit" / "report.json"));
  EXPECT_LT(j.at("improvement_ratio").get<double>(), 0.3);
  EXPECT_TRUE(j.contains("truth"));
}

TEST_F(Pipeline, FitIsDeterministic) {
  ASSERT_EQ(fit_rc_, 0);
  const fs::path again = *root_ / "fit2";
  ASSERT_EQ(tool("fit --config " + cfg().string() + " --out " + again.string()), 0);
  for (const char* f : {"report.json", "deviation.csv", "history.csv"})
    EXPECT_EQ(slurp(*root_ / "fit" / f), slurp(again / f)) << f;
}

TEST_F(Pipeline, ReportWritesRatiosAndSummary) {
  ASSERT_EQ(rep_rc_, 0);
  const auto rows = csv_rows(*root_ / "rep" / "improvement.csv");
  ASSERT_EQ(rows.size(), 10u);
  for (const auto& r : rows) {
    const double d0 = std::stod(r[3]), d1 = std::stod(r[4]), ratio = std::stod(r[5]);
    if (d1 < d0) EXPECT_LT(ratio, 1.0);
  }
  const std::string summary = slurp(*root_ / "rep" / "summary.txt");
  EXPECT_NE(summary.find("<lambda>"), std::string::npos);
  EXPECT_NE(summary.find(" MHz"), std::string::npos);
}

TEST_F(Pipeline, ReportRatioIsOneWhenNothingChanged) {
  const fs::path dir = *root_ / "flat_report";
  fs::create_directories(dir);
  Json j = Json::parse(slurp(*root_ / "fit" / "report.json"));
  for (auto& row : j.at("deviation")) row["dev_final"] = row.at("dev_initial");
  std::ofstream(dir / "report.json") << j.dump(2);
  ASSERT_EQ(tool("report --data " + dir.string() + " --out " + dir.string()), 0);
  for (const auto& r : csv_rows(dir / "improvement.csv")) EXPECT_EQ(std::stod(r[5]), 1.0);
}

TEST_F(Pipeline, SimulateAtTruthMatchesLabPeaks) {
  const fs::path out = *root_ / "sim";
  ASSERT_EQ(tool("simulate --config " + cfg().string() + " --p 1.9498,100,100 --out " +
                 out.string()),
            0);
  const auto rows = csv_rows(out / "peaks.csv");
  ASSERT_EQ(rows.size(), 10u);
  for (const auto& r : rows) EXPECT_LE(std::abs(std::stod(r[3]) - std::stod(r[4])), 2.0 * 0.25e-6);
  EXPECT_TRUE(fs::exists(out / "sim_pair_5.csv"));
}

TEST_F(Pipeline, SimulateWithZeroAmplitudeGivesZeroSpectra) {
  const fs::path out = *root_ / "sim0";
  ASSERT_EQ(tool("simulate --config " + cfg().string() + " --p 1.9498,100,100 --amplitude 0 --out " +
                 out.string()),
            0);
  for (int m = 1; m <= 5; ++m) {
    const Spectrum s = read_spectrum_csv(out / ("sim_pair_" + std::to_string(m) + ".csv"));
    EXPECT_EQ(s.amplitudes.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST_F(Pipeline, FlatSweepIsACalibrationFailure) {
  const fs::path dir = *root_ / "flat";
  fs::copy(data(), dir);
  Spectrum frf = read_spectrum_csv(dir / "frf.csv");
  write_spectrum_csv(dir / "frf.csv", frf.frequencies,
                     Eigen::VectorXd::Constant(frf.frequencies.size(), 0.25e-6));
  EXPECT_EQ(tool("calibrate --config " + (dir / "experiment.cfg").string() + " --out " +
                 (dir / "cal").string()),
            3);
}

TEST_F(Pipeline, VanishedPeakIsAnOptimizerFailureWithPartialHistory) {
  const fs::path dir = *root_ / "nopeak";
  fs::copy(data(), dir);
  Spectrum s = read_spectrum_csv(dir / "pair_2.csv");
  for (Eigen::Index i = 0; i < s.frequencies.size(); ++i)
    if (std::abs(s.frequencies[i] - 6.94018e6) <= 5.0) s.amplitudes[i] = 0.0;
  write_spectrum_csv(dir / "pair_2.csv", s.frequencies, s.amplitudes);
  EXPECT_EQ(tool("fit --config " + (dir / "experiment.cfg").string() + " --out " +
                 (dir / "out").string()),
            4);
  EXPECT_TRUE(fs::exists(dir / "out" / "history.csv"));
  EXPECT_FALSE(fs::exists(dir / "out" / "report.json"));
}

TEST(Cli, ConfigErrorsExitTwo) {
  const fs::path dir = scratch("config_errors");
  // A design without [truth].
  std::ofstream(dir / "no_truth.cfg")
      << "[experiment]\nn_c = 1\namplitude_A = 1\nnoise_floor_uV = 0.25\n"
         "[drift]\neta_plus_start_MHz = 6.94\neta_plus_end_MHz = 6.94\n"
         "eta_minus_start_MHz = 7.03\neta_minus_end_MHz = 7.03\nQ_plus = 1e5\nQ_minus = 1e5\n"
         "[pairs]\n1, 6.9401, 6.9402\n";
  EXPECT_EQ(tool("gen --config " + (dir / "no_truth.cfg").string() + " --out " +
                 (dir / "o").string()),
            2);
  std::ofstream(dir / "bad_unit.cfg") << slurp(kConfigs / "table1_q1.cfg") << "\n[grid]\nspectrum_step_THz = 1\n";
  EXPECT_EQ(tool("gen --config " + (dir / "bad_unit.cfg").string() + " --out " +
                 (dir / "o").string()),
            2);
  EXPECT_EQ(tool("fit --config " + (dir / "missing.cfg").string()), 2);
  EXPECT_EQ(tool("report --data " + dir.string()), 2);
  EXPECT_EQ(tool("fit"), 2);
  EXPECT_EQ(tool("fit --config x --branch sideways"), 2);
  EXPECT_EQ(tool("frobnicate"), 2);
  fs::remove_all(dir);
}

// Desk-scale experiment (tens of Hz) on which the RK4 path runs quickly.
TEST(Cli, OracleAgreesWithClosedForm) {
  const fs::path dir = scratch("oracle");
  SyntheticTruth truth;
  truth.theta = 0.7;
  truth.d1 = 1.5;
  truth.d2 = 2.5;
  truth.chi = 1.0;
  truth.eta_start = {20.0, 26.0};
  truth.eta_end = {20.2, 26.2};
  truth.noise_floor = 1e-6;
  GridSpec grid;
  grid.spectrum_half_span = 20.0;
  grid.spectrum_step = 0.1;
  grid.frf_half_span = 10.0;
  grid.frf_step = 0.1;
  const std::vector<ControlPair> pairs{{19.5, 20.5, 1.0}, {19.8, 21.0, 1.0}};
  const ExperimentSet set = generate_synthetic(truth, pairs, grid, 3);
  const fs::path cfg = save_experiment(set, dir);

  ASSERT_EQ(tool("simulate --config " + cfg.string() + " --p 0.7,1.5,2.5 --out " +
                 (dir / "closed").string()),
            0);
  ASSERT_EQ(tool("simulate --config " + cfg.string() + " --p 0.7,1.5,2.5 --oracle --out " +
                 (dir / "oracle").string()),
            0);
  const auto closed = csv_rows(dir / "closed" / "peaks.csv");
  const auto oracle = csv_rows(dir / "oracle" / "peaks.csv");
  ASSERT_EQ(closed.size(), 4u);
  ASSERT_EQ(oracle.size(), 4u);
  for (std::size_t i = 0; i < closed.size(); ++i) {
    const double a = std::stod(closed[i][4]), b = std::stod(oracle[i][4]);
    EXPECT_LT(std::abs(a - b) / a, 1e-3) << "row " << i;
  }
  // The oracle needs resolvable damping.
  EXPECT_EQ(tool("simulate --config " + cfg.string() + " --p 0.7,0.5,2.5 --oracle --out " +
                 (dir / "x").string()),
            2);
  EXPECT_NE(slurp(dir / "closed" / "peaks.csv"), slurp(dir / "oracle" / "peaks.csv"));
  fs::remove_all(dir);
}

TEST(Cli, FormatMhz) {
  EXPECT_EQ(cli::format_mhz(6.9522e6), "6.9522 MHz");
  EXPECT_EQ(cli::format_mhz(647415.75), "0.6474 MHz");
}

}  // namespace
