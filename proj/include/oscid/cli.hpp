#ifndef OSCID_CLI_HPP
#define OSCID_CLI_HPP

// Subcommands of the oscid tool. Each returns a process exit status:
//   0 success, 1 unexpected failure, 2 configuration or input error,
//   3 calibration failure, 4 optimizer failure.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include <Eigen/Dense>

#include "oscid/forward.hpp"
#include "oscid/model.hpp"

namespace oscid::cli {

enum class Subcommand { gen, calibrate, fit, simulate, report };
enum class Verbosity { quiet, normal, verbose };
enum class BranchChoice { rotation, reflection, both };

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitCalibration = 3;
inline constexpr int kExitOptimizer = 4;

struct CliInvocation {
  Subcommand subcommand = Subcommand::fit;
  std::filesystem::path config_path;
  /// Defaults to the directory holding the config (for report: out_dir).
  std::filesystem::path data_dir;
  std::filesystem::path out_dir = ".";
  std::optional<std::uint64_t> seed;
  bool oracle = false;
  BranchChoice branch = BranchChoice::both;
  std::optional<Channel> channel;  // empty: take the config's choice
  bool auto_channel = false;       // nearest eigenfrequency, whatever the config says
  Verbosity verbosity = Verbosity::normal;
  /// simulate: parameter triple (theta, d1 [Hz], d2 [Hz]).
  std::optional<Eigen::Vector3d> p;
  /// simulate: overrides the drive amplitude of the experiment.
  std::optional<double> amplitude;
};

/// Reads [truth] and the experiment design from the config and writes a
/// synthetic experiment (experiment.cfg, pair_<m>.csv, frf.csv) to out_dir.
int cmd_gen(const CliInvocation& inv, std::ostream& out, std::ostream& err);

/// Lorentzian fit of frf.csv and chi at p_ref; writes calibration.json.
int cmd_calibrate(const CliInvocation& inv, std::ostream& out, std::ostream& err);

/// Full reconstruction; writes report.json, deviation.csv and history.csv.
int cmd_fit(const CliInvocation& inv, std::ostream& out, std::ostream& err);

/// Simulated spectra at an explicit p: sim_pair_<m>.csv and peaks.csv.
int cmd_simulate(const CliInvocation& inv, std::ostream& out, std::ostream& err);

/// From report.json: improvement.csv and summary.txt.
int cmd_report(const CliInvocation& inv, std::ostream& out, std::ostream& err);

int run(const CliInvocation& inv, std::ostream& out, std::ostream& err);

/// "1.2345 MHz"-style value with four decimals.
std::string format_mhz(double hz);

}  // namespace oscid::cli

#endif  // OSCID_CLI_HPP
