#ifndef OSCID_DATA_HPP
#define OSCID_DATA_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "oscid/calibration.hpp"
#include "oscid/forward.hpp"
#include "oscid/keyvalue.hpp"
#include "oscid/model.hpp"

namespace oscid {

/// Everything measured for one identification run. Frequencies in Hz,
/// amplitudes in V.
struct ExperimentSet {
  std::vector<ControlPair> pairs;
  /// Eigenfrequencies measured before and after the drive sequence.
  HybridStiffness<double> eta_start{};
  HybridStiffness<double> eta_end{};
  /// Per-pair eigenfrequencies, linearly interpolated between the endpoints.
  std::vector<HybridStiffness<double>> hybrid;
  double q_plus = 0.0;
  double q_minus = 0.0;
  double amplitude = 1.0;
  std::vector<Spectrum> spectra;
  double noise_floor = 0.0;
  /// Swept FRF, taken at eta_start.
  FrfSweep frf;
  Channel channel = Channel::q1;
  int peak_half_window_bins = 5;
  /// Noise-subtracted spectrum heights at (u1, u2) of every pair.
  std::vector<Eigen::Vector2d> lab_peaks;

  std::size_t n_c() const { return pairs.size(); }
  bool operator==(const ExperimentSet& o) const;
};

/// Ground truth behind a synthetic experiment.
struct SyntheticTruth {
  double theta = 1.9498;
  Branch branch = Branch::rotation;
  double d1 = 100.0;  // Hz
  double d2 = 100.0;  // Hz
  double chi = 3.0e6;  // V per response unit
  HybridStiffness<double> eta_start{6.9400e6, 7.0273e6};
  HybridStiffness<double> eta_end{6.9404e6, 7.0277e6};
  double noise_floor = 0.25e-6;  // V
  std::uint64_t seed = 42;

  ParamVector params() const { return {theta, d1, d2, branch}; }
};

/// Frequency grids of the synthetic spectra and the FRF sweep.
struct GridSpec {
  double spectrum_half_span = 1500.0;  // Hz around the mean drive frequency
  double spectrum_step = 0.25;         // Hz
  double frf_half_span = 1000.0;       // Hz around the swept eigenfrequency
  double frf_step = 5.0;               // Hz
  int peak_half_window_bins = 5;
};

/// What an experiment config says was driven and measured, without the
/// measurements themselves.
struct ExperimentDesign {
  std::vector<ControlPair> pairs;
  double amplitude = 1.0;
  double noise_floor = 0.0;
  HybridStiffness<double> eta_start{};
  HybridStiffness<double> eta_end{};
  std::optional<double> q_plus;
  std::optional<double> q_minus;
  std::optional<Channel> channel;  // empty for "auto"
  int peak_half_window_bins = 5;
};

/// Reads [experiment], [drift] and [pairs].
ExperimentDesign read_design(const KeyValueFile& kv);

/// Noise floor xi = mean amplitude; returns max(a - xi, 0) and xi.
std::pair<Spectrum, double> subtract_noise(const Spectrum& spectrum);

/// Largest amplitude with |f - u| <= half_window.
double extract_peak(const Spectrum& spectrum, double u, double half_window);

std::vector<HybridStiffness<double>> drift_interpolate(
    const HybridStiffness<double>& start, const HybridStiffness<double>& end,
    std::size_t n_c);

/// Recomputes per-pair hybrid stiffness and lab peaks from the raw fields.
void finalize(ExperimentSet& set);

ExperimentSet generate_synthetic(const SyntheticTruth& truth,
                                 std::span<const ControlPair> pairs,
                                 const GridSpec& grid, std::uint64_t seed,
                                 std::optional<Channel> channel = std::nullopt);

/// Reads `config_path` ([experiment], [drift], [pairs]) plus pair_<m>.csv and
/// frf.csv from `data_dir`.
ExperimentSet load_experiment(const std::filesystem::path& config_path,
                              const std::filesystem::path& data_dir);

/// Writes experiment.cfg (Hz/V keys, 17 significant digits), pair_<m>.csv
/// and frf.csv. `extra_sections` is appended verbatim to the config.
std::filesystem::path save_experiment(const ExperimentSet& set,
                                      const std::filesystem::path& dir,
                                      const std::string& extra_sections = {});

Spectrum read_spectrum_csv(const std::filesystem::path& path);
void write_spectrum_csv(const std::filesystem::path& path,
                        const Eigen::VectorXd& frequencies,
                        const Eigen::VectorXd& amplitudes);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace oscid

#endif  // OSCID_DATA_HPP
