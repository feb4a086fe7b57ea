#ifndef OSCID_FORWARD_HPP
#define OSCID_FORWARD_HPP

#include <complex>
#include <cstddef>
#include <functional>
#include <span>

#include <Eigen/Dense>

#include "oscid/model.hpp"

namespace oscid {

/// Which hybridized coordinate is observed.
enum class Channel { q1 = 1, q2 = 2 };

inline int to_int(Channel c) { return static_cast<int>(c); }

/// Two-tone drive A cos(2 pi u1 t) + A cos(2 pi u2 t), applied identically to
/// both hybridized coordinates.
struct ControlPair {
  double u1;
  double u2;
  double amplitude = 1.0;

  bool operator==(const ControlPair&) const = default;
};

void validate(const ControlPair& pair);

/// Sampling window [t_trans, t_total] with step dt. Samples are taken at
/// integer multiples of dt starting at the first one >= t_trans.
struct TimeWindow {
  double t_trans;
  double t_total;
  double dt;

  std::size_t samples() const;
  std::size_t first_step() const;
};

void validate(const TimeWindow& window);

struct Spectrum {
  Eigen::VectorXd frequencies;
  Eigen::VectorXd amplitudes;

  bool operator==(const Spectrum& o) const {
    return frequencies.size() == o.frequencies.size() &&
           amplitudes.size() == o.amplitudes.size() &&
           frequencies == o.frequencies && amplitudes == o.amplitudes;
  }
};

/// Hybridized coordinates T q sampled on a window; column k is time
/// (window.first_step() + k) * dt.
struct Trajectory {
  TimeWindow window;
  Eigen::Matrix2Xd samples;
};

double drive_value(const ControlPair& pair, double t);

/// Channel of the eigenfrequency closest to the mean drive frequency.
Channel nearest_channel(std::span<const ControlPair> pairs,
                        const HybridStiffness<double>& hybrid);

/// Steady-state phasor of the chosen hybridized coordinate under the single
/// tone A cos(2 pi u t) on both hybridized drive components.
std::complex<double> frequency_response(const ParamVector& p,
                                        const HybridStiffness<double>& hybrid,
                                        double u, double amplitude,
                                        Channel channel);

/// |frequency_response| at u1 and u2.
Eigen::Vector2d steady_peak_amplitudes(const ParamVector& p,
                                       const HybridStiffness<double>& hybrid,
                                       const ControlPair& pair, Channel channel);

using SampleSink = std::function<void(std::size_t, const Eigen::Vector2d&)>;

/// Fixed-step RK4 on the physical first-order system from rest. Every
/// sample in the window is handed to `sink` as (index, T q).
void simulate_time_domain(const ParamVector& p,
                          const HybridStiffness<double>& hybrid,
                          const ControlPair& pair, const TimeWindow& window,
                          const SampleSink& sink);

Trajectory simulate_time_domain(const ParamVector& p,
                                const HybridStiffness<double>& hybrid,
                                const ControlPair& pair,
                                const TimeWindow& window);

/// One-sided DFT magnitude |X_k| / N on k = 0..N/2, frequencies k / (N dt).
/// A cosine of amplitude a on an interior bin shows up with height a / 2.
Spectrum spectrum_of_window(const Trajectory& trajectory, Channel channel);

/// Same normalization as spectrum_of_window, evaluated only at `frequencies`
/// while integrating; no trajectory is stored.
Eigen::VectorXd windowed_amplitudes(const ParamVector& p,
                                    const HybridStiffness<double>& hybrid,
                                    const ControlPair& pair,
                                    const TimeWindow& window, Channel channel,
                                    const Eigen::VectorXd& frequencies);

/// Height of a steady tone in spectrum_of_window relative to its amplitude.
inline constexpr double kWindowConstant = 0.5;

}  // namespace oscid

#endif  // OSCID_FORWARD_HPP
