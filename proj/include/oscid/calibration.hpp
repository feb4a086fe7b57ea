#ifndef OSCID_CALIBRATION_HPP
#define OSCID_CALIBRATION_HPP

#include <Eigen/Dense>

#include "oscid/forward.hpp"
#include "oscid/model.hpp"

namespace oscid {

/// Swept frequency response measured in the lab.
struct FrfSweep {
  Eigen::VectorXd frequencies;  // Hz, ascending
  Eigen::VectorXd amplitudes;   // V
  double noise_floor = 0.0;     // xi, V

  bool operator==(const FrfSweep& o) const {
    return frequencies.size() == o.frequencies.size() &&
           amplitudes.size() == o.amplitudes.size() &&
           frequencies == o.frequencies && amplitudes == o.amplitudes &&
           noise_floor == o.noise_floor;
  }
};

struct LorentzianFit {
  double eta;           // Hz
  double d;             // half width in rad/s, as it enters the shape
  double a_peak;        // V
  double residual_rms;  // V
  int iterations;
};

/// (A_peak - xi) / (1 + ((2 pi f - 2 pi eta) / d)^2)
double lorentzian_value(double f, double eta, double d, double a_peak, double xi);

/// Levenberg-Marquardt fit of (eta, d, A_peak) with xi held at the sweep's
/// noise floor. Starts from the arg-max, the half-maximum width read off the
/// grid and the maximum amplitude.
LorentzianFit fit_lorentzian(const FrfSweep& sweep);

/// Steady-state amplitude of the chosen channel under unit single-tone drive
/// cos(2 pi f t), for every f of the grid.
Eigen::VectorXd simulate_frf(const ParamVector& p,
                             const HybridStiffness<double>& hybrid,
                             const Eigen::VectorXd& grid, Channel channel);

/// chi_p = max(lab) / max(simulated FRF); depends on p through the
/// simulated maximum.
double scaling_factor(const ParamVector& p, const FrfSweep& lab,
                      const HybridStiffness<double>& hybrid,
                      const Eigen::VectorXd& sim_grid, Channel channel);

}  // namespace oscid

#endif  // OSCID_CALIBRATION_HPP
