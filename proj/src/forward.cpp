#include "oscid/forward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace oscid {

namespace {

using Complex = std::complex<double>;
using Matrix2c = Eigen::Matrix<Complex, 2, 2>;
using Vector2c = Eigen::Matrix<Complex, 2, 1>;

Channel checked(Channel c) {
  if (c != Channel::q1 && c != Channel::q2)
    throw InvalidInput("channel must be 1 or 2");
  return c;
}

// First-order form x' = A x + B b(t) of the physical system, x = (q, q').
struct FirstOrderSystem {
  Eigen::Matrix4d a;
  Eigen::Vector4d b;
  Eigen::Matrix2d t;
};

FirstOrderSystem first_order_system(const ParamVector& p,
                                    const HybridStiffness<double>& hybrid) {
  const Eigen::Matrix2d t = rotation_from_theta(p.theta(), p.branch);
  const Eigen::Matrix2d c = physical_stiffness_from_hybrid(t, hybrid);
  const Eigen::Vector2d damping(two_pi<double> * p.d1(),
                                two_pi<double> * p.d2());

  FirstOrderSystem sys;
  sys.t = t;
  sys.a.setZero();
  sys.a.topRightCorner<2, 2>().setIdentity();
  sys.a.bottomLeftCorner<2, 2>() = -c;
  sys.a.bottomRightCorner<2, 2>() = -damping.asDiagonal().toDenseMatrix();
  sys.b.setZero();
  sys.b.tail<2>() = t.transpose() * Eigen::Vector2d::Ones();
  return sys;
}

}  // namespace

void validate(const ControlPair& pair) {
  if (!(pair.u1 > 0) || !(pair.u2 > 0))
    throw InvalidInput("drive frequencies must be positive");
  if (!(pair.u1 < pair.u2)) throw InvalidInput("drive pair needs u1 < u2");
  if (!(pair.amplitude > 0)) throw InvalidInput("drive amplitude must be positive");
}

std::size_t TimeWindow::samples() const {
  return static_cast<std::size_t>(std::llround((t_total - t_trans) / dt));
}

std::size_t TimeWindow::first_step() const {
  return static_cast<std::size_t>(std::ceil(t_trans / dt - 1e-9));
}

void validate(const TimeWindow& w) {
  if (!(w.dt > 0)) throw InvalidInput("time step must be positive");
  if (!(w.t_trans > 0) || !(w.t_trans < w.t_total))
    throw InvalidInput("window needs 0 < t_trans < t_total");
  const double count = (w.t_total - w.t_trans) / w.dt;
  if (std::abs(count - std::round(count)) > 1e-6 * std::max(1.0, count))
    throw InvalidInput("window length is not an integer number of steps");
}

double drive_value(const ControlPair& pair, double t) {
  return pair.amplitude * std::cos(two_pi<double> * pair.u1 * t) +
         pair.amplitude * std::cos(two_pi<double> * pair.u2 * t);
}

Channel nearest_channel(std::span<const ControlPair> pairs,
                        const HybridStiffness<double>& hybrid) {
  if (pairs.empty()) throw InvalidInput("no control pairs");
  double centre = 0.0;
  for (const auto& pr : pairs) centre += 0.5 * (pr.u1 + pr.u2);
  centre /= static_cast<double>(pairs.size());
  return std::abs(centre - hybrid.eta_plus) <= std::abs(centre - hybrid.eta_minus)
             ? Channel::q1
             : Channel::q2;
}

std::complex<double> frequency_response(const ParamVector& p,
                                        const HybridStiffness<double>& hybrid,
                                        double u, double amplitude,
                                        Channel channel) {
  checked(channel);
  const Eigen::Matrix2d t = rotation_from_theta(p.theta(), p.branch);
  const Eigen::Matrix2d c = physical_stiffness_from_hybrid(t, hybrid);
  const double w = two_pi<double> * u;

  Matrix2c m = (c - w * w * Eigen::Matrix2d::Identity()).cast<Complex>();
  m(0, 0) += Complex(0.0, w * two_pi<double> * p.d1());
  m(1, 1) += Complex(0.0, w * two_pi<double> * p.d2());

  const Complex det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  const double scale = m.cwiseAbs().maxCoeff();
  if (!(std::abs(det) >= 1e-300 * scale * scale) || !std::isfinite(std::abs(det)))
    throw SingularAtDrive("dynamic stiffness is singular at the drive frequency");

  const Vector2c rhs =
      (amplitude * (t.transpose() * Eigen::Vector2d::Ones())).cast<Complex>();
  Vector2c q;
  q(0) = (m(1, 1) * rhs(0) - m(0, 1) * rhs(1)) / det;
  q(1) = (m(0, 0) * rhs(1) - m(1, 0) * rhs(0)) / det;
  const Vector2c hybrid_q = t.cast<Complex>() * q;
  return hybrid_q(to_int(channel) - 1);
}

Eigen::Vector2d steady_peak_amplitudes(const ParamVector& p,
                                       const HybridStiffness<double>& hybrid,
                                       const ControlPair& pair,
                                       Channel channel) {
  return {std::abs(frequency_response(p, hybrid, pair.u1, pair.amplitude, channel)),
          std::abs(frequency_response(p, hybrid, pair.u2, pair.amplitude, channel))};
}

void simulate_time_domain(const ParamVector& p,
                          const HybridStiffness<double>& hybrid,
                          const ControlPair& pair, const TimeWindow& window,
                          const SampleSink& sink) {
  validate(window);
  const double fastest =
      std::max({hybrid.eta_plus, hybrid.eta_minus, pair.u1, pair.u2});
  if (window.dt > 1.0 / (20.0 * fastest))
    throw StepTooLarge("time step must resolve 20 samples per fastest period");

  const FirstOrderSystem sys = first_order_system(p, hybrid);
  const double dt = window.dt;
  const std::size_t n0 = window.first_step();
  const std::size_t n_end = n0 + window.samples() - 1;

  auto rhs = [&](double t, const Eigen::Vector4d& x) -> Eigen::Vector4d {
    return sys.a * x + sys.b * drive_value(pair, t);
  };

  Eigen::Vector4d x = Eigen::Vector4d::Zero();
  for (std::size_t n = 0;; ++n) {
    if (n >= n0) sink(n - n0, sys.t * x.head<2>());
    if (n == n_end) break;
    const double t = static_cast<double>(n) * dt;
    const Eigen::Vector4d k1 = rhs(t, x);
    const Eigen::Vector4d k2 = rhs(t + 0.5 * dt, x + 0.5 * dt * k1);
    const Eigen::Vector4d k3 = rhs(t + 0.5 * dt, x + 0.5 * dt * k2);
    const Eigen::Vector4d k4 = rhs(t + dt, x + dt * k3);
    x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
}

Trajectory simulate_time_domain(const ParamVector& p,
                                const HybridStiffness<double>& hybrid,
                                const ControlPair& pair,
                                const TimeWindow& window) {
  validate(window);
  Trajectory out{window, Eigen::Matrix2Xd(2, static_cast<Eigen::Index>(window.samples()))};
  simulate_time_domain(p, hybrid, pair, window,
                       [&](std::size_t k, const Eigen::Vector2d& q) {
                         out.samples.col(static_cast<Eigen::Index>(k)) = q;
                       });
  return out;
}

Spectrum spectrum_of_window(const Trajectory& trajectory, Channel channel) {
  checked(channel);
  const auto n = trajectory.samples.cols();
  if (n == 0) throw EmptyWindow("trajectory has no samples");

  std::vector<double> signal(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k)
    signal[static_cast<std::size_t>(k)] = trajectory.samples(to_int(channel) - 1, k);

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> freq;
  fft.fwd(freq, signal);

  const Eigen::Index bins = n / 2 + 1;
  const double df = 1.0 / (static_cast<double>(n) * trajectory.window.dt);
  Spectrum s;
  s.frequencies.resize(bins);
  s.amplitudes.resize(bins);
  for (Eigen::Index k = 0; k < bins; ++k) {
    s.frequencies[k] = static_cast<double>(k) * df;
    s.amplitudes[k] = std::abs(freq[static_cast<std::size_t>(k)]) / static_cast<double>(n);
  }
  return s;
}

Eigen::VectorXd windowed_amplitudes(const ParamVector& p,
                                    const HybridStiffness<double>& hybrid,
                                    const ControlPair& pair,
                                    const TimeWindow& window, Channel channel,
                                    const Eigen::VectorXd& frequencies) {
  checked(channel);
  validate(window);
  const auto nf = frequencies.size();
  const double dt = window.dt;

  // Phasor recurrence exp(-i 2 pi f k dt), re-anchored periodically so the
  // rounding drift stays at machine precision.
  constexpr std::size_t kResync = 4096;
  Eigen::VectorXcd step(nf), phasor(nf), acc = Eigen::VectorXcd::Zero(nf);
  for (Eigen::Index j = 0; j < nf; ++j)
    step[j] = std::polar(1.0, -two_pi<double> * frequencies[j] * dt);

  const int row = to_int(channel) - 1;
  simulate_time_domain(p, hybrid, pair, window,
                       [&](std::size_t k, const Eigen::Vector2d& q) {
                         if (k % kResync == 0) {
                           for (Eigen::Index j = 0; j < nf; ++j) {
                             const double cycles = frequencies[j] * dt * static_cast<double>(k);
                             phasor[j] = std::polar(1.0, -two_pi<double> * (cycles - std::floor(cycles)));
                           }
                         }
                         acc += q[row] * phasor;
                         phasor = phasor.cwiseProduct(step);
                       });
  return acc.cwiseAbs() / static_cast<double>(window.samples());
}

}  // namespace oscid
