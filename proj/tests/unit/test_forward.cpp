#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "desk_oracle.hpp"
#include "oscid/forward.hpp"

namespace {

using namespace oscid;
using oscid::testing::DeskInstance;
using oscid::testing::draw_desk_instance;
using oscid::testing::oracle_peaks;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

TEST(Drive, ValueAtZero) {
  EXPECT_DOUBLE_EQ(drive_value(ControlPair{1.0, 2.0, 1.0}, 0.0), 2.0);
}

TEST(Drive, BeatingIdentity) {
  const ControlPair pair{6.94016e6, 6.94036e6, 0.7};
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> t(0.0, 1e-2);
  for (int i = 0; i < 200; ++i) {
    const double s = t(rng);
    const double beat = 2.0 * pair.amplitude * std::cos(std::numbers::pi * (pair.u1 + pair.u2) * s) *
                        std::cos(std::numbers::pi * (pair.u1 - pair.u2) * s);
    EXPECT_NEAR(drive_value(pair, s), beat, 1e-9);
  }
  // The envelope repeats after 1 / (u2 - u1) = 5 ms.
  EXPECT_NEAR(1.0 / (pair.u2 - pair.u1), 5e-3, 1e-12);
}

TEST(ControlPairValidation, Rejects) {
  EXPECT_NO_THROW(validate(ControlPair{1.0, 2.0, 1.0}));
  EXPECT_THROW(validate(ControlPair{2.0, 1.0, 1.0}), InvalidInput);
  EXPECT_THROW(validate(ControlPair{0.0, 1.0, 1.0}), InvalidInput);
  EXPECT_THROW(validate(ControlPair{1.0, 2.0, 0.0}), InvalidInput);
}

TEST(TimeWindowValidation, Rejects) {
  EXPECT_NO_THROW(validate(TimeWindow{1.0, 2.0, 0.25}));
  EXPECT_EQ((TimeWindow{1.0, 2.0, 0.25}).samples(), 4u);
  EXPECT_EQ((TimeWindow{1.0, 2.0, 0.25}).first_step(), 4u);
  EXPECT_THROW(validate(TimeWindow{0.0, 2.0, 0.25}), InvalidInput);
  EXPECT_THROW(validate(TimeWindow{2.0, 1.0, 0.25}), InvalidInput);
  EXPECT_THROW(validate(TimeWindow{1.0, 2.0, 0.3}), InvalidInput);
  EXPECT_THROW(validate(TimeWindow{1.0, 2.0, -0.1}), InvalidInput);
}

TEST(FrequencyResponse, DecoupledMatchesScalarOscillator) {
  const HybridStiffness<double> h{20.0, 30.0};
  const ParamVector p(0.0, 1.5, 2.5);
  for (double u : {5.0, 12.0, 45.0, 80.0}) {
    for (Channel ch : {Channel::q1, Channel::q2}) {
      const double f0 = ch == Channel::q1 ? h.eta_plus : h.eta_minus;
      const double d = ch == Channel::q1 ? p.d1() : p.d2();
      const double w0 = kTwoPi * f0, w = kTwoPi * u;
      const double expected =
          2.0 / std::sqrt(std::pow(w0 * w0 - w * w, 2) + std::pow(kTwoPi * d * w, 2));
      EXPECT_LT(rel(std::abs(frequency_response(p, h, u, 2.0, ch)), expected), 1e-12);
    }
  }
}

TEST(FrequencyResponse, UndampedIsReal) {
  const HybridStiffness<double> h{6.94e6, 7.03e6};
  for (Branch b : {Branch::rotation, Branch::reflection}) {
    const ParamVector p(1.9498, 0.0, 0.0, b);
    const auto z = frequency_response(p, h, 6.9e6, 1.0, Channel::q1);
    EXPECT_EQ(z.imag(), 0.0);
    EXPECT_NE(z.real(), 0.0);
  }
}

TEST(FrequencyResponse, SingularAtUndampedResonance) {
  const HybridStiffness<double> h{20.0, 30.0};
  EXPECT_THROW(frequency_response(ParamVector(0.0, 0.0, 0.0), h, 20.0, 1.0, Channel::q1),
               SingularAtDrive);
  EXPECT_NO_THROW(frequency_response(ParamVector(0.0, 1e-6, 1e-6), h, 20.0, 1.0, Channel::q1));
}

TEST(FrequencyResponse, Linearity) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    const DeskInstance inst = draw_desk_instance(rng);
    const auto z1 = frequency_response(inst.p, inst.hybrid, inst.pair.u1, 1.0, inst.channel);
    const auto z3 = frequency_response(inst.p, inst.hybrid, inst.pair.u1, 3.7, inst.channel);
    EXPECT_LT(std::abs(z3 - 3.7 * z1) / std::abs(z3), 1e-10);
  }
}

// With equal dampings the observed coordinate decouples from the angle.
TEST(FrequencyResponse, IsotropicDampingHidesTheAngle) {
  const HybridStiffness<double> h{6.9402e6, 7.0275e6};
  const double ref = std::abs(
      frequency_response(ParamVector(0.3, 100.0, 100.0), h, 6.94016e6, 1.0, Channel::q1));
  for (double th : {-2.0, 0.7, 1.9498, 4.0})
    for (Branch b : {Branch::rotation, Branch::reflection})
      EXPECT_LT(rel(std::abs(frequency_response(ParamVector(th, 100.0, 100.0, b), h, 6.94016e6,
                                                1.0, Channel::q1)),
                    ref),
                1e-9);
  const double aniso = std::abs(
      frequency_response(ParamVector(0.3, 60.0, 150.0), h, 6.94016e6, 1.0, Channel::q1));
  const double aniso2 = std::abs(
      frequency_response(ParamVector(1.2, 60.0, 150.0), h, 6.94016e6, 1.0, Channel::q1));
  EXPECT_GT(rel(aniso, aniso2), 1e-3);
}

TEST(SteadyPeaks, DuplicatedToneAndScaling) {
  const HybridStiffness<double> h{20.0, 27.0};
  const ParamVector p(0.8, 1.0, 2.0);
  const Eigen::Vector2d same = steady_peak_amplitudes(p, h, ControlPair{21.0, 21.0, 1.0}, Channel::q1);
  EXPECT_EQ(same[0], same[1]);
  const Eigen::Vector2d a = steady_peak_amplitudes(p, h, ControlPair{19.0, 21.0, 1.0}, Channel::q1);
  const Eigen::Vector2d b = steady_peak_amplitudes(p, h, ControlPair{19.0, 21.0, 2.0}, Channel::q1);
  EXPECT_LT((b - 2.0 * a).norm() / b.norm(), 1e-14);
}

TEST(NearestChannel, PicksCloserEigenfrequency) {
  const HybridStiffness<double> h{6.9402e6, 7.0275e6};
  const std::vector<ControlPair> low{{6.94016e6, 6.94036e6, 1.0}};
  const std::vector<ControlPair> high{{7.02750e6, 7.02770e6, 1.0}};
  EXPECT_EQ(nearest_channel(low, h), Channel::q1);
  EXPECT_EQ(nearest_channel(high, h), Channel::q2);
  EXPECT_THROW(nearest_channel(std::vector<ControlPair>{}, h), InvalidInput);
}

TEST(TimeDomain, ZeroDriveStaysAtRest) {
  const HybridStiffness<double> h{20.0, 25.0};
  const TimeWindow w{1.0, 2.0, 1e-3};
  const Trajectory tr = simulate_time_domain(ParamVector(0.4, 1.0, 1.0), h,
                                             ControlPair{21.0, 22.0, 0.0}, w);
  EXPECT_EQ(tr.samples.cols(), 1000);
  EXPECT_EQ(tr.samples.cwiseAbs().maxCoeff(), 0.0);
}

TEST(TimeDomain, StepTooLarge) {
  const HybridStiffness<double> h{20.0, 25.0};
  EXPECT_THROW(simulate_time_domain(ParamVector(0.4, 1.0, 1.0), h, ControlPair{21.0, 22.0, 1.0},
                                    TimeWindow{1.0, 2.0, 0.01}),
               StepTooLarge);
}

TEST(TimeDomain, DecoupledModeSettlesToAnalyticAmplitude) {
  const HybridStiffness<double> h{20.0, 30.0};
  const ParamVector p(0.0, 2.0, 2.0);
  const double u = 21.0;
  // Single tone of amplitude 1 as two coincident tones of amplitude 1/2.
  const ControlPair pair{u, u, 0.5};
  const double dt = 1.0 / (100.0 * 30.0);
  const TimeWindow w{std::ceil(10.0 / 2.0 / dt) * dt, std::ceil(10.0 / 2.0 / dt) * dt + 1.0, dt};
  const Trajectory tr = simulate_time_domain(p, h, pair, w);
  const double w0 = kTwoPi * h.eta_plus, wu = kTwoPi * u;
  const double expected =
      1.0 / std::sqrt(std::pow(w0 * w0 - wu * wu, 2) + std::pow(kTwoPi * 2.0 * wu, 2));
  EXPECT_LT(rel(tr.samples.row(0).cwiseAbs().maxCoeff(), expected), 1e-3);
}

TEST(TimeDomain, SuperpositionOfTones) {
  std::mt19937_64 rng(4);
  const DeskInstance inst = draw_desk_instance(rng);
  const TimeWindow w{inst.window.t_trans, inst.window.t_trans + 2000.0 * inst.window.dt,
                     inst.window.dt};
  const Trajectory both = simulate_time_domain(inst.p, inst.hybrid, inst.pair, w);
  const Trajectory first = simulate_time_domain(
      inst.p, inst.hybrid, ControlPair{inst.pair.u1, inst.pair.u1, 0.5}, w);
  const Trajectory second = simulate_time_domain(
      inst.p, inst.hybrid, ControlPair{inst.pair.u2, inst.pair.u2, 0.5}, w);
  const double scale = both.samples.cwiseAbs().maxCoeff();
  EXPECT_LT((both.samples - first.samples - second.samples).cwiseAbs().maxCoeff() / scale,
            1e-9);
}

TEST(TimeDomain, IntegratorLinearity) {
  std::mt19937_64 rng(5);
  DeskInstance inst = draw_desk_instance(rng);
  const Eigen::Vector2d a = oracle_peaks(inst);
  inst.pair.amplitude = 2.5;
  const Eigen::Vector2d b = oracle_peaks(inst);
  EXPECT_LT((b - 2.5 * a).norm() / b.norm(), 1e-3);
}

TEST(Oracle, ClosedFormMatchesIntegratorOnRandomInstances) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 10; ++i) {
    const DeskInstance inst = draw_desk_instance(rng);
    const Eigen::Vector2d closed =
        steady_peak_amplitudes(inst.p, inst.hybrid, inst.pair, inst.channel);
    const Eigen::Vector2d rk = oracle_peaks(inst);
    EXPECT_LT(rel(rk[0], closed[0]), 1e-3) << "instance " << i;
    EXPECT_LT(rel(rk[1], closed[1]), 1e-3) << "instance " << i;
  }
}

TEST(Spectrum, CosineOnGridBin) {
  const double dt = 1e-3;
  const std::size_t n = 2000;
  Trajectory tr{TimeWindow{dt, dt * static_cast<double>(n + 1), dt},
                Eigen::Matrix2Xd::Zero(2, static_cast<Eigen::Index>(n))};
  for (std::size_t k = 0; k < n; ++k)
    tr.samples(0, static_cast<Eigen::Index>(k)) = 3.0 * std::cos(kTwoPi * 25.0 * static_cast<double>(k) * dt);
  const Spectrum s = spectrum_of_window(tr, Channel::q1);
  EXPECT_EQ(s.frequencies.size(), 1001);
  EXPECT_DOUBLE_EQ(s.frequencies[1], 0.5);
  Eigen::Index bin = 0;
  s.amplitudes.maxCoeff(&bin);
  EXPECT_NEAR(s.frequencies[bin], 25.0, 1e-12);
  EXPECT_NEAR(s.amplitudes[bin], 3.0 * kWindowConstant, 1e-12);
}

TEST(Spectrum, ParsevalOnSimulatedWindow) {
  std::mt19937_64 rng(6);
  const DeskInstance inst = draw_desk_instance(rng);
  const Trajectory tr = simulate_time_domain(inst.p, inst.hybrid, inst.pair, inst.window);
  const Spectrum s = spectrum_of_window(tr, inst.channel);
  const auto n = tr.samples.cols();
  ASSERT_EQ(n % 2, 0);
  const Eigen::VectorXd x = tr.samples.row(to_int(inst.channel) - 1).transpose();
  const double time_energy = x.squaredNorm();
  const Eigen::VectorXd& a = s.amplitudes;
  const double freq_energy =
      static_cast<double>(n) * (a[0] * a[0] + a[a.size() - 1] * a[a.size() - 1] +
                                2.0 * a.segment(1, a.size() - 2).squaredNorm());
  EXPECT_LT(rel(freq_energy, time_energy), 1e-9);
}

TEST(Spectrum, TwoDominantBinsAtTheDrives) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 5; ++i) {
    const DeskInstance inst = draw_desk_instance(rng);
    const Spectrum s =
        spectrum_of_window(simulate_time_domain(inst.p, inst.hybrid, inst.pair, inst.window),
                           inst.channel);
    Eigen::VectorXd a = s.amplitudes;
    Eigen::Index first = 0, second = 0;
    a.maxCoeff(&first);
    a[first] = -1.0;
    a.maxCoeff(&second);
    const double lo = std::min(s.frequencies[first], s.frequencies[second]);
    const double hi = std::max(s.frequencies[first], s.frequencies[second]);
    EXPECT_NEAR(lo, inst.pair.u1, 1e-9);
    EXPECT_NEAR(hi, inst.pair.u2, 1e-9);
  }
}

TEST(Spectrum, EmptyWindow) {
  Trajectory tr{TimeWindow{1.0, 2.0, 0.5}, Eigen::Matrix2Xd(2, 0)};
  EXPECT_THROW(spectrum_of_window(tr, Channel::q1), EmptyWindow);
}

TEST(Spectrum, WindowedAmplitudesMatchFft) {
  std::mt19937_64 rng(10);
  const DeskInstance inst = draw_desk_instance(rng);
  const Spectrum s =
      spectrum_of_window(simulate_time_domain(inst.p, inst.hybrid, inst.pair, inst.window),
                         inst.channel);
  const Eigen::Index k1 = std::llround(inst.pair.u1 * 10.0);
  const Eigen::Index k2 = std::llround(inst.pair.u2 * 10.0);
  const Eigen::VectorXd direct = windowed_amplitudes(
      inst.p, inst.hybrid, inst.pair, inst.window, inst.channel,
      Eigen::Vector2d(s.frequencies[k1], s.frequencies[k2]));
  EXPECT_LT(rel(direct[0], s.amplitudes[k1]), 1e-9);
  EXPECT_LT(rel(direct[1], s.amplitudes[k2]), 1e-9);
}

}  // namespace
