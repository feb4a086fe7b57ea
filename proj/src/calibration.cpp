#include "oscid/calibration.hpp"

#include <cmath>
#include <limits>

namespace oscid {

namespace {

constexpr int kMaxIterations = 200;
constexpr double kStepTol = 1e-10;

struct Residuals {
  Eigen::VectorXd r;
  Eigen::MatrixX3d jac;
  double cost;
};

Residuals evaluate(const FrfSweep& s, const Eigen::Vector3d& x, bool with_jac) {
  const double eta = x[0], d = x[1], a = x[2], xi = s.noise_floor;
  const auto n = s.frequencies.size();
  Residuals out{Eigen::VectorXd(n), Eigen::MatrixX3d(with_jac ? n : 0, 3), 0.0};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = two_pi<double> * (s.frequencies[i] - eta) / d;
    const double g = 1.0 / (1.0 + w * w);
    out.r[i] = (a - xi) * g - s.amplitudes[i];
    if (with_jac) {
      const double common = (a - xi) * g * g * 2.0 * w;
      out.jac(i, 0) = common * two_pi<double> / d;
      out.jac(i, 1) = common * w / d;
      out.jac(i, 2) = g;
    }
  }
  out.cost = out.r.squaredNorm();
  return out;
}

// Width of the region around `peak` where the samples stay above `level`,
// with linear interpolation at both crossings.
double width_above(const FrfSweep& s, Eigen::Index peak, double level) {
  const auto& f = s.frequencies;
  const auto& y = s.amplitudes;
  const auto n = f.size();

  double left = f[0];
  for (Eigen::Index i = peak; i > 0; --i) {
    if (y[i - 1] < level) {
      left = f[i - 1] + (level - y[i - 1]) / (y[i] - y[i - 1]) * (f[i] - f[i - 1]);
      break;
    }
  }
  double right = f[n - 1];
  for (Eigen::Index i = peak; i + 1 < n; ++i) {
    if (y[i + 1] < level) {
      right = f[i] + (y[i] - level) / (y[i] - y[i + 1]) * (f[i + 1] - f[i]);
      break;
    }
  }
  return right - left;
}

}  // namespace

double lorentzian_value(double f, double eta, double d, double a_peak, double xi) {
  const double w = (two_pi<double> * f - two_pi<double> * eta) / d;
  return (a_peak - xi) / (1.0 + w * w);
}

LorentzianFit fit_lorentzian(const FrfSweep& sweep) {
  const auto n = sweep.frequencies.size();
  if (n != sweep.amplitudes.size())
    throw InvalidInput("sweep frequencies and amplitudes differ in length");
  if (n < 5) throw InvalidInput("Lorentzian fit needs at least 5 samples");

  Eigen::Index peak = 0;
  const double y_max = sweep.amplitudes.maxCoeff(&peak);
  if (!(y_max > 3.0 * sweep.noise_floor))
    throw NoPeak("sweep maximum does not exceed three times the noise floor");

  double width = width_above(sweep, peak, 0.5 * y_max);
  if (!(width > 0))
    width = (sweep.frequencies[n - 1] - sweep.frequencies[0]) / static_cast<double>(n - 1);

  Eigen::Vector3d x(sweep.frequencies[peak], std::numbers::pi * width, y_max);
  Residuals cur = evaluate(sweep, x, true);
  const double cost0 = cur.cost;

  double mu = 1e-3;
  int it = 0;
  for (; it < kMaxIterations; ++it) {
    const Eigen::Vector3d col_norm =
        cur.jac.colwise().norm().transpose().cwiseMax(std::numeric_limits<double>::min());
    const Eigen::MatrixX3d js = cur.jac * col_norm.cwiseInverse().asDiagonal();
    const Eigen::Matrix3d jtj = js.transpose() * js;
    const Eigen::Vector3d grad = js.transpose() * cur.r;

    bool accepted = false;
    Eigen::Vector3d step = Eigen::Vector3d::Zero();
    while (mu < 1e16) {
      step = -(jtj + mu * Eigen::Matrix3d::Identity()).ldlt().solve(grad);
      step = step.cwiseQuotient(col_norm);
      const Eigen::Vector3d trial = x + step;
      if (trial[1] > 0 && trial.allFinite()) {
        Residuals next = evaluate(sweep, trial, true);
        if (next.cost <= cur.cost) {
          x = trial;
          cur = std::move(next);
          mu = std::max(mu / 3.0, 1e-15);
          accepted = true;
          break;
        }
      }
      mu *= 4.0;
    }
    const double rel_step = step.cwiseQuotient(x.cwiseAbs()).cwiseAbs().maxCoeff();
    if (!accepted || rel_step < kStepTol || cur.cost == 0.0) break;
  }

  if (!std::isfinite(cur.cost) || cur.cost > cost0)
    throw FitDiverged("Lorentzian fit ended above its starting residual");

  return {x[0], x[1], x[2], std::sqrt(cur.cost / static_cast<double>(n)), it};
}

Eigen::VectorXd simulate_frf(const ParamVector& p,
                             const HybridStiffness<double>& hybrid,
                             const Eigen::VectorXd& grid, Channel channel) {
  if (grid.size() == 0) throw InvalidInput("FRF grid is empty");
  Eigen::VectorXd out(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw InvalidInput("FRF grid must be strictly ascending");
    out[i] = std::abs(frequency_response(p, hybrid, grid[i], 1.0, channel));
  }
  return out;
}

double scaling_factor(const ParamVector& p, const FrfSweep& lab,
                      const HybridStiffness<double>& hybrid,
                      const Eigen::VectorXd& sim_grid, Channel channel) {
  if (lab.amplitudes.size() == 0) throw ZeroMaximum("lab sweep is empty");
  const double lab_max = lab.amplitudes.maxCoeff();
  const double sim_max = simulate_frf(p, hybrid, sim_grid, channel).maxCoeff();
  if (!(lab_max > 0) || !(sim_max > 0) || !std::isfinite(sim_max))
    throw ZeroMaximum("FRF maximum must be positive on both sides");
  return lab_max / sim_max;
}

}  // namespace oscid
