#include "oscid/identify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oscid/calibration.hpp"
#include "oscid/forward.hpp"

namespace oscid {

void ReconstructionConfig::validate() const {
  if (!(nu0 >= 0)) throw InvalidInput("nu0 must be nonnegative");
  if (!(beta > 0 && beta < 1)) throw InvalidInput("beta must lie in (0, 1)");
  if (!(tol >= 0)) throw InvalidInput("tol must be nonnegative");
  if (l_max < 1) throw InvalidInput("l_max must be at least 1");
  if (!(d_floor > 0)) throw InvalidInput("d_floor must be positive");
  if (max_evaluations < 1) throw InvalidInput("max_evaluations must be positive");
  if (!(inner_tol >= 0)) throw InvalidInput("inner_tol must be nonnegative");
}

double relative_deviation(double z_sim, double z_lab) {
  if (!(z_lab > 0)) throw ZeroLabAmplitude("lab peak amplitude must be positive");
  return std::abs(z_sim - z_lab) / z_lab;
}

ParamVector clamp_damping(const ParamVector& p, double d_floor, bool* clamped) {
  ParamVector out = p;
  out.values[1] = std::max(p.d1(), d_floor);
  out.values[2] = std::max(p.d2(), d_floor);
  if (clamped) *clamped = out.values != p.values;
  return out;
}

double scaling_at(const ParamVector& p, const ExperimentSet& data) {
  return scaling_factor(p, data.frf, data.hybrid.front(), data.frf.frequencies,
                        data.channel);
}

Eigen::VectorXd deviation_vector(const ParamVector& p, double chi,
                                 const ExperimentSet& data) {
  if (data.lab_peaks.size() != data.n_c() || data.hybrid.size() != data.n_c())
    throw InvalidInput("experiment is missing peak or drift data; call finalize");
  Eigen::VectorXd dev(2 * data.n_c());
  for (std::size_t m = 0; m < data.n_c(); ++m) {
    const Eigen::Vector2d z =
        steady_peak_amplitudes(p, data.hybrid[m], data.pairs[m], data.channel);
    for (int k = 0; k < 2; ++k)
      dev[static_cast<Eigen::Index>(2 * m) + k] =
          relative_deviation(chi * z[k], data.lab_peaks[m][k]);
  }
  return dev;
}

ObjectiveValue evaluate_objective(const ParamVector& p, const ExperimentSet& data,
                                  const ObjectiveConfig& cfg) {
  bool clamped = false;
  const ParamVector pc = clamp_damping(p, cfg.d_floor, &clamped);
  const double chi = scaling_at(pc, data);
  const double fit = deviation_vector(pc, chi, data).sum();
  const double reg = 0.5 * cfg.nu * (p.values - cfg.p_ref.values).squaredNorm();
  return {fit, fit + reg, chi, clamped};
}

Spread spread_of(std::span<const double> v) {
  if (v.empty()) throw InvalidInput("spread of an empty sequence");
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return {mean, *lo, *hi, v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
}

CouplingAggregate aggregate_coupling(double theta, Branch branch,
                                     std::span<const HybridStiffness<double>> hybrid) {
  if (hybrid.empty()) throw InvalidInput("aggregate_coupling needs at least one pair");
  const Matrix2<double> t = rotation_from_theta(theta, branch);
  CouplingAggregate out;
  for (const auto& h : hybrid) {
    const auto e = extract_physical(physical_stiffness_from_hybrid(t, h));
    out.lambda.push_back(e.lambda);
    out.f1.push_back(e.f1);
    out.f2.push_back(e.f2);
    out.coupling_sign.push_back(e.coupling_sign);
  }
  out.lambda_stats = spread_of(out.lambda);
  out.f1_stats = spread_of(out.f1);
  out.f2_stats = spread_of(out.f2);
  return out;
}

double ReconstructionReport::improvement_ratio() const {
  if (dev_initial.size() == 0 || dev_final.size() == 0)
    throw InvalidInput("report has no deviation vectors");
  return dev_final.mean() / dev_initial.mean();
}

namespace {

constexpr double kBranchTieTol = 1e-9;

// Fills `run` and `nu_schedule` as it goes, so both hold the partial state
// if an evaluation throws.
void run_branch(const ExperimentSet& data, const ParamVector& p0,
                const ReconstructionConfig& cfg, const ObjectiveConfig& base,
                BranchRun& run, std::vector<double>& nu_schedule) {
  const Branch branch = run.branch;
  ObjectiveConfig obj = base;
  obj.d_floor = cfg.d_floor;

  Eigen::Vector3d p = p0.values;
  double nu = cfg.nu0;
  double best_fit = evaluate_objective(ParamVector(p, branch), data, obj).j_fit;
  nu_schedule.clear();

  for (int l = 0; l < cfg.l_max; ++l) {
    obj.nu = nu;
    nu_schedule.push_back(nu);
    int clamps = 0;
    const Objective3 f = [&](const Eigen::Vector3d& x) {
      const ObjectiveValue v = evaluate_objective(ParamVector(x, branch), data, obj);
      clamps += v.clamped ? 1 : 0;
      return v.j_reg;
    };
    const MinimizeResult res =
        minimize_box(f, p, obj.bounds, cfg.inner_tol, cfg.max_evaluations);

    const double nu_next = cfg.beta * nu;
    const ObjectiveValue at = evaluate_objective(ParamVector(res.x, branch), data, obj);
    const double j_reg_next =
        at.j_fit + 0.5 * nu_next * (res.x - obj.p_ref.values).squaredNorm();
    const double error = (res.x - p).norm() + std::abs(at.j_fit - j_reg_next);
    best_fit = std::min(best_fit, at.j_fit);

    run.history.push_back({l, nu, at.j_fit, at.j_reg, best_fit, ParamVector(res.x, branch),
                           error, res.evaluations, clamps});
    p = res.x;
    nu = nu_next;
    if (error <= cfg.tol) break;
  }
  run.p_opt = ParamVector(p, branch);
  run.j_fit = run.history.back().j_fit;
}

}  // namespace

ReconstructionReport reconstruct(const ExperimentSet& data, const ParamVector& p0,
                                 const ReconstructionConfig& cfg,
                                 const ObjectiveConfig& base,
                                 std::span<const Branch> branches) {
  cfg.validate();
  if (branches.empty()) throw InvalidInput("no transformation branch selected");
  if (!base.bounds.valid()) throw InvalidInput("bounds need lower <= upper");
  if (!base.bounds.contains(p0.values)) throw InvalidInput("p0 lies outside the bounds");
  if (!(base.nu >= 0)) throw InvalidInput("nu must be nonnegative");

  ReconstructionReport report;
  report.p0 = p0;
  report.p_ref = base.p_ref;

  std::vector<std::vector<double>> schedules;
  for (Branch b : branches) {
    std::vector<double> schedule;
    report.branches.push_back({b, ParamVector(p0.values, b), 0.0, {}});
    try {
      run_branch(data, p0, cfg, base, report.branches.back(), schedule);
    } catch (const Error& e) {
      report.nu_schedule = schedule;
      report.history = report.branches.back().history;
      throw ReconstructionFailed(std::string(to_string(b)) + " branch failed: " + e.what(),
                                 std::move(report));
    }
    schedules.push_back(std::move(schedule));
  }
  // Differences at rounding level are ties and keep the earlier branch: with
  // d1 == d2 the two branches produce identical data.
  std::size_t pick = 0;
  for (std::size_t i = 1; i < report.branches.size(); ++i) {
    const double a = report.branches[i].j_fit;
    const double b = report.branches[pick].j_fit;
    if (a < b - kBranchTieTol * std::max(std::abs(a), std::abs(b))) pick = i;
  }
  const BranchRun* chosen = &report.branches[pick];

  report.p_opt = chosen->p_opt;
  report.history = chosen->history;
  report.nu_schedule = schedules[pick];

  const ParamVector start(p0.values, chosen->branch);
  const ParamVector p0c = clamp_damping(start, cfg.d_floor);
  const ParamVector popt = clamp_damping(report.p_opt, cfg.d_floor);
  report.chi_initial = scaling_at(p0c, data);
  report.chi_final = scaling_at(popt, data);
  report.dev_initial = deviation_vector(p0c, report.chi_initial, data);
  report.dev_final = deviation_vector(popt, report.chi_final, data);
  report.j_fit_initial = report.dev_initial.sum();
  report.j_fit_final = report.dev_final.sum();
  report.coupling = aggregate_coupling(report.p_opt.theta(), report.p_opt.branch, data.hybrid);
  return report;
}

ReconstructionReport reconstruct(const ExperimentSet& data, const ParamVector& p0,
                                 const ReconstructionConfig& cfg,
                                 const ObjectiveConfig& base) {
  static constexpr Branch kBoth[] = {Branch::rotation, Branch::reflection};
  return reconstruct(data, p0, cfg, base, kBoth);
}

}  // namespace oscid
