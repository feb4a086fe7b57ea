#ifndef OSCID_IDENTIFY_HPP
#define OSCID_IDENTIFY_HPP

// Regularized identification of p = (theta, d1, d2) from measured peak
// heights:
//
//   J_nu(p) = sum_i |chi_p z_p,i - z*_i| / z*_i + nu/2 |p - p_ref|^2
//
// minimized over a box for a decreasing sequence of weights nu.

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "oscid/data.hpp"
#include "oscid/errors.hpp"
#include "oscid/model.hpp"

namespace oscid {

struct ObjectiveConfig {
  double nu = 0.0;
  ParamVector p_ref;
  Bounds bounds;
  double d_floor = 1e-6;  // Hz
};

struct ReconstructionConfig {
  double nu0 = 0.1;
  double beta = 0.1;
  double tol = 1e-12;
  int l_max = 9;
  double d_floor = 1e-6;     // Hz
  int max_evaluations = 500;  // per outer iteration
  double inner_tol = 1e-10;   // simplex diameter in box-normalized units

  void validate() const;
};

/// |z_sim - z_lab| / z_lab.
double relative_deviation(double z_sim, double z_lab);

/// p with both dampings raised to at least d_floor; `clamped` reports
/// whether anything changed.
ParamVector clamp_damping(const ParamVector& p, double d_floor, bool* clamped = nullptr);

/// chi_p from the FRF sweep against the eigenfrequencies at the start of
/// the experiment.
double scaling_at(const ParamVector& p, const ExperimentSet& data);

/// 2 n_c deviations, pair-major with u1 before u2.
Eigen::VectorXd deviation_vector(const ParamVector& p, double chi,
                                 const ExperimentSet& data);

struct ObjectiveValue {
  double j_fit;
  double j_reg;  // j_fit + nu/2 |p - p_ref|^2
  double chi;
  bool clamped;
};

/// Damping is clamped at cfg.d_floor for the forward solves; the
/// regularizer sees p unchanged.
ObjectiveValue evaluate_objective(const ParamVector& p, const ExperimentSet& data,
                                  const ObjectiveConfig& cfg);

inline double objective(const ParamVector& p, const ExperimentSet& data,
                        const ObjectiveConfig& cfg) {
  return evaluate_objective(p, data, cfg).j_reg;
}

struct MinimizeResult {
  Eigen::Vector3d x;
  double value;
  int evaluations;
  Eigen::Array<bool, 3, 1> at_lower;
  Eigen::Array<bool, 3, 1> at_upper;
  /// Best value seen after each evaluation.
  std::vector<double> trace;
};

using Objective3 = std::function<double(const Eigen::Vector3d&)>;

/// Nelder-Mead on box-normalized coordinates with projection onto the box,
/// restarted from the incumbent while the budget lasts and restarts still
/// help. Returns the best point seen, so f(x) <= f(x0).
MinimizeResult minimize_box(const Objective3& f, const Eigen::Vector3d& x0,
                            const Bounds& bounds, double inner_tol,
                            int max_evaluations = 500);

struct Spread {
  double mean;
  double min;
  double max;
  double std;  // sample standard deviation, 0 for a single value
};

Spread spread_of(std::span<const double> values);

struct CouplingAggregate {
  std::vector<double> lambda;  // Hz, per pair
  std::vector<double> f1;
  std::vector<double> f2;
  std::vector<int> coupling_sign;
  Spread lambda_stats;
  Spread f1_stats;
  Spread f2_stats;
};

/// C^m = T^T C~^m T for every pair, then (f1, f2, lambda) and their spread.
CouplingAggregate aggregate_coupling(double theta, Branch branch,
                                     std::span<const HybridStiffness<double>> hybrid);

struct IterationRecord {
  int iteration;  // 0-based outer index l
  double nu;      // weight used for this solve
  double j_fit;
  double j_reg;
  double best_j_fit;
  ParamVector p;
  double error;  // E after this iteration
  int evaluations;
  int clamped_evaluations;
};

struct BranchRun {
  Branch branch;
  ParamVector p_opt;
  double j_fit;
  std::vector<IterationRecord> history;
};

struct ReconstructionReport {
  ParamVector p0;
  ParamVector p_ref;
  ParamVector p_opt;
  double j_fit_initial = 0.0;
  double j_fit_final = 0.0;
  double chi_initial = 0.0;
  double chi_final = 0.0;
  Eigen::VectorXd dev_initial;
  Eigen::VectorXd dev_final;
  std::vector<double> nu_schedule;
  std::vector<IterationRecord> history;  // of the reported branch
  std::vector<BranchRun> branches;
  CouplingAggregate coupling;

  /// mean(dev_final) / mean(dev_initial).
  double improvement_ratio() const;
};

/// Raised when a branch cannot be completed; `partial` holds everything
/// computed up to the failure.
class ReconstructionFailed : public Error {
 public:
  ReconstructionFailed(const std::string& what, ReconstructionReport partial)
      : Error(what), partial_(std::move(partial)) {}
  const ReconstructionReport& partial() const { return partial_; }

 private:
  ReconstructionReport partial_;
};

/// Shrinking-weight loop: solve with nu_l, set nu_{l+1} = beta nu_l,
/// E = |p^{l+1} - p^l| + |J_fit - J_reg^{nu_{l+1}}|, stop at E <= tol or
/// after l_max solves. Every branch in `branches` gets a full run starting
/// from p0's values; the one with the lower final J_fit is reported, the
/// earlier one when they agree to 1e-9 relative.
ReconstructionReport reconstruct(const ExperimentSet& data, const ParamVector& p0,
                                 const ReconstructionConfig& cfg,
                                 const ObjectiveConfig& base,
                                 std::span<const Branch> branches);

ReconstructionReport reconstruct(const ExperimentSet& data, const ParamVector& p0,
                                 const ReconstructionConfig& cfg,
                                 const ObjectiveConfig& base);

}  // namespace oscid

#endif  // OSCID_IDENTIFY_HPP
