#ifndef OSCID_CONFIG_HPP
#define OSCID_CONFIG_HPP

// Optional config sections that steer identification ([bounds],
// [references], [algorithm]) and synthetic generation ([truth], [grid]).
// Missing sections or keys fall back to the defaults below.

#include <optional>
#include <string>

#include "oscid/data.hpp"
#include "oscid/identify.hpp"
#include "oscid/keyvalue.hpp"

namespace oscid {

struct RunSettings {
  /// theta in [-2 pi, 2 pi], d1 and d2 in [0, 1000] Hz.
  Bounds bounds{Eigen::Vector3d(-2.0 * std::numbers::pi, 0.0, 0.0),
                Eigen::Vector3d(2.0 * std::numbers::pi, 1000.0, 1000.0)};
  double theta_ref = std::numbers::pi / 2.0 + std::numbers::pi / 8.0;
  /// When unset, d_ref = eta / Q at the start of the experiment.
  std::optional<double> d1_ref;
  std::optional<double> d2_ref;
  ReconstructionConfig algorithm;

  /// p_ref, bounds and d_floor for `data`; nu is left at 0.
  ObjectiveConfig objective_for(const ExperimentSet& data) const;
};

RunSettings read_settings(const KeyValueFile& kv);

/// [bounds], [references] and [algorithm] in a form read_settings accepts.
std::string format_settings(const RunSettings& s);

struct Scenario {
  SyntheticTruth truth;
  GridSpec grid;
};

/// [truth] is required; [grid] is optional. The peak window comes from
/// [experiment], not from here.
Scenario read_scenario(const KeyValueFile& kv);

std::string format_scenario(const Scenario& s);

}  // namespace oscid

#endif  // OSCID_CONFIG_HPP
