#include "oscid/config.hpp"

#include <charconv>
#include <sstream>

namespace oscid {

namespace {

double number_or(const KeyValueFile& kv, const KvSection* s, std::string_view key,
                 double fallback) {
  if (!s) return fallback;
  return kv.find_number(*s, key).value_or(fallback);
}

double hz_or(const KeyValueFile& kv, const KvSection* s, std::string_view base,
             double fallback) {
  if (!s) return fallback;
  return kv.find_quantity(*s, base, Dimension::frequency).value_or(fallback);
}

int integer_or(const KeyValueFile& kv, const KvSection* s, std::string_view key,
               int fallback) {
  if (!s) return fallback;
  const KvCell* c = s->find(key);
  if (!c) return fallback;
  const double v = kv.parse_number(*c);
  if (v != static_cast<double>(static_cast<int>(v))) kv.fail(*c, "expected an integer");
  return static_cast<int>(v);
}

Branch parse_branch(const KeyValueFile& kv, const KvCell& c) {
  if (c.text == "rotation") return Branch::rotation;
  if (c.text == "reflection") return Branch::reflection;
  kv.fail(c, "branch must be rotation or reflection, got '" + c.text + "'");
}

}  // namespace

ObjectiveConfig RunSettings::objective_for(const ExperimentSet& data) const {
  const auto [d_plus, d_minus] =
      damping_reference(data.eta_start.eta_plus, data.eta_start.eta_minus, data.q_plus,
                        data.q_minus);
  ObjectiveConfig cfg;
  cfg.p_ref = ParamVector(theta_ref, d1_ref.value_or(d_plus), d2_ref.value_or(d_minus));
  cfg.bounds = bounds;
  cfg.d_floor = algorithm.d_floor;
  return cfg;
}

RunSettings read_settings(const KeyValueFile& kv) {
  RunSettings s;
  if (const KvSection* b = kv.section("bounds")) {
    s.bounds.lower[0] = number_or(kv, b, "theta_min", s.bounds.lower[0]);
    s.bounds.upper[0] = number_or(kv, b, "theta_max", s.bounds.upper[0]);
    s.bounds.lower[1] = hz_or(kv, b, "d1_min", s.bounds.lower[1]);
    s.bounds.upper[1] = hz_or(kv, b, "d1_max", s.bounds.upper[1]);
    s.bounds.lower[2] = hz_or(kv, b, "d2_min", s.bounds.lower[2]);
    s.bounds.upper[2] = hz_or(kv, b, "d2_max", s.bounds.upper[2]);
    if (!s.bounds.valid()) kv.fail(*b, "every lower bound must be <= its upper bound");
  }
  if (const KvSection* r = kv.section("references")) {
    s.theta_ref = number_or(kv, r, "theta_ref", s.theta_ref);
    s.d1_ref = kv.find_quantity(*r, "d1_ref", Dimension::frequency);
    s.d2_ref = kv.find_quantity(*r, "d2_ref", Dimension::frequency);
  }
  if (const KvSection* a = kv.section("algorithm")) {
    auto& g = s.algorithm;
    g.nu0 = number_or(kv, a, "nu0", g.nu0);
    g.beta = number_or(kv, a, "beta", g.beta);
    g.tol = number_or(kv, a, "tol", g.tol);
    g.l_max = integer_or(kv, a, "l_max", g.l_max);
    g.d_floor = hz_or(kv, a, "d_floor", g.d_floor);
    g.max_evaluations = integer_or(kv, a, "max_evaluations", g.max_evaluations);
    g.inner_tol = number_or(kv, a, "inner_tol", g.inner_tol);
    try {
      g.validate();
    } catch (const InvalidInput& e) {
      kv.fail(*a, e.what());
    }
  }
  return s;
}

std::string format_settings(const RunSettings& s) {
  std::ostringstream out;
  out << "[bounds]\n"
      << "theta_min = " << format_double(s.bounds.lower[0]) << '\n'
      << "theta_max = " << format_double(s.bounds.upper[0]) << '\n'
      << "d1_min_Hz = " << format_double(s.bounds.lower[1]) << '\n'
      << "d1_max_Hz = " << format_double(s.bounds.upper[1]) << '\n'
      << "d2_min_Hz = " << format_double(s.bounds.lower[2]) << '\n'
      << "d2_max_Hz = " << format_double(s.bounds.upper[2]) << "\n\n"
      << "[references]\n"
      << "theta_ref = " << format_double(s.theta_ref) << '\n';
  if (s.d1_ref) out << "d1_ref_Hz = " << format_double(*s.d1_ref) << '\n';
  if (s.d2_ref) out << "d2_ref_Hz = " << format_double(*s.d2_ref) << '\n';
  const auto& g = s.algorithm;
  out << "\n[algorithm]\n"
      << "nu0 = " << format_double(g.nu0) << '\n'
      << "beta = " << format_double(g.beta) << '\n'
      << "tol = " << format_double(g.tol) << '\n'
      << "l_max = " << g.l_max << '\n'
      << "d_floor_Hz = " << format_double(g.d_floor) << '\n'
      << "max_evaluations = " << g.max_evaluations << '\n'
      << "inner_tol = " << format_double(g.inner_tol) << '\n';
  return out.str();
}

Scenario read_scenario(const KeyValueFile& kv) {
  const KvSection& t = kv.require("truth");
  Scenario sc;
  auto& truth = sc.truth;
  truth.theta = number_or(kv, &t, "theta", truth.theta);
  if (const KvCell* b = t.find("branch")) truth.branch = parse_branch(kv, *b);
  truth.d1 = hz_or(kv, &t, "d1", truth.d1);
  truth.d2 = hz_or(kv, &t, "d2", truth.d2);
  truth.chi = number_or(kv, &t, "chi", truth.chi);
  if (!(truth.d1 > 0) || !(truth.d2 > 0) || !(truth.chi > 0))
    kv.fail(t, "truth needs positive d1, d2 and chi");
  if (const KvCell* c = t.find("seed")) {
    const char* end = c->text.data() + c->text.size();
    auto [ptr, ec] = std::from_chars(c->text.data(), end, truth.seed);
    if (ec != std::errc() || ptr != end) kv.fail(*c, "seed must be a nonnegative integer");
  }

  auto& g = sc.grid;
  const KvSection* gs = kv.section("grid");
  g.spectrum_half_span = hz_or(kv, gs, "spectrum_half_span", g.spectrum_half_span);
  g.spectrum_step = hz_or(kv, gs, "spectrum_step", g.spectrum_step);
  g.frf_half_span = hz_or(kv, gs, "frf_half_span", g.frf_half_span);
  g.frf_step = hz_or(kv, gs, "frf_step", g.frf_step);
  if (gs && (!(g.spectrum_step > 0) || !(g.frf_step > 0) ||
             !(g.spectrum_half_span > 0) || !(g.frf_half_span > 0)))
    kv.fail(*gs, "grid steps and spans must be positive");
  return sc;
}

std::string format_scenario(const Scenario& s) {
  std::ostringstream out;
  const auto& t = s.truth;
  const auto& g = s.grid;
  out << "[truth]\n"
      << "theta = " << format_double(t.theta) << '\n'
      << "branch = " << to_string(t.branch) << '\n'
      << "d1_Hz = " << format_double(t.d1) << '\n'
      << "d2_Hz = " << format_double(t.d2) << '\n'
      << "chi = " << format_double(t.chi) << '\n'
      << "seed = " << t.seed << "\n\n"
      << "[grid]\n"
      << "spectrum_half_span_Hz = " << format_double(g.spectrum_half_span) << '\n'
      << "spectrum_step_Hz = " << format_double(g.spectrum_step) << '\n'
      << "frf_half_span_Hz = " << format_double(g.frf_half_span) << '\n'
      << "frf_step_Hz = " << format_double(g.frf_step) << '\n';
  return out.str();
}

}  // namespace oscid
