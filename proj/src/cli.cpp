#include "oscid/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "oscid/calibration.hpp"
#include "oscid/config.hpp"
#include "oscid/data.hpp"
#include "oscid/errors.hpp"
#include "oscid/identify.hpp"

namespace oscid::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr double kOracleStepsPerPeriod = 100.0;

// Oracle window 1/delta for the coarsest delta in 10, 1, 0.1, 0.01 Hz that
// holds both tones on its grid, so neither tone leaks into the other's bin.
double oracle_window(const ControlPair& pair) {
  for (double delta : {10.0, 1.0, 0.1, 0.01}) {
    const auto on_grid = [&](double u) {
      return std::abs(u / delta - std::round(u / delta)) < 1e-6;
    };
    if (on_grid(pair.u1) && on_grid(pair.u2)) return 1.0 / delta;
  }
  throw InvalidInput("--oracle needs drive frequencies on a 0.01 Hz grid");
}

struct Log {
  std::ostream& os;
  Verbosity level;
  void info(const std::string& s) const {
    if (level != Verbosity::quiet) os << s << '\n';
  }
  void detail(const std::string& s) const {
    if (level == Verbosity::verbose) os << s << '\n';
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  out.close();
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path data_dir_of(const CliInvocation& inv) {
  if (!inv.data_dir.empty()) return inv.data_dir;
  const fs::path parent = inv.config_path.parent_path();
  return parent.empty() ? fs::path(".") : parent;
}

void require_config(const CliInvocation& inv) {
  if (inv.config_path.empty()) throw InvalidInput("--config is required");
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

Json param_json(const ParamVector& p) {
  return {{"theta", p.theta()}, {"d1_Hz", p.d1()}, {"d2_Hz", p.d2()},
          {"branch", to_string(p.branch)}};
}

Json spread_json(const Spread& s) {
  return {{"mean", s.mean}, {"min", s.min}, {"max", s.max}, {"std", s.std}};
}

std::vector<Branch> branches_of(BranchChoice c) {
  switch (c) {
    case BranchChoice::rotation: return {Branch::rotation};
    case BranchChoice::reflection: return {Branch::reflection};
    case BranchChoice::both: break;
  }
  return {Branch::rotation, Branch::reflection};
}

Branch single_branch(BranchChoice c) {
  return c == BranchChoice::reflection ? Branch::reflection : Branch::rotation;
}

ExperimentSet load_for(const CliInvocation& inv) {
  require_config(inv);
  ExperimentSet set = load_experiment(inv.config_path, data_dir_of(inv));
  if (inv.channel) set.channel = *inv.channel;
  if (inv.auto_channel) set.channel = nearest_channel(set.pairs, set.eta_start);
  return set;
}

std::string history_csv(const std::vector<BranchRun>& runs) {
  std::ostringstream out;
  out << "branch,iteration,nu,J_fit,J_reg,theta,d1_Hz,d2_Hz,E,evaluations,"
         "clamped_evaluations\n";
  for (const auto& run : runs)
    for (const auto& h : run.history)
      out << to_string(run.branch) << ',' << h.iteration << ',' << format_double(h.nu)
          << ',' << format_double(h.j_fit) << ',' << format_double(h.j_reg) << ','
          << format_double(h.p.theta()) << ',' << format_double(h.p.d1()) << ','
          << format_double(h.p.d2()) << ',' << format_double(h.error) << ','
          << h.evaluations << ',' << h.clamped_evaluations << '\n';
  return out.str();
}

Json report_json(const ReconstructionReport& r, const ExperimentSet& set,
                 const std::optional<Scenario>& scenario) {
  Json j;
  j["n_c"] = set.n_c();
  j["channel"] = to_int(set.channel);
  j["branch"] = to_string(r.p_opt.branch);
  j["p0"] = param_json(r.p0);
  j["p_ref"] = param_json(r.p_ref);
  Json popt = param_json(r.p_opt);
  popt["d1_bar_Hz"] = r.p_opt.d1() - r.p_ref.d1();
  popt["d2_bar_Hz"] = r.p_opt.d2() - r.p_ref.d2();
  j["p_opt"] = popt;
  j["j_fit_initial"] = r.j_fit_initial;
  j["j_fit_final"] = r.j_fit_final;
  j["chi_initial"] = r.chi_initial;
  j["chi_final"] = r.chi_final;
  j["mean_deviation_initial"] = r.dev_initial.mean();
  j["mean_deviation_final"] = r.dev_final.mean();
  j["improvement_ratio"] = r.improvement_ratio();
  j["nu_schedule"] = r.nu_schedule;
  j["iterations"] = r.history.size();

  const auto& c = r.coupling;
  j["coupling"] = {{"lambda_Hz", c.lambda},
                   {"f1_Hz", c.f1},
                   {"f2_Hz", c.f2},
                   {"coupling_sign", c.coupling_sign},
                   {"lambda", spread_json(c.lambda_stats)},
                   {"f1", spread_json(c.f1_stats)},
                   {"f2", spread_json(c.f2_stats)}};

  Json dev = Json::array();
  for (std::size_t m = 0; m < set.n_c(); ++m)
    for (int k = 0; k < 2; ++k) {
      const auto i = static_cast<Eigen::Index>(2 * m) + k;
      dev.push_back({{"pair", m + 1},
                     {"tone", k + 1},
                     {"u_Hz", k == 0 ? set.pairs[m].u1 : set.pairs[m].u2},
                     {"dev_initial", r.dev_initial[i]},
                     {"dev_final", r.dev_final[i]}});
    }
  j["deviation"] = dev;

  Json runs = Json::array();
  for (const auto& run : r.branches)
    runs.push_back({{"branch", to_string(run.branch)},
                    {"j_fit", run.j_fit},
                    {"p_opt", param_json(run.p_opt)},
                    {"iterations", run.history.size()}});
  j["branches"] = runs;

  Json hist = Json::array();
  for (const auto& h : r.history)
    hist.push_back({{"iteration", h.iteration}, {"nu", h.nu}, {"J_fit", h.j_fit},
                    {"J_reg", h.j_reg}, {"best_J_fit", h.best_j_fit},
                    {"p", param_json(h.p)}, {"E", h.error},
                    {"evaluations", h.evaluations},
                    {"clamped_evaluations", h.clamped_evaluations}});
  j["history"] = hist;

  if (scenario) {
    const auto& t = scenario->truth;
    const auto truth_c = aggregate_coupling(t.theta, t.branch, set.hybrid);
    j["truth"] = {{"theta", t.theta},
                  {"branch", to_string(t.branch)},
                  {"d1_Hz", t.d1},
                  {"d2_Hz", t.d2},
                  {"lambda_mean_Hz", truth_c.lambda_stats.mean},
                  {"theta_rel_error", std::abs(r.p_opt.theta() - t.theta) / std::abs(t.theta)},
                  {"lambda_rel_error", std::abs(c.lambda_stats.mean - truth_c.lambda_stats.mean) /
                                           truth_c.lambda_stats.mean}};
  }
  return j;
}

std::string deviation_csv(const ReconstructionReport& r, const ExperimentSet& set) {
  std::ostringstream out;
  out << "pair,tone,u_Hz,dev_initial,dev_final\n";
  for (std::size_t m = 0; m < set.n_c(); ++m)
    for (int k = 0; k < 2; ++k) {
      const auto i = static_cast<Eigen::Index>(2 * m) + k;
      out << m + 1 << ',' << k + 1 << ','
          << format_double(k == 0 ? set.pairs[m].u1 : set.pairs[m].u2) << ','
          << format_double(r.dev_initial[i]) << ',' << format_double(r.dev_final[i]) << '\n';
    }
  return out.str();
}

template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const UnitError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NoPeak& e) {
    err << "calibration failed: " << e.what() << '\n';
    return kExitCalibration;
  } catch (const FitDiverged& e) {
    err << "calibration failed: " << e.what() << '\n';
    return kExitCalibration;
  } catch (const ReconstructionFailed& e) {
    err << "optimization failed: " << e.what() << '\n';
    return kExitOptimizer;
  } catch (const EvaluationFailed& e) {
    err << "optimization failed: " << e.what() << '\n';
    return kExitOptimizer;
  } catch (const Json::exception& e) {
    err << "error: malformed report: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace

std::string format_mhz(double hz) { return fixed(hz / 1e6, 4) + " MHz"; }

int cmd_gen(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Log log{out, inv.verbosity};
    require_config(inv);
    const KeyValueFile kv = KeyValueFile::read(inv.config_path);
    const ExperimentDesign design = read_design(kv);
    Scenario scenario = read_scenario(kv);
    const RunSettings settings = read_settings(kv);

    SyntheticTruth& truth = scenario.truth;
    truth.eta_start = design.eta_start;
    truth.eta_end = design.eta_end;
    truth.noise_floor = design.noise_floor;
    if (inv.seed) truth.seed = *inv.seed;
    scenario.grid.peak_half_window_bins = design.peak_half_window_bins;

    std::optional<Channel> channel = inv.channel ? inv.channel : design.channel;
    if (inv.auto_channel) channel.reset();
    const ExperimentSet set =
        generate_synthetic(truth, design.pairs, scenario.grid, truth.seed, channel);
    const fs::path cfg = save_experiment(set, inv.out_dir,
                                         format_settings(settings) + "\n" +
                                             format_scenario(scenario));
    if (!(load_experiment(cfg, inv.out_dir) == set))
      throw std::runtime_error("written experiment does not read back identically");
    log.info("wrote " + std::to_string(set.n_c()) + " pairs to " + inv.out_dir.string());
    log.detail("channel " + std::to_string(to_int(set.channel)) + ", seed " +
               std::to_string(truth.seed));
    return kExitOk;
  });
}

int cmd_calibrate(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Log log{out, inv.verbosity};
    const ExperimentSet set = load_for(inv);
    const RunSettings settings = read_settings(KeyValueFile::read(inv.config_path));
    const LorentzianFit fit = fit_lorentzian(set.frf);

    ObjectiveConfig obj = settings.objective_for(set);
    const ParamVector p_ref(obj.p_ref.values, single_branch(inv.branch));
    const double chi = scaling_at(clamp_damping(p_ref, obj.d_floor), set);
    const double linewidth = fit.d / std::numbers::pi;
    const double eta_cfg = set.channel == Channel::q1 ? set.eta_start.eta_plus
                                                      : set.eta_start.eta_minus;
    const double q_cfg = set.channel == Channel::q1 ? set.q_plus : set.q_minus;

    Json j;
    j["channel"] = to_int(set.channel);
    j["eta_Hz"] = fit.eta;
    j["d_rad_per_s"] = fit.d;
    j["linewidth_Hz"] = linewidth;
    j["Q_fit"] = fit.eta / linewidth;
    j["Q_config"] = q_cfg;
    j["d_ref_Hz"] = eta_cfg / q_cfg;
    j["A_peak_V"] = fit.a_peak;
    j["noise_floor_V"] = set.frf.noise_floor;
    j["residual_rms_V"] = fit.residual_rms;
    j["iterations"] = fit.iterations;
    // The squared response is the exact Lorentzian, so its width gives Q.
    FrfSweep power = set.frf;
    power.amplitudes = set.frf.amplitudes.array().square().matrix();
    power.noise_floor = set.frf.noise_floor * set.frf.noise_floor;
    const LorentzianFit pfit = fit_lorentzian(power);
    const double power_width = pfit.d / std::numbers::pi;
    j["power_fit"] = {{"eta_Hz", pfit.eta},
                      {"d_rad_per_s", pfit.d},
                      {"linewidth_Hz", power_width},
                      {"Q_fit", pfit.eta / power_width},
                      {"residual_rms_V2", pfit.residual_rms},
                      {"iterations", pfit.iterations}};
    j["p_ref"] = param_json(p_ref);
    j["chi_ref"] = chi;
    fs::create_directories(inv.out_dir);
    write_text(inv.out_dir / "calibration.json", j.dump(2) + "\n");
    log.info("eta " + fixed(fit.eta, 3) + " Hz, linewidth " + fixed(linewidth, 3) +
             " Hz, power-fit Q " + fixed(pfit.eta / power_width, 1) + ", chi_ref " +
             format_double(chi));
    return kExitOk;
  });
}

int cmd_fit(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Log log{out, inv.verbosity};
    const ExperimentSet set = load_for(inv);
    const KeyValueFile kv = KeyValueFile::read(inv.config_path);
    const RunSettings settings = read_settings(kv);
    std::optional<Scenario> scenario;
    if (kv.section("truth")) scenario = read_scenario(kv);

    const ObjectiveConfig obj = settings.objective_for(set);
    const auto branches = branches_of(inv.branch);
    fs::create_directories(inv.out_dir);
    ReconstructionReport report;
    try {
      report = reconstruct(set, ParamVector(0.0, 0.0, 0.0), settings.algorithm, obj, branches);
    } catch (const ReconstructionFailed& e) {
      write_text(inv.out_dir / "history.csv", history_csv(e.partial().branches));
      throw;
    }
    write_text(inv.out_dir / "report.json", report_json(report, set, scenario).dump(2) + "\n");
    write_text(inv.out_dir / "deviation.csv", deviation_csv(report, set));
    write_text(inv.out_dir / "history.csv", history_csv(report.branches));

    log.info("branch " + std::string(to_string(report.p_opt.branch)) + ", theta " +
             fixed(report.p_opt.theta(), 4) + ", <lambda> " +
             format_mhz(report.coupling.lambda_stats.mean) + ", mean deviation " +
             fixed(report.dev_initial.mean(), 4) + " -> " + fixed(report.dev_final.mean(), 4));
    for (const auto& run : report.branches)
      log.detail("  " + std::string(to_string(run.branch)) + ": J_fit " +
                 format_double(run.j_fit) + " after " + std::to_string(run.history.size()) +
                 " iterations");
    return kExitOk;
  });
}

int cmd_simulate(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Log log{out, inv.verbosity};
    if (!inv.p) throw InvalidInput("simulate needs --p THETA,D1,D2");
    if (inv.branch == BranchChoice::both)
      throw InvalidInput("simulate needs a single --branch");
    ExperimentSet set = load_for(inv);
    const RunSettings settings = read_settings(KeyValueFile::read(inv.config_path));
    if (inv.amplitude) {
      if (!(*inv.amplitude >= 0)) throw InvalidInput("amplitude must be nonnegative");
      set.amplitude = *inv.amplitude;
      for (auto& pair : set.pairs) pair.amplitude = *inv.amplitude;
    }
    const ParamVector p =
        clamp_damping(ParamVector(*inv.p, single_branch(inv.branch)), settings.algorithm.d_floor);
    const double chi = scaling_at(p, set);

    std::vector<Eigen::Vector2d> sim(set.n_c());
    for (std::size_t m = 0; m < set.n_c(); ++m) {
      const Eigen::Vector2d closed =
          chi * steady_peak_amplitudes(p, set.hybrid[m], set.pairs[m], set.channel);
      sim[m] = closed;
      if (!inv.oracle) continue;
      const double d_min = std::min(p.d1(), p.d2());
      if (!(d_min >= 1.0)) throw InvalidInput("--oracle needs both dampings >= 1 Hz");
      const auto& h = set.hybrid[m];
      const double f_max = std::max({h.eta_minus, set.pairs[m].u2, h.eta_plus});
      const double span = oracle_window(set.pairs[m]);
      const auto steps =
          static_cast<std::size_t>(std::ceil(span * kOracleStepsPerPeriod * f_max));
      const double dt = span / static_cast<double>(steps);
      const double t_trans = std::ceil(10.0 / d_min / dt) * dt;
      const TimeWindow window{t_trans, t_trans + span, dt};
      const Eigen::VectorXd at =
          windowed_amplitudes(p, h, set.pairs[m], window, set.channel,
                              Eigen::Vector2d(set.pairs[m].u1, set.pairs[m].u2));
      sim[m] = chi * at / kWindowConstant;
      log.detail("pair " + std::to_string(m + 1) + ": oracle/closed " +
                 format_double(sim[m][0] / closed[0]) + ", " +
                 format_double(sim[m][1] / closed[1]));
    }

    fs::create_directories(inv.out_dir);
    std::ostringstream peaks;
    peaks << "pair,tone,u_Hz,lab_V,sim_V\n";
    for (std::size_t m = 0; m < set.n_c(); ++m) {
      const Spectrum& lab = set.spectra[m];
      Eigen::VectorXd amp = Eigen::VectorXd::Zero(lab.frequencies.size());
      for (int k = 0; k < 2; ++k) {
        const double u = k == 0 ? set.pairs[m].u1 : set.pairs[m].u2;
        Eigen::Index bin = 0;
        (lab.frequencies.array() - u).abs().minCoeff(&bin);
        amp[bin] = sim[m][k];
        peaks << m + 1 << ',' << k + 1 << ',' << format_double(u) << ','
              << format_double(set.lab_peaks[m][k]) << ',' << format_double(sim[m][k]) << '\n';
      }
      write_spectrum_csv(inv.out_dir / ("sim_pair_" + std::to_string(m + 1) + ".csv"),
                         lab.frequencies, amp);
    }
    write_text(inv.out_dir / "peaks.csv", peaks.str());
    log.info("simulated " + std::to_string(set.n_c()) + " pairs (" +
             (inv.oracle ? "time-domain" : "closed form") + "), chi " + format_double(chi));
    return kExitOk;
  });
}

int cmd_report(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Log log{out, inv.verbosity};
    const fs::path dir = inv.data_dir.empty() ? inv.out_dir : inv.data_dir;
    const fs::path path = dir / "report.json";
    if (!fs::exists(path)) throw SchemaError(path.string(), 0, 0, "report not found");
    Json j;
    try {
      j = Json::parse(read_text(path));
    } catch (const Json::exception& e) {
      throw SchemaError(path.string(), 0, 0, e.what());
    }

    std::ostringstream csv;
    csv << "pair,tone,u_Hz,dev_initial,dev_final,ratio\n";
    for (const auto& row : j.at("deviation")) {
      const double d0 = row.at("dev_initial").get<double>();
      const double d1 = row.at("dev_final").get<double>();
      const double ratio = d0 == d1 ? 1.0 : d1 / d0;
      csv << row.at("pair").get<int>() << ',' << row.at("tone").get<int>() << ','
          << format_double(row.at("u_Hz").get<double>()) << ',' << format_double(d0) << ','
          << format_double(d1) << ',' << format_double(ratio) << '\n';
    }

    const auto& c = j.at("coupling");
    const auto& popt = j.at("p_opt");
    const auto line = [](const char* name, const Json& s) {
      const double mean = s.at("mean").get<double>();
      const double lo = s.at("min").get<double>();
      const double hi = s.at("max").get<double>();
      return std::string(name) + fixed(mean / 1e6, 4) + " +- " +
             fixed(0.5 * (hi - lo) / 1e6, 4) + " MHz   range [" + fixed(lo / 1e6, 4) +
             ", " + fixed(hi / 1e6, 4) + "]   std " + fixed(s.at("std").get<double>() / 1e6, 4) +
             "\n";
    };
    std::ostringstream sum;
    sum << "Estimated coefficients (" << popt.at("branch").get<std::string>() << " branch, "
        << j.at("iterations").get<int>() << " iterations)\n"
        << line("  <f1>      ", c.at("f1")) << line("  <f2>      ", c.at("f2"))
        << line("  <lambda>  ", c.at("lambda"))
        << "  theta     " << fixed(popt.at("theta").get<double>(), 4) << " [-]\n"
        << "  d1_bar    " << fixed(popt.at("d1_bar_Hz").get<double>(), 4) << " Hz\n"
        << "  d2_bar    " << fixed(popt.at("d2_bar_Hz").get<double>(), 4) << " Hz\n"
        << "Mean relative deviation " << fixed(j.at("mean_deviation_initial").get<double>(), 4)
        << " -> " << fixed(j.at("mean_deviation_final").get<double>(), 4) << " (ratio "
        << fixed(j.at("improvement_ratio").get<double>(), 4) << ")\n"
        << "Uncertainty: +- is half the min-max range over pairs; std is the sample\n"
        << "standard deviation.\n";

    fs::create_directories(inv.out_dir);
    write_text(inv.out_dir / "improvement.csv", csv.str());
    write_text(inv.out_dir / "summary.txt", sum.str());
    if (inv.verbosity != Verbosity::quiet) out << sum.str();
    log.detail("wrote improvement.csv and summary.txt to " + inv.out_dir.string());
    return kExitOk;
  });
}

int run(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  switch (inv.subcommand) {
    case Subcommand::gen: return cmd_gen(inv, out, err);
    case Subcommand::calibrate: return cmd_calibrate(inv, out, err);
    case Subcommand::fit: return cmd_fit(inv, out, err);
    case Subcommand::simulate: return cmd_simulate(inv, out, err);
    case Subcommand::report: return cmd_report(inv, out, err);
  }
  return kExitInternal;
}

}  // namespace oscid::cli
