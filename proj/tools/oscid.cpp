// oscid: identify coupling and damping of a two-mode oscillator from
// measured spectra.
//
//   oscid gen       --config scenario.cfg --out DIR [--seed N]
//   oscid calibrate --config DIR/experiment.cfg --out DIR
//   oscid fit       --config DIR/experiment.cfg --out DIR [--branch both]
//   oscid simulate  --config DIR/experiment.cfg --p THETA,D1,D2 [--oracle]
//   oscid report    --data FITDIR --out DIR

#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "oscid/cli.hpp"

namespace {

using namespace oscid::cli;

void add_common(CLI::App* app, CliInvocation& inv, bool needs_config) {
  auto* c = app->add_option("--config", inv.config_path, "experiment or scenario config");
  if (needs_config) c->required();
  app->add_option("--data", inv.data_dir, "directory with pair_<m>.csv and frf.csv");
  app->add_option("--out", inv.out_dir, "output directory")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CliInvocation inv;
  CLI::App app{"Two-mode oscillator coefficient identification"};
  app.require_subcommand(1);
  app.fallthrough();

  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "more progress output");
  app.add_flag("-q,--quiet", quiet, "no progress output");

  const std::map<std::string, BranchChoice> branches{{"rotation", BranchChoice::rotation},
                                                     {"reflection", BranchChoice::reflection},
                                                     {"both", BranchChoice::both}};
  std::string channel = "config";
  std::vector<double> p;

  auto* gen = app.add_subcommand("gen", "write a synthetic experiment");
  add_common(gen, inv, true);
  gen->add_option("--seed", inv.seed, "noise seed (overrides [truth] seed)");
  gen->add_option("--channel", channel, "observed channel")
      ->check(CLI::IsMember({"1", "2", "auto", "config"}));

  auto* cal = app.add_subcommand("calibrate", "fit the FRF sweep and compute chi at p_ref");
  add_common(cal, inv, true);
  cal->add_option("--branch", inv.branch, "branch used for chi at p_ref")
      ->transform(CLI::CheckedTransformer(branches));
  cal->add_option("--channel", channel)->check(CLI::IsMember({"1", "2", "auto", "config"}));

  auto* fit = app.add_subcommand("fit", "reconstruct (theta, d1, d2)");
  add_common(fit, inv, true);
  fit->add_option("--seed", inv.seed, "accepted for symmetry; the fit is deterministic");
  fit->add_option("--branch", inv.branch)->transform(CLI::CheckedTransformer(branches));
  fit->add_option("--channel", channel)->check(CLI::IsMember({"1", "2", "auto", "config"}));

  auto* sim = app.add_subcommand("simulate", "simulated spectra at an explicit p");
  add_common(sim, inv, true);
  sim->add_option("--p", p, "THETA,D1,D2 (rad, Hz, Hz)")->delimiter(',')->expected(3)->required();
  sim->add_option("--branch", inv.branch)->transform(CLI::CheckedTransformer(branches));
  sim->add_option("--channel", channel)->check(CLI::IsMember({"1", "2", "auto", "config"}));
  sim->add_option("--amplitude", inv.amplitude, "override the drive amplitude");
  sim->add_flag("--oracle", inv.oracle, "use the time-domain integrator");

  auto* rep = app.add_subcommand("report", "improvement.csv and summary.txt from report.json");
  add_common(rep, inv, false);

  // simulate takes one branch; rotation unless asked otherwise.
  sim->preparse_callback([&](std::size_t) { inv.branch = BranchChoice::rotation; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (gen->parsed()) inv.subcommand = Subcommand::gen;
  if (cal->parsed()) inv.subcommand = Subcommand::calibrate;
  if (fit->parsed()) inv.subcommand = Subcommand::fit;
  if (sim->parsed()) inv.subcommand = Subcommand::simulate;
  if (rep->parsed()) inv.subcommand = Subcommand::report;

  inv.verbosity = quiet ? Verbosity::quiet : verbose ? Verbosity::verbose : Verbosity::normal;
  if (channel == "1") inv.channel = oscid::Channel::q1;
  if (channel == "2") inv.channel = oscid::Channel::q2;
  inv.auto_channel = channel == "auto";
  if (p.size() == 3) inv.p = Eigen::Vector3d(p[0], p[1], p[2]);

  return run(inv, std::cout, std::cerr);
}
