#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "kposim/experiments.hpp"

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kConvergenceError = 3, kNumericalError = 4 };

std::filesystem::path default_out_dir(const kpo::ExperimentConfig& cfg) {
  const char* root = std::getenv("KPOSIM_OUT");
  std::filesystem::path base = root && *root ? root : "kposim-out";
  std::string leaf = kpo::to_string(cfg.experiment);
  if (cfg.experiment == kpo::Experiment::rzz_sweep || cfg.experiment == kpo::Experiment::loss_sweep)
    leaf += "-" + kpo::to_string(cfg.model) + "-" + kpo::to_string(cfg.drive);
  return base / leaf;
}

void print_summary(const kpo::ExperimentConfig& cfg, const kpo::ExperimentResult& res,
                   const std::filesystem::path& out) {
  if (cfg.experiment == kpo::Experiment::calibrate) {
    for (const auto& p : res.parameters)
      std::printf("  %-20s %18.10g  %s\n", p.name.c_str(), p.value, p.unit.c_str());
  }
  if (!res.summary.empty()) std::printf("summary: %s\n", res.summary.dump().c_str());
  if (!res.convergence.empty()) std::printf("convergence: %s\n", res.convergence.dump().c_str());
  std::printf("wrote %s\n", out.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kerr parametric oscillator gate simulator"};
  app.require_subcommand(1, 1);

  std::string config_path, model, drive, out;
  int workers = -1, fock_dim = -1;
  double tol = 0.0;
  bool no_plot = false, no_certify = false;

  for (const char* name : {"photon-ramp", "rzz-sweep", "loss-sweep", "calibrate"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "YAML config file (or a run manifest)");
    sub->add_option("--model", model, "simple | sc")->check(CLI::IsMember({"simple", "sc"}));
    sub->add_option("--drive", drive, "sum | difference")
        ->check(CLI::IsMember({"sum", "difference"}));
    sub->add_option("--out", out, "output directory (default $KPOSIM_OUT/<command>)");
    sub->add_option("--workers", workers, "parallel sweep workers")->check(CLI::PositiveNumber);
    sub->add_option("--tol", tol, "relative and absolute solver tolerance")
        ->check(CLI::Range(1e-14, 1e-2));
    sub->add_option("--fock-dim", fock_dim, "per-mode Fock cutoff")->check(CLI::Range(2, 400));
    sub->add_flag("--no-plot", no_plot, "skip the SVG plot");
    sub->add_flag("--no-certify", no_certify, "skip the convergence re-runs");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  std::vector<std::string> args(argv, argv + argc);

  try {
    kpo::ExperimentConfig cfg =
        config_path.empty() ? kpo::parse_config("") : kpo::load_config(config_path);
    cfg.experiment = kpo::experiment_from_string(command);
    if (!model.empty()) cfg.model = kpo::model_from_string(model);
    if (!drive.empty()) cfg.drive = kpo::drive_kind_from_string(drive);
    if (workers > 0) cfg.workers = workers;
    if (tol > 0.0) {
      cfg.solver.rel_tol = cfg.solver.abs_tol = tol;
      cfg.tol_explicit = true;
    }
    if (fock_dim > 0) cfg.fock_dim = fock_dim;
    if (no_plot) cfg.plot = false;
    if (no_certify) cfg.certify = false;
    if (!out.empty())
      cfg.out_dir = out;
    else if (cfg.out_dir.empty())
      cfg.out_dir = default_out_dir(cfg);

    const auto t0 = std::chrono::steady_clock::now();
    const kpo::ExperimentResult res = kpo::run_experiment(cfg);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    kpo::write_outputs(cfg, res, wall, args);
    print_summary(cfg, res, cfg.out_dir);
    return kOk;
  } catch (const kpo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const kpo::ConvergenceError& e) {
    std::cerr << "convergence failure: " << e.what() << '\n';
    return kConvergenceError;
  } catch (const kpo::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericalError;
  }
}
