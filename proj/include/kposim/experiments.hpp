#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kposim/gate.hpp"
#include "kposim/report.hpp"

namespace kpo {

/// Invalid or incomplete experiment configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Experiment { photon_ramp, rzz_sweep, loss_sweep, calibrate };

std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& s);

struct SweepSpec {
  std::string variable;
  std::vector<double> values;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::rzz_sweep;
  Model model = Model::simple;
  DriveKind drive = DriveKind::sum;
  TwoKpoDevice device;
  std::optional<double> delta_p;  // pump amplitude; sets P/K when given

  double t_gate = 40.0;
  double beta = 3.0;
  double p_g0_over_k = 5.0;

  double ramp_delta_max = 0.05;
  double ramp_time = 2000.0;

  std::optional<SweepSpec> sweep;  // empty selects the per-command default

  double target_theta = std::numbers::pi / 2;
  double bracket_lo = 0.0, bracket_hi = 10.0;  // p_g0 / K
  double angle_tol = 1e-3;

  SolverSettings solver;
  bool tol_explicit = false;
  int fock_dim = 0;

  int workers = 0;  // 0 = hardware concurrency
  std::filesystem::path out_dir;
  bool plot = true;
  bool certify = true;

  /// Tolerances actually used for a model (defaults depend on the model).
  SolverSettings solver_for(Model m) const;
  RzzSetup rzz_setup() const;
  nlohmann::json to_json() const;

  nlohmann::json snapshot;  // unit-bearing inputs exactly as read
};

/// Parses YAML (or JSON) text. A document with a top-level `config` key, such
/// as a run manifest, is read from that key.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

struct ParameterRow {
  std::string name;
  double value = 0.0;
  std::string unit;
};

struct ExperimentResult {
  Table table;
  std::vector<ParameterRow> parameters;  // calibrate only
  PlotSpec plot;
  nlohmann::json derived;      // resolved parameters
  nlohmann::json convergence;  // tolerance-halving / truncation evidence
  nlohmann::json summary;      // per-command headline numbers
};

/// Default sweep values per command.
SweepSpec default_sweep(const ExperimentConfig& cfg);

/// Log- or linearly spaced grid.
std::vector<double> linspace(double a, double b, int n);
std::vector<double> logspace(double a, double b, int n);

ExperimentResult run_photon_ramp(const ExperimentConfig& cfg);
ExperimentResult run_rzz_sweep(const ExperimentConfig& cfg);
ExperimentResult run_loss_sweep(const ExperimentConfig& cfg);
ExperimentResult run_calibrate(const ExperimentConfig& cfg);
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Writes <name>.csv, manifest.json and (optionally) <name>.svg; returns the manifest.
nlohmann::json write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result,
                             double wall_seconds, const std::vector<std::string>& argv);

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace kpo
