#include "kposim/experiments.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <yaml-cpp/yaml.h>

namespace kpo {

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::photon_ramp: return "photon-ramp";
    case Experiment::rzz_sweep: return "rzz-sweep";
    case Experiment::loss_sweep: return "loss-sweep";
    case Experiment::calibrate: return "calibrate";
  }
  return "?";
}

Experiment experiment_from_string(const std::string& s) {
  for (auto e : {Experiment::photon_ramp, Experiment::rzz_sweep, Experiment::loss_sweep,
                 Experiment::calibrate})
    if (to_string(e) == s) return e;
  throw ConfigError("unknown experiment '" + s + "'");
}

std::vector<double> linspace(double a, double b, int n) {
  if (n < 1) throw ConfigError("grid needs at least one point");
  if (n == 1) return {a};
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  v.back() = b;
  return v;
}

std::vector<double> logspace(double a, double b, int n) {
  if (!(a > 0.0 && b > 0.0)) throw ConfigError("log grid needs positive bounds");
  auto v = linspace(std::log(a), std::log(b), n);
  for (auto& x : v) x = std::exp(x);
  v.front() = a;
  if (n > 1) v.back() = b;
  return v;
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

void check_keys(const YAML::Node& node, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!node.IsMap()) throw ConfigError("'" + where + "' must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in '" + where + "'");
  }
}

double as_double(const YAML::Node& n, const std::string& what) {
  try {
    const double v = n.as<double>();
    if (!std::isfinite(v)) throw ConfigError("'" + what + "' must be finite");
    return v;
  } catch (const YAML::Exception&) {
    throw ConfigError("'" + what + "' must be a number");
  }
}

// Scalar or a two-element list (KPO1, KPO2).
std::pair<double, double> per_kpo(const YAML::Node& n, const std::string& what) {
  if (n.IsSequence()) {
    if (n.size() != 2) throw ConfigError("'" + what + "' list needs two entries");
    return {as_double(n[0], what), as_double(n[1], what)};
  }
  const double v = as_double(n, what);
  return {v, v};
}

nlohmann::json pair_json(const YAML::Node& n, std::pair<double, double> v) {
  if (n.IsSequence()) return nlohmann::json::array({v.first, v.second});
  return v.first;
}

template <typename T>
T get_or(const YAML::Node& parent, const char* key, T fallback) {
  if (!parent || !parent[key]) return fallback;
  try {
    return parent[key].as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(std::string("bad value for '") + key + "'");
  }
}

double num_or(const YAML::Node& parent, const char* key, double fallback) {
  if (!parent || !parent[key]) return fallback;
  return as_double(parent[key], key);
}

void parse_circuit(const YAML::Node& c, ExperimentConfig& cfg) {
  nlohmann::json snap;
  if (c) check_keys(c, "circuit", {"E_C_GHz", "E_J_GHz", "omega_GHz", "N", "theta0_rad", "detuning_MHz"});
  auto& d = cfg.device;
  d.n_squids = get_or<int>(c, "N", 5);
  d.theta0 = num_or(c, "theta0_rad", std::numbers::pi / 4);
  if (d.n_squids < 1) throw ConfigError("N must be positive");
  snap["N"] = d.n_squids;
  snap["theta0_rad"] = d.theta0;

  std::pair<double, double> ec{0.3, 0.3};
  if (c && c["E_C_GHz"]) {
    ec = per_kpo(c["E_C_GHz"], "E_C_GHz");
    snap["E_C_GHz"] = pair_json(c["E_C_GHz"], ec);
  } else {
    snap["E_C_GHz"] = 0.3;
  }
  d.ec1 = ghz(ec.first);
  d.ec2 = ghz(ec.second);

  const bool has_ej = c && c["E_J_GHz"], has_omega = c && c["omega_GHz"];
  if (has_ej && has_omega) throw ConfigError("give either E_J_GHz or omega_GHz, not both");
  if (has_ej) {
    const auto ej = per_kpo(c["E_J_GHz"], "E_J_GHz");
    snap["E_J_GHz"] = pair_json(c["E_J_GHz"], ej);
    d.omega1 = omega_from_circuit({d.ec1, ghz(ej.first), d.n_squids, d.theta0});
    d.omega2 = omega_from_circuit({d.ec2, ghz(ej.second), d.n_squids, d.theta0});
  } else {
    std::pair<double, double> w{10.0, 11.0};
    if (has_omega) {
      w = per_kpo(c["omega_GHz"], "omega_GHz");
      snap["omega_GHz"] = pair_json(c["omega_GHz"], w);
    } else {
      snap["omega_GHz"] = nlohmann::json::array({10.0, 11.0});
    }
    d.omega1 = ghz(w.first);
    d.omega2 = ghz(w.second);
  }
  const double det = num_or(c, "detuning_MHz", 0.0);
  d.detuning = mhz(det);
  snap["detuning_MHz"] = det;
  cfg.snapshot["circuit"] = snap;
}

void parse_pump(const YAML::Node& p, ExperimentConfig& cfg) {
  nlohmann::json snap;
  if (p) check_keys(p, "pump", {"P_over_K", "delta_p", "pump_freq_mode", "pump_freq_GHz"});
  auto& d = cfg.device;
  if (p && p["P_over_K"] && p["delta_p"]) throw ConfigError("give either P_over_K or delta_p");
  if (p && p["delta_p"]) {
    cfg.delta_p = as_double(p["delta_p"], "delta_p");
    snap["delta_p"] = *cfg.delta_p;
    const KpoParams k1{d.ec1, ej_from_omega(d.omega1, d.ec1, d.n_squids, d.theta0), d.n_squids,
                       d.theta0};
    const KerrPump kp = kerr_and_pump(k1, *cfg.delta_p);
    d.pump_over_kerr = kp.pump / kp.kerr;
  } else {
    d.pump_over_kerr = num_or(p, "P_over_K", 4.0);
    snap["P_over_K"] = d.pump_over_kerr;
  }
  const auto mode = get_or<std::string>(p, "pump_freq_mode", "auto_calibrated");
  try {
    d.calibration = pump_calibration_from_string(mode);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  snap["pump_freq_mode"] = mode;
  if (p && p["pump_freq_GHz"]) {
    const auto f = per_kpo(p["pump_freq_GHz"], "pump_freq_GHz");
    d.pump_freq1 = ghz(f.first);
    d.pump_freq2 = ghz(f.second);
    snap["pump_freq_GHz"] = pair_json(p["pump_freq_GHz"], f);
  }
  if (d.calibration == PumpCalibration::explicit_ && !d.pump_freq1)
    throw ConfigError("pump_freq_mode 'explicit' needs pump_freq_GHz");
  cfg.snapshot["pump"] = snap;
}

void parse_coupler(const YAML::Node& c, ExperimentConfig& cfg) {
  nlohmann::json snap;
  if (c) check_keys(c, "coupler", {"g_MHz", "E_C0_GHz"});
  if (c && c["g_MHz"] && c["E_C0_GHz"]) throw ConfigError("give either g_MHz or E_C0_GHz");
  if (c && c["E_C0_GHz"]) {
    const double v = as_double(c["E_C0_GHz"], "E_C0_GHz");
    cfg.device.coupling.ec0 = ghz(v);
    snap["E_C0_GHz"] = v;
  } else {
    const double v = num_or(c, "g_MHz", 10.0);
    cfg.device.coupling.g = mhz(v);
    snap["g_MHz"] = v;
  }
  cfg.snapshot["coupler"] = snap;
}

void parse_gate(const YAML::Node& g, ExperimentConfig& cfg) {
  if (g) check_keys(g, "gate", {"p_g0_over_K", "T_g_ns", "beta", "drive_kind"});
  cfg.p_g0_over_k = num_or(g, "p_g0_over_K", 5.0);
  cfg.t_gate = num_or(g, "T_g_ns", 40.0);
  cfg.beta = num_or(g, "beta", 3.0);
  if (!(cfg.t_gate > 0.0)) throw ConfigError("T_g_ns must be positive");
  if (!(cfg.beta > 0.0)) throw ConfigError("beta must be positive");
  try {
    cfg.drive = drive_kind_from_string(get_or<std::string>(g, "drive_kind", "sum"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  cfg.snapshot["gate"] = {{"p_g0_over_K", cfg.p_g0_over_k}, {"T_g_ns", cfg.t_gate}, {"beta", cfg.beta}};
}

void parse_ramp(const YAML::Node& r, ExperimentConfig& cfg) {
  if (r) check_keys(r, "ramp", {"delta_p_max", "T_ns"});
  cfg.ramp_delta_max = num_or(r, "delta_p_max", 0.05);
  cfg.ramp_time = num_or(r, "T_ns", 2000.0);
  if (cfg.ramp_delta_max < 0.0) throw ConfigError("delta_p_max must be non-negative");
  if (!(cfg.ramp_time > 0.0)) throw ConfigError("T_ns must be positive");
  cfg.snapshot["ramp"] = {{"delta_p_max", cfg.ramp_delta_max}, {"T_ns", cfg.ramp_time}};
}

void parse_sweep(const YAML::Node& s, ExperimentConfig& cfg) {
  if (!s) return;
  check_keys(s, "sweep", {"variable", "values", "start", "stop", "points", "spacing"});
  SweepSpec sw;
  sw.variable = get_or<std::string>(s, "variable", "");
  if (sw.variable.empty()) throw ConfigError("sweep needs a 'variable'");
  if (s["values"]) {
    if (!s["values"].IsSequence() || s["values"].size() == 0)
      throw ConfigError("sweep 'values' must be a non-empty list");
    for (const auto& v : s["values"]) sw.values.push_back(as_double(v, "sweep values"));
  } else {
    if (!s["start"] || !s["stop"]) throw ConfigError("sweep needs 'values' or 'start'/'stop'");
    const double a = as_double(s["start"], "start"), b = as_double(s["stop"], "stop");
    const int n = get_or<int>(s, "points", 51);
    const auto spacing = get_or<std::string>(s, "spacing", "linear");
    if (spacing == "linear")
      sw.values = linspace(a, b, n);
    else if (spacing == "log")
      sw.values = logspace(a, b, n);
    else
      throw ConfigError("sweep spacing must be 'linear' or 'log'");
  }
  cfg.sweep = std::move(sw);
}

void parse_loss(const YAML::Node& l, ExperimentConfig& cfg) {
  if (l) check_keys(l, "loss", {"target_theta_rad", "p_g0_over_K_bracket", "angle_tol_rad"});
  cfg.target_theta = num_or(l, "target_theta_rad", std::numbers::pi / 2);
  cfg.angle_tol = num_or(l, "angle_tol_rad", 1e-3);
  if (l && l["p_g0_over_K_bracket"]) {
    const auto b = per_kpo(l["p_g0_over_K_bracket"], "p_g0_over_K_bracket");
    cfg.bracket_lo = b.first;
    cfg.bracket_hi = b.second;
  }
  if (!(cfg.bracket_hi > cfg.bracket_lo)) throw ConfigError("p_g0 bracket must be increasing");
  if (!(cfg.angle_tol > 0.0)) throw ConfigError("angle_tol_rad must be positive");
}

void parse_solver(const YAML::Node& s, ExperimentConfig& cfg) {
  if (!s) return;
  check_keys(s, "solver", {"method", "rel_tol", "abs_tol", "max_step_ns", "initial_step_ns",
                           "renormalize", "samples", "fock_dim", "max_steps"});
  auto& so = cfg.solver;
  try {
    so.method = method_from_string(get_or<std::string>(s, "method", "dopri5"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (s["rel_tol"] || s["abs_tol"]) {
    cfg.tol_explicit = true;
    so.rel_tol = num_or(s, "rel_tol", num_or(s, "abs_tol", 1e-9));
    so.abs_tol = num_or(s, "abs_tol", so.rel_tol);
  }
  so.max_step = num_or(s, "max_step_ns", so.max_step);
  so.initial_step = num_or(s, "initial_step_ns", 0.0);
  so.renormalize = get_or<bool>(s, "renormalize", false);
  so.samples = get_or<int>(s, "samples", 2001);
  so.max_steps = get_or<std::int64_t>(s, "max_steps", so.max_steps);
  cfg.fock_dim = get_or<int>(s, "fock_dim", 0);
  if (cfg.fock_dim != 0 && cfg.fock_dim < 2) throw ConfigError("fock_dim must be >= 2");
  try {
    so.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void parse_output(const YAML::Node& o, ExperimentConfig& cfg) {
  if (!o) return;
  check_keys(o, "output", {"dir", "plot", "certify"});
  if (o["dir"]) cfg.out_dir = o["dir"].as<std::string>();
  cfg.plot = get_or<bool>(o, "plot", true);
  cfg.certify = get_or<bool>(o, "certify", true);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (root.IsMap() && root["config"]) root = root["config"];
  check_keys(root, "top level",
             {"experiment", "model", "workers", "circuit", "pump", "coupler", "gate", "ramp",
              "sweep", "loss", "solver", "output"});

  ExperimentConfig cfg;
  if (root["experiment"]) cfg.experiment = experiment_from_string(root["experiment"].as<std::string>());
  try {
    cfg.model = model_from_string(get_or<std::string>(root, "model", "simple"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  cfg.workers = get_or<int>(root, "workers", 0);
  parse_circuit(root["circuit"], cfg);
  parse_pump(root["pump"], cfg);
  parse_coupler(root["coupler"], cfg);
  parse_gate(root["gate"], cfg);
  parse_ramp(root["ramp"], cfg);
  parse_sweep(root["sweep"], cfg);
  parse_loss(root["loss"], cfg);
  parse_solver(root["solver"], cfg);
  parse_output(root["output"], cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

SolverSettings ExperimentConfig::solver_for(Model m) const {
  SolverSettings s = solver;
  if (!tol_explicit)
    s.rel_tol = s.abs_tol = (m == Model::sc || experiment == Experiment::loss_sweep) ? 1e-10 : 1e-9;
  return s;
}

RzzSetup ExperimentConfig::rzz_setup() const {
  RzzSetup s;
  s.model = model;
  s.drive = drive;
  s.device = device;
  s.t_gate = t_gate;
  s.beta = beta;
  s.fock_dim = fock_dim;
  s.solver = solver_for(model);
  return s;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j = snapshot;
  j["experiment"] = to_string(experiment);
  j["model"] = to_string(model);
  j["workers"] = workers;
  j["gate"]["drive_kind"] = to_string(drive);
  if (sweep) j["sweep"] = {{"variable", sweep->variable}, {"values", sweep->values}};
  j["loss"] = {{"target_theta_rad", target_theta},
               {"p_g0_over_K_bracket", {bracket_lo, bracket_hi}},
               {"angle_tol_rad", angle_tol}};
  nlohmann::json s = {{"method", to_string(solver.method)},
                      {"initial_step_ns", solver.initial_step},
                      {"renormalize", solver.renormalize},
                      {"samples", solver.samples},
                      {"fock_dim", fock_dim},
                      {"max_steps", solver.max_steps}};
  if (std::isfinite(solver.max_step)) s["max_step_ns"] = solver.max_step;
  if (tol_explicit) {
    s["rel_tol"] = solver.rel_tol;
    s["abs_tol"] = solver.abs_tol;
  }
  j["solver"] = s;
  j["output"] = {{"dir", out_dir.string()}, {"plot", plot}, {"certify", certify}};
  return j;
}

SweepSpec default_sweep(const ExperimentConfig& cfg) {
  switch (cfg.experiment) {
    case Experiment::loss_sweep: return {"T1_us", logspace(1.0, 1000.0, 13)};
    default: return {"p_g0_over_K", linspace(0.0, cfg.drive == DriveKind::sum ? 5.0 : 20.0, 51)};
  }
}

// ---------------------------------------------------------------------------
// Experiments

namespace {

const SweepSpec& checked_sweep(const ExperimentConfig& cfg, SweepSpec& storage,
                               const std::string& variable) {
  storage = cfg.sweep ? *cfg.sweep : default_sweep(cfg);
  if (storage.variable != variable)
    throw ConfigError(to_string(cfg.experiment) + " sweeps '" + variable + "', not '" +
                      storage.variable + "'");
  return storage;
}

int worker_count(const ExperimentConfig& cfg) {
  if (cfg.workers > 0) return cfg.workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

nlohmann::json stats_json(const SolverStats& s) {
  return {{"accepted", s.accepted},
          {"rejected", s.rejected},
          {"rhs_evals", s.rhs_evals},
          {"min_step_ns", std::isfinite(s.min_step) ? s.min_step : 0.0},
          {"max_step_ns", s.max_step}};
}

nlohmann::json device_json(const RzzExperiment& exp) {
  const ResolvedDevice& rd = exp.device();
  nlohmann::json j = {
      {"K_MHz", to_ghz(rd.kerr) * 1e3},
      {"P_MHz", to_ghz(rd.pump) * 1e3},
      {"alpha", rd.alpha},
      {"delta_1", rd.delta1},
      {"delta_2", rd.delta2},
      {"E_J1_GHz", to_ghz(rd.kpo1.ej)},
      {"E_J2_GHz", to_ghz(rd.kpo2.ej)},
      {"E_C0_GHz", to_ghz(rd.ec0)},
      {"g_MHz", to_ghz(rd.g) * 1e3},
      {"Delta12_GHz", to_ghz(rd.delta12)},
      {"fock_dim", exp.setup().fock_dim},
      {"reference_overlap", exp.raw_reference_overlap()},
  };
  if (exp.setup().model == Model::sc) {
    j["omega_tilde1_GHz"] = to_ghz(rd.omega_tilde1);
    j["omega_tilde2_GHz"] = to_ghz(rd.omega_tilde2);
    j["pump_freq1_GHz"] = to_ghz(rd.pump_freq1);
    j["pump_freq2_GHz"] = to_ghz(rd.pump_freq2);
  }
  return j;
}

Vector lowest_eigenvector(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.adjoint()));
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  return es.eigenvectors().col(0);
}

struct RampRun {
  Trajectory trajectory;
  double final_photons = 0.0;
};

struct RampModels {
  KpoParams kpo;
  KerrPump kp;
  double pump_freq = 0.0;
  double omega_tilde = 0.0;
};

RampModels ramp_models(const ExperimentConfig& cfg, int dim) {
  const auto& d = cfg.device;
  RampModels m;
  m.kpo = {d.ec1, ej_from_omega(d.omega1, d.ec1, d.n_squids, d.theta0), d.n_squids, d.theta0};
  m.kp = kerr_and_pump(m.kpo, cfg.ramp_delta_max);
  const ScMode mode = make_sc_mode(m.kpo, dim, m.kpo.ec);
  m.omega_tilde = calibrate_resonance(OperatorMatrix(HilbertSpace{dim}, mode.static_part));
  switch (d.calibration) {
    case PumpCalibration::sc_static: m.pump_freq = 2.0 * m.omega_tilde; break;
    case PumpCalibration::bare_mode: m.pump_freq = 2.0 * mode.omega; break;
    case PumpCalibration::explicit_: m.pump_freq = *d.pump_freq1; break;
  }
  return m;
}

RampRun ramp_simple(const ExperimentConfig& cfg, const RampModels& m, int dim, SolverSettings s) {
  const SimpleModelParams sp{cfg.device.detuning, m.kp.kerr, m.kp.pump, 0.0, 0.0};
  const double T = cfg.ramp_time;
  const auto h = build_simple_single(sp, dim, [T](double t) { return t / T; });
  const std::vector<int> vac{0};
  auto prop = schrodinger_propagate(h, StateVector::fock(h.space(), vac), 0.0, T, s);
  RampRun r{std::move(prop.trajectory), 0.0};
  r.final_photons = r.trajectory.photons[0].back();
  return r;
}

RampRun ramp_sc(const ExperimentConfig& cfg, const RampModels& m, int dim, SolverSettings s) {
  const double T = cfg.ramp_time;
  s.max_step = std::min(s.max_step, kTwoPi / m.pump_freq / 20.0);
  s.static_frame = true;
  const auto h = build_sc_single(m.kpo, dim, ramped_tone(cfg.ramp_delta_max, T, m.pump_freq));
  const ScMode mode = make_sc_mode(m.kpo, dim, m.kpo.ec);
  const StateVector ground(h.space(), lowest_eigenvector(mode.static_part));
  auto prop = schrodinger_propagate(h, ground, 0.0, T, s);
  RampRun r{std::move(prop.trajectory), 0.0};
  r.final_photons = r.trajectory.photons[0].back();
  return r;
}

}  // namespace

ExperimentResult run_photon_ramp(const ExperimentConfig& cfg) {
  const auto& d = cfg.device;
  const KpoParams kpo{d.ec1, ej_from_omega(d.omega1, d.ec1, d.n_squids, d.theta0), d.n_squids,
                      d.theta0};
  const KerrPump kp = kerr_and_pump(kpo, cfg.ramp_delta_max);
  const int dim = cfg.fock_dim > 0 ? cfg.fock_dim : recommended_dim(std::sqrt(kp.pump / kp.kerr));
  const RampModels models = ramp_models(cfg, dim);

  const SolverSettings s_simple = cfg.solver_for(Model::simple);
  const SolverSettings s_sc = cfg.solver_for(Model::sc);
  auto runs = parallel_map<RampRun>(2, worker_count(cfg), [&](std::size_t i) {
    return i == 0 ? ramp_simple(cfg, models, dim, s_simple) : ramp_sc(cfg, models, dim, s_sc);
  });
  const RampRun& simple = runs[0];
  const RampRun& sc = runs[1];

  ExperimentResult res;
  res.table.header = {"t_ns", "n_simple", "n_sc", "n_diff"};
  double max_diff = 0.0;
  for (std::size_t i = 0; i < simple.trajectory.times.size(); ++i) {
    const double a = simple.trajectory.photons[0][i], b = sc.trajectory.photons[0][i];
    res.table.rows.push_back({simple.trajectory.times[i], a, b, a - b});
    max_diff = std::max(max_diff, std::abs(a - b));
  }
  res.plot = {"Average photon number during the pump ramp", "t_ns", {"n_simple", "n_sc", "n_diff"}};

  res.derived = {{"K_MHz", to_ghz(kp.kerr) * 1e3},
                 {"P_max_MHz", to_ghz(kp.pump) * 1e3},
                 {"P_over_K", kp.pump / kp.kerr},
                 {"E_J_GHz", to_ghz(kpo.ej)},
                 {"omega_tilde_GHz", to_ghz(models.omega_tilde)},
                 {"pump_freq_GHz", to_ghz(models.pump_freq)},
                 {"fock_dim", dim}};
  res.summary = {{"final_n_simple", simple.final_photons},
                 {"final_n_sc", sc.final_photons},
                 {"max_abs_diff", max_diff},
                 {"max_rel_diff", simple.final_photons > 0 ? max_diff / simple.final_photons : 0.0},
                 {"stats_simple", stats_json(simple.trajectory.stats)},
                 {"stats_sc", stats_json(sc.trajectory.stats)}};

  if (cfg.certify) {
    SolverSettings half_simple = s_simple, half_sc = s_sc;
    half_simple.rel_tol *= 0.5;
    half_simple.abs_tol *= 0.5;
    half_sc.rel_tol *= 0.5;
    half_sc.abs_tol *= 0.5;
    half_sc.max_step = std::min(half_sc.max_step, kTwoPi / models.pump_freq / 40.0);
    const RampModels bigger = ramp_models(cfg, dim + 8);
    auto checks = parallel_map<double>(4, worker_count(cfg), [&](std::size_t i) {
      switch (i) {
        case 0: return ramp_simple(cfg, models, dim, half_simple).final_photons;
        case 1: return ramp_simple(cfg, bigger, dim + 8, s_simple).final_photons;
        case 2: return ramp_sc(cfg, models, dim, half_sc).final_photons;
        default: return ramp_sc(cfg, bigger, dim + 8, s_sc).final_photons;
      }
    });
    res.convergence = {
        {"simple_tolerance_delta_n", std::abs(checks[0] - simple.final_photons)},
        {"simple_truncation_delta_n", std::abs(checks[1] - simple.final_photons)},
        {"sc_tolerance_delta_n", std::abs(checks[2] - sc.final_photons)},
        {"sc_truncation_delta_n", std::abs(checks[3] - sc.final_photons)},
    };
  }
  return res;
}

ExperimentResult run_rzz_sweep(const ExperimentConfig& cfg) {
  SweepSpec storage;
  const auto& sweep = checked_sweep(cfg, storage, "p_g0_over_K");
  const RzzExperiment exp(cfg.rzz_setup());
  const double K = exp.device().kerr;
  const auto outcomes = parallel_map<GateOutcome>(
      sweep.values.size(), worker_count(cfg),
      [&](std::size_t i) { return exp.run(sweep.values[i] * K); });

  ExperimentResult res;
  res.table.header = {"p_g0_over_K", "Theta_rad", "F", "leakage"};
  double theta_max = -std::numbers::pi, min_f_quarter = 1.0, max_leak = 0.0;
  bool monotone = true;
  int degenerate = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    res.table.rows.push_back({sweep.values[i], o.theta, o.fidelity, o.leakage});
    if (o.degenerate) {
      ++degenerate;
      continue;
    }
    theta_max = std::max(theta_max, o.theta);
    max_leak = std::max(max_leak, o.leakage);
    if (o.theta >= -1e-9 && o.theta <= std::numbers::pi / 2) min_f_quarter = std::min(min_f_quarter, o.fidelity);
    if (i > 0 && o.theta < outcomes[i - 1].theta) monotone = false;
  }
  res.plot = {"Rzz rotation angle and fidelity", "p_g0_over_K", {"Theta_rad", "F"}};
  res.derived = device_json(exp);
  res.summary = {{"theta_max_rad", theta_max},
                 {"theta_reaches_half_pi", theta_max >= std::numbers::pi / 2},
                 {"min_F_for_theta_in_0_half_pi", min_f_quarter},
                 {"max_leakage", max_leak},
                 {"theta_monotone", monotone},
                 {"degenerate_points", degenerate}};
  if (!outcomes.empty()) {
    res.summary["F_at_first_point"] = outcomes.front().fidelity;
    res.summary["stats_last_point"] = stats_json(outcomes.back().diagnostics.main_stats);
  }
  if (cfg.certify && !sweep.values.empty()) {
    const double p = *std::max_element(sweep.values.begin(), sweep.values.end()) * K;
    const ConvergenceReport rep = certify_convergence(exp.setup(), p);
    res.convergence = {{"p_g0_over_K", p / K},
                       {"tolerance_delta", rep.tolerance_delta},
                       {"truncation_delta", rep.truncation_delta},
                       {"fock_dim", rep.fock_dim},
                       {"rel_tol", rep.rel_tol}};
  }
  return res;
}

ExperimentResult run_loss_sweep(const ExperimentConfig& cfg) {
  if (cfg.model != Model::simple)
    throw ConfigError("loss-sweep uses the master equation on the simple model only");
  SweepSpec storage;
  const auto& sweep = checked_sweep(cfg, storage, "T1_us");
  for (double t1 : sweep.values)
    if (!(t1 > 0.0)) throw ConfigError("T1_us values must be positive");

  const RzzExperiment exp(cfg.rzz_setup());
  const double K = exp.device().kerr;
  const double p_star = tune_pulse_for_angle(exp, cfg.target_theta, cfg.bracket_lo * K,
                                             cfg.bracket_hi * K, cfg.angle_tol);
  const GateOutcome lossless = exp.run(p_star);
  const auto outcomes = parallel_map<GateOutcome>(
      sweep.values.size(), worker_count(cfg),
      [&](std::size_t i) { return exp.run(p_star, 1.0 / (sweep.values[i] * 1e3)); });

  ExperimentResult res;
  res.table.header = {"T1_us", "infidelity", "Theta_rad", "trace"};
  double max_trace_drift = 0.0, min_eig = 0.0;
  bool monotone = true;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    res.table.rows.push_back({sweep.values[i], 1.0 - o.fidelity, o.theta, o.diagnostics.final_norm});
    max_trace_drift = std::max(max_trace_drift, std::abs(o.diagnostics.final_norm - 1.0));
    min_eig = std::min(min_eig, o.diagnostics.min_eigenvalue);
    if (i > 0 && (sweep.values[i] - sweep.values[i - 1]) * (o.fidelity - outcomes[i - 1].fidelity) < 0.0)
      monotone = false;
  }
  res.table.rows.push_back({std::numeric_limits<double>::infinity(), 1.0 - lossless.fidelity,
                            lossless.theta, lossless.diagnostics.final_norm});

  // Crossing of 1e-3 by log-log interpolation between neighbouring grid points.
  nlohmann::json crossing = nullptr;
  for (std::size_t i = 1; i < outcomes.size(); ++i) {
    const double a = 1.0 - outcomes[i - 1].fidelity, b = 1.0 - outcomes[i].fidelity;
    if ((a - 1e-3) * (b - 1e-3) <= 0.0 && a > 0.0 && b > 0.0 && a != b) {
      const double la = std::log(sweep.values[i - 1]), lb = std::log(sweep.values[i]);
      const double f = (std::log(1e-3) - std::log(a)) / (std::log(b) - std::log(a));
      crossing = std::exp(la + f * (lb - la));
      break;
    }
  }
  res.plot = {"Infidelity at the target angle versus T1", "T1_us", {"infidelity"}, true, true};
  res.derived = device_json(exp);
  res.derived["p_g0_over_K"] = p_star / K;
  res.summary = {{"p_g0_over_K", p_star / K},
                 {"theta_lossless_rad", lossless.theta},
                 {"infidelity_lossless", 1.0 - lossless.fidelity},
                 {"T1_us_at_infidelity_1e-3", crossing},
                 {"infidelity_monotone", monotone},
                 {"max_trace_drift", max_trace_drift},
                 {"min_eigenvalue", min_eig}};
  return res;
}

ExperimentResult run_calibrate(const ExperimentConfig& cfg) {
  RzzSetup setup = cfg.rzz_setup();
  ResolvedDevice rd = resolve_device(setup.device);
  const int dim = cfg.fock_dim > 0 ? cfg.fock_dim : recommended_dim(rd.alpha);
  calibrate_sc_pumps(rd, setup.device, std::max(dim, 24));

  ExperimentResult res;
  auto add = [&](std::string name, double v, std::string unit) {
    res.parameters.push_back({std::move(name), v, std::move(unit)});
  };
  const auto [ec1d, ec2d] = renormalized_charging(rd.ec0, rd.kpo1, rd.kpo2);
  const KpoParams* kpos[] = {&rd.kpo1, &rd.kpo2};
  const double deltas[] = {rd.delta1, rd.delta2};
  for (int j = 0; j < 2; ++j) {
    const KpoParams& k = *kpos[j];
    const std::string s = std::to_string(j + 1);
    const KerrPump kp = kerr_and_pump(k, deltas[j]);
    add("E_C" + s, to_ghz(k.ec), "GHz");
    add("E_J" + s, to_ghz(k.ej), "GHz");
    add("E_J_eff" + s, to_ghz(k.ej_eff()), "GHz");
    add("omega" + s, to_ghz(omega_from_circuit(k)), "GHz");
    add("E_C_over_E_J_eff" + s, k.transmon_ratio(), "dimensionless");
    add("K" + s, to_ghz(kp.kerr) * 1e3, "MHz");
    add("P" + s, to_ghz(kp.pump) * 1e3, "MHz");
    add("delta_p" + s, deltas[j], "dimensionless");
  }
  add("N", rd.kpo1.n_squids, "dimensionless");
  add("theta0", rd.kpo1.theta0, "rad");
  add("detuning", to_ghz(cfg.device.detuning) * 1e3, "MHz");
  add("P_over_K", rd.pump / rd.kerr, "dimensionless");
  add("alpha", rd.alpha, "dimensionless");
  add("Delta12", to_ghz(rd.delta12), "GHz");
  add("g", to_ghz(rd.g) * 1e3, "MHz");
  add("E_C0", to_ghz(rd.ec0), "GHz");
  add("V_coefficient", to_ghz(charge_coupling_coefficient(rd.ec0, rd.kpo1, rd.kpo2)) * 1e3, "MHz");
  add("E_C1_dressed", to_ghz(ec1d), "GHz");
  add("E_C2_dressed", to_ghz(ec2d), "GHz");
  add("omega_tilde1", to_ghz(rd.omega_tilde1), "GHz");
  add("omega_tilde2", to_ghz(rd.omega_tilde2), "GHz");
  add("pump_freq1", to_ghz(rd.pump_freq1), "GHz");
  add("pump_freq2", to_ghz(rd.pump_freq2), "GHz");
  const GatePulseParams gp{cfg.p_g0_over_k * rd.kerr, cfg.t_gate, cfg.beta, cfg.drive};
  add("p_g0", to_ghz(gp.p_g0) * 1e3, "MHz");
  add("delta_g_peak", delta_g_envelope(0.5 * cfg.t_gate, gp, rd.kpo1), "dimensionless");
  add("fock_dim", dim, "dimensionless");

  for (const auto& p : res.parameters) res.derived[p.name] = p.value;
  return res;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.experiment) {
    case Experiment::photon_ramp: return run_photon_ramp(cfg);
    case Experiment::rzz_sweep: return run_rzz_sweep(cfg);
    case Experiment::loss_sweep: return run_loss_sweep(cfg);
    case Experiment::calibrate: return run_calibrate(cfg);
  }
  throw ConfigError("unknown experiment");
}

nlohmann::json write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result,
                             double wall_seconds, const std::vector<std::string>& argv) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  const std::string name = to_string(cfg.experiment);
  std::vector<std::string> files;

  const fs::path csv = cfg.out_dir / (name + ".csv");
  if (cfg.experiment == Experiment::calibrate) {
    std::ofstream os(csv);
    if (!os) throw std::runtime_error("cannot write " + csv.string());
    os << "parameter,value,unit\n";
    char buf[32];
    for (const auto& p : result.parameters) {
      std::snprintf(buf, sizeof buf, "%.17g", p.value);
      os << p.name << ',' << buf << ',' << p.unit << '\n';
    }
  } else {
    write_csv(csv, result.table);
  }
  files.push_back(csv.filename().string());

  if (cfg.plot && !result.table.rows.empty()) {
    const fs::path svg = cfg.out_dir / (name + ".svg");
    std::ofstream(svg) << render_svg(result.table, result.plot);
    files.push_back(svg.filename().string());
  }

  nlohmann::json manifest = {{"tool", "kposim"},
                             {"version", kToolVersion},
                             {"command", argv},
                             {"config", cfg.to_json()},
                             {"derived", result.derived},
                             {"summary", result.summary},
                             {"convergence", result.convergence},
                             {"wall_time_s", wall_seconds},
                             {"outputs", files}};
  std::ofstream(cfg.out_dir / "manifest.json") << manifest.dump(2) << '\n';
  return manifest;
}

}  // namespace kpo
