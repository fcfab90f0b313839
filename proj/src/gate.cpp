#include "kposim/gate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace kpo {

std::string to_string(Model m) { return m == Model::simple ? "simple" : "sc"; }

Model model_from_string(const std::string& s) {
  if (s == "simple") return Model::simple;
  if (s == "sc") return Model::sc;
  throw std::invalid_argument("unknown model '" + s + "'");
}

std::string to_string(PumpCalibration c) {
  switch (c) {
    case PumpCalibration::sc_static: return "auto_calibrated";
    case PumpCalibration::bare_mode: return "bare_mode";
    case PumpCalibration::explicit_: return "explicit";
  }
  return "?";
}

PumpCalibration pump_calibration_from_string(const std::string& s) {
  if (s == "auto_calibrated" || s == "sc_static") return PumpCalibration::sc_static;
  if (s == "bare_mode") return PumpCalibration::bare_mode;
  if (s == "explicit") return PumpCalibration::explicit_;
  throw std::invalid_argument("unknown pump_freq_mode '" + s + "'");
}

ResolvedDevice resolve_device(const TwoKpoDevice& dev) {
  ResolvedDevice rd;
  const int n = dev.n_squids;
  rd.kpo1 = {dev.ec1, ej_from_omega(dev.omega1, dev.ec1, n, dev.theta0), n, dev.theta0};
  rd.kpo2 = {dev.ec2, ej_from_omega(dev.omega2, dev.ec2, n, dev.theta0), n, dev.theta0};
  rd.kerr = kerr_and_pump(rd.kpo1, 0.0).kerr;
  if (dev.pump_over_kerr < 0.0) throw std::invalid_argument("P/K must be non-negative");
  rd.pump = dev.pump_over_kerr * rd.kerr;
  rd.alpha = std::sqrt(rd.pump / rd.kerr);
  rd.delta1 = delta_for_pump(rd.pump, rd.kpo1);
  rd.delta2 = delta_for_pump(rd.pump, rd.kpo2);

  if (dev.coupling.ec0.has_value() == dev.coupling.g.has_value())
    throw std::invalid_argument("coupler needs exactly one of E_C0 or target g");
  if (dev.coupling.g) {
    rd.g = *dev.coupling.g;
    rd.ec0 = ec0_from_g(rd.g, rd.kpo1, rd.kpo2);
  } else {
    rd.ec0 = *dev.coupling.ec0;
    rd.g = coupling_from_ec0(rd.ec0, rd.kpo1, rd.kpo2);
  }
  rd.delta12 = dev.omega1 - dev.omega2;
  rd.simple = {dev.detuning, rd.kerr, rd.pump, rd.g, rd.delta12};
  return rd;
}

void calibrate_sc_pumps(ResolvedDevice& rd, const TwoKpoDevice& dev, int dim) {
  const auto [ec1, ec2] = renormalized_charging(rd.ec0, rd.kpo1, rd.kpo2);
  const ScMode m1 = make_sc_mode(rd.kpo1, dim, ec1);
  const ScMode m2 = make_sc_mode(rd.kpo2, dim, ec2);
  switch (dev.calibration) {
    case PumpCalibration::sc_static:
      rd.omega_tilde1 = calibrate_resonance(OperatorMatrix(HilbertSpace{dim}, m1.static_part));
      rd.omega_tilde2 = calibrate_resonance(OperatorMatrix(HilbertSpace{dim}, m2.static_part));
      break;
    case PumpCalibration::bare_mode:
      rd.omega_tilde1 = m1.omega;
      rd.omega_tilde2 = m2.omega;
      break;
    case PumpCalibration::explicit_:
      if (!dev.pump_freq1 || !dev.pump_freq2)
        throw std::invalid_argument("explicit pump mode needs both pump frequencies");
      rd.omega_tilde1 = 0.5 * *dev.pump_freq1;
      rd.omega_tilde2 = 0.5 * *dev.pump_freq2;
      break;
  }
  rd.pump_freq1 = 2.0 * rd.omega_tilde1;
  rd.pump_freq2 = 2.0 * rd.omega_tilde2;
}

// ---------------------------------------------------------------------------

double wrap_angle(double x) {
  double r = std::remainder(x, kTwoPi);
  if (r <= -std::numbers::pi) r += kTwoPi;
  return r;
}

StateVector prepare_initial(const HilbertSpace& space, double alpha) {
  const CatPair cats = cat_pair_states(space, alpha);
  // Gram matrix of the (even, odd) pair fixes N0.
  const double n2 = 2.0 + 2.0 * inner_product(cats.even, cats.odd).real();
  return (1.0 / std::sqrt(n2)) * (cats.even + cats.odd);
}

ReferencePair orthonormalize(const ReferencePair& p) {
  const StateVector e = p.even.normalized();
  StateVector o = p.odd;
  o.amplitudes() -= inner_product(e, o) * e.amplitudes();
  return {e, o.normalized()};
}

StateVector ideal_target(double theta, const StateVector& psi_even, const StateVector& psi_odd) {
  const StateVector v = psi_even + std::exp(cd(0.0, theta)) * psi_odd;
  return v.normalized();
}

GateOutcome extract_angle_and_fidelity(const StateVector& final_state, const StateVector& psi_even,
                                       const StateVector& psi_odd) {
  GateOutcome out;
  out.alpha1 = inner_product(psi_even, final_state);
  out.alpha2 = inner_product(psi_odd, final_state);
  out.leakage = 1.0 - std::norm(out.alpha1) - std::norm(out.alpha2);
  out.diagnostics.final_norm = final_state.norm();
  if (std::abs(out.alpha1) < 1e-6) {
    out.degenerate = true;
    out.theta = std::numeric_limits<double>::quiet_NaN();
    out.fidelity = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.theta = wrap_angle(std::arg(out.alpha2) - std::arg(out.alpha1));
  out.fidelity = state_fidelity(ideal_target(out.theta, psi_even, psi_odd), final_state);
  return out;
}

double fidelity_mixed(const DensityMatrix& rho, const StateVector& ideal) {
  require_same_space(rho.space(), ideal.space(), "fidelity_mixed");
  const Vector& v = ideal.amplitudes();
  const double f = v.dot(rho.matrix() * v).real();
  return std::clamp(f, 0.0, 1.0);
}

GateOutcome extract_mixed(const DensityMatrix& rho, const StateVector& psi_even,
                          const StateVector& psi_odd) {
  GateOutcome out;
  const Vector& e = psi_even.amplitudes();
  const Vector& o = psi_odd.amplitudes();
  const Matrix& r = rho.matrix();
  const double pe = e.dot(r * e).real();
  const double po = o.dot(r * o).real();
  const cd coherence = o.dot(r * e);
  out.leakage = 1.0 - pe - po;
  out.diagnostics.final_norm = rho.trace().real();
  if (pe < 1e-12) {
    out.degenerate = true;
    out.theta = out.fidelity = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.theta = wrap_angle(std::arg(coherence));
  out.alpha1 = std::sqrt(std::max(pe, 0.0));
  out.alpha2 = std::sqrt(std::max(po, 0.0)) * std::exp(cd(0.0, out.theta));
  out.fidelity = fidelity_mixed(rho, ideal_target(out.theta, psi_even, psi_odd));
  return out;
}

// ---------------------------------------------------------------------------

namespace {

SolverSettings run_settings(const RzzSetup& setup, const ResolvedDevice& rd) {
  SolverSettings s = setup.solver;
  s.samples = 2;
  if (setup.model == Model::sc) {
    const double carrier = setup.drive == DriveKind::sum
                               ? rd.omega_tilde1 + rd.omega_tilde2
                               : std::abs(rd.omega_tilde1 - rd.omega_tilde2);
    const double w_max = std::max({rd.pump_freq1, rd.pump_freq2, carrier});
    s.max_step = std::min(s.max_step, kTwoPi / w_max / 20.0);
    s.static_frame = true;
  }
  return s;
}

}  // namespace

RzzExperiment::RzzExperiment(RzzSetup setup) : setup_(std::move(setup)) {
  if (!(setup_.t_gate > 0.0)) throw std::invalid_argument("gate time must be positive");
  rd_ = resolve_device(setup_.device);
  const int dim = setup_.fock_dim > 0 ? setup_.fock_dim : recommended_dim(rd_.alpha);
  setup_.fock_dim = dim;
  if (setup_.model == Model::sc) calibrate_sc_pumps(rd_, setup_.device, dim);
  space_ = HilbertSpace{dim, dim};

  const CatPair cats = cat_pair_states(space_, rd_.alpha);
  tail_mass_ = cats.tail_mass;
  psi0_ = prepare_initial(space_, rd_.alpha);

  const TimeDependentHamiltonian h0 = hamiltonian(0.0);
  const SolverSettings s = run_settings(setup_, rd_);
  auto even = schrodinger_propagate(h0, cats.even, 0.0, setup_.t_gate, s);
  auto odd = schrodinger_propagate(h0, cats.odd, 0.0, setup_.t_gate, s);
  ref_stats_ = even.trajectory.stats;
  raw_overlap_ = std::abs(inner_product(even.state, odd.state));
  ref_ = orthonormalize({std::move(even.state), std::move(odd.state)});
}

TimeDependentHamiltonian RzzExperiment::hamiltonian(double p_g0) const {
  const GatePulseParams gp{p_g0, setup_.t_gate, setup_.beta, setup_.drive};
  if (setup_.model == Model::simple) return build_simple_gate(rd_.simple, gp, space_);

  ScTwoConfig cfg;
  cfg.kpo1 = rd_.kpo1;
  cfg.kpo2 = rd_.kpo2;
  cfg.pump1 = {rd_.delta1, rd_.pump_freq1, 0.0};
  cfg.pump2 = {rd_.delta2, rd_.pump_freq2, 0.0};
  cfg.gate = gp;
  cfg.gate_carrier = setup_.drive == DriveKind::sum
                         ? rd_.omega_tilde1 + rd_.omega_tilde2
                         : std::abs(rd_.omega_tilde1 - rd_.omega_tilde2);
  cfg.coupling.ec0 = rd_.ec0;
  return build_sc_two(cfg, space_).hamiltonian;
}

StateVector RzzExperiment::final_state(double p_g0, SolverStats* stats) const {
  auto prop = schrodinger_propagate(hamiltonian(p_g0), psi0_, 0.0, setup_.t_gate,
                                    run_settings(setup_, rd_));
  if (stats) *stats = prop.trajectory.stats;
  return std::move(prop.state);
}

GateOutcome RzzExperiment::run(double p_g0, double gamma) const {
  GateOutcome out;
  if (gamma == 0.0) {
    SolverStats st;
    const StateVector psi = final_state(p_g0, &st);
    out = extract_angle_and_fidelity(psi, ref_.even, ref_.odd);
    out.diagnostics.main_stats = st;
  } else {
    auto prop = lindblad_propagate(hamiltonian(p_g0), psi0_, gamma, 0.0, setup_.t_gate,
                                   run_settings(setup_, rd_));
    out = extract_mixed(prop.state, ref_.even, ref_.odd);
    out.diagnostics.main_stats = prop.trajectory.stats;
    out.diagnostics.min_eigenvalue = prop.state.min_eigenvalue();
  }
  out.diagnostics.reference_stats = ref_stats_;
  out.diagnostics.tail_mass = tail_mass_;
  out.diagnostics.raw_overlap = raw_overlap_;
  return out;
}

GateOutcome run_rzz(const RzzSetup& setup, double p_g0, double gamma) {
  return RzzExperiment(setup).run(p_g0, gamma);
}

ConvergenceReport certify_convergence(const RzzSetup& setup, double p_g0) {
  const RzzExperiment base(setup);
  const StateVector a = base.final_state(p_g0);

  RzzSetup tight = base.setup();
  tight.solver.rel_tol *= 0.5;
  tight.solver.abs_tol *= 0.5;
  // A step cap that binds would hide the tolerance change, so halve it too.
  const double cap = run_settings(base.setup(), base.device()).max_step;
  if (std::isfinite(cap)) tight.solver.max_step = 0.5 * cap;
  const StateVector b = RzzExperiment(tight).final_state(p_g0);

  RzzSetup bigger = base.setup();
  bigger.fock_dim += 8;
  const RzzExperiment big(bigger);
  const StateVector c = big.final_state(p_g0);

  ConvergenceReport rep;
  rep.fock_dim = base.setup().fock_dim;
  rep.rel_tol = setup.solver.rel_tol;
  rep.tolerance_delta = 1.0 - state_fidelity(a, b) / (a.norm() * a.norm() * b.norm() * b.norm());
  const StateVector ap = pad_to(a, big.space());
  rep.truncation_delta = 1.0 - state_fidelity(ap, c) / (ap.norm() * ap.norm() * c.norm() * c.norm());
  return rep;
}

double tune_pulse_for_angle(const RzzExperiment& exp, double target, double lo, double hi,
                            double tol, int max_iter) {
  auto angle = [&](double p) { return exp.run(p).theta; };
  double f_lo = angle(lo) - target;
  double f_hi = angle(hi) - target;
  if (f_lo > 0.0 || f_hi < 0.0)
    throw std::runtime_error("target angle is not bracketed by the pulse range");
  for (int it = 0; it < max_iter; ++it) {
    // Secant step guarded by bisection.
    double mid = lo - f_lo * (hi - lo) / (f_hi - f_lo);
    if (!(mid > lo && mid < hi) || it % 3 == 2) mid = 0.5 * (lo + hi);
    const double f_mid = angle(mid) - target;
    if (std::abs(f_mid) < tol) return mid;
    if (f_mid < 0.0) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
      f_hi = f_mid;
    }
  }
  throw ConvergenceError("pulse tuning did not reach the target angle");
}

}  // namespace kpo
