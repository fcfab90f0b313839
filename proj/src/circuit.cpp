#include "kposim/circuit.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace kpo {

namespace {

constexpr cd kI(0.0, 1.0);

Matrix ladder(int dim) { return annihilation_matrix(dim); }

}  // namespace

double KpoParams::ej_eff() const { return ej * std::cos(theta0); }

void KpoParams::validate() const {
  if (!(ec > 0.0)) throw std::invalid_argument("E_C must be positive");
  if (!(ej > 0.0)) throw std::invalid_argument("E_J must be positive");
  if (n_squids < 1) throw std::invalid_argument("SQUID count must be >= 1");
  if (!(theta0 >= 0.0 && theta0 < std::numbers::pi / 2))
    throw std::invalid_argument("theta0 must lie in [0, pi/2)");
}

std::string to_string(DriveKind k) { return k == DriveKind::sum ? "sum" : "difference"; }

DriveKind drive_kind_from_string(const std::string& s) {
  if (s == "sum") return DriveKind::sum;
  if (s == "difference") return DriveKind::difference;
  throw std::invalid_argument("unknown drive kind '" + s + "'");
}

void GatePulseParams::validate() const {
  if (p_g0 < 0.0) throw std::invalid_argument("p_g0 must be non-negative");
  if (!(t_gate > 0.0)) throw std::invalid_argument("gate time must be positive");
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
}

double SimpleModelParams::alpha() const { return std::sqrt(pump / kerr); }

void SimpleModelParams::validate() const {
  if (!(kerr > 0.0)) throw std::invalid_argument("Kerr coefficient must be positive");
  if (pump < 0.0) throw std::invalid_argument("pump amplitude must be non-negative");
}

// ---------------------------------------------------------------------------

double omega_from_circuit(const KpoParams& p) {
  p.validate();
  return std::sqrt(8.0 * p.ec * p.ej_eff() / p.n_squids);
}

double ej_from_omega(double omega, double ec, int n_squids, double theta0) {
  if (!(omega > 0.0) || !(ec > 0.0) || n_squids < 1)
    throw std::invalid_argument("ej_from_omega needs positive inputs");
  const double c = std::cos(theta0);
  if (!(theta0 >= 0.0 && theta0 < std::numbers::pi / 2) || c <= 0.0)
    throw std::invalid_argument("theta0 must lie in [0, pi/2)");
  return n_squids * omega * omega / (8.0 * ec * c);
}

KerrPump kerr_and_pump(const KpoParams& p, double delta) {
  p.validate();
  if (delta < 0.0) throw std::invalid_argument("pump amplitude delta must be non-negative");
  const double n = p.n_squids;
  return {p.ec / (n * n), delta * std::sqrt(p.ec * p.ej_eff() / (2.0 * n)) * std::tan(p.theta0)};
}

double delta_for_pump(double pump, const KpoParams& p) {
  p.validate();
  if (pump < 0.0) throw std::invalid_argument("target pump must be non-negative");
  const double per_delta = std::sqrt(p.ec * p.ej_eff() / (2.0 * p.n_squids)) * std::tan(p.theta0);
  if (per_delta == 0.0) {
    if (pump == 0.0) return 0.0;
    throw std::invalid_argument("theta0 = 0 gives no parametric pump");
  }
  return pump / per_delta;
}

namespace {
double coupling_numerator(const KpoParams& p1, const KpoParams& p2) {
  p1.validate();
  p2.validate();
  const double root = std::pow(
      p1.ej_eff() * p2.ej_eff() / (4.0 * p1.n_squids * p2.n_squids * p1.ec * p2.ec), 0.25);
  return 4.0 * p1.ec * p2.ec * root;
}
}  // namespace

double coupling_from_ec0(double ec0, const KpoParams& p1, const KpoParams& p2) {
  if (!(ec0 > 0.0)) throw std::invalid_argument("E_C0 must be positive");
  return coupling_numerator(p1, p2) / (ec0 + p1.ec + p2.ec);
}

double ec0_from_g(double g, const KpoParams& p1, const KpoParams& p2) {
  if (!(g > 0.0)) throw std::invalid_argument("target coupling must be positive");
  const double ec0 = coupling_numerator(p1, p2) / g - p1.ec - p2.ec;
  if (!(ec0 > 0.0))
    throw std::invalid_argument("target coupling is infeasible (needs E_C0 <= 0)");
  return ec0;
}

double charge_coupling_coefficient(double ec0, const KpoParams& p1, const KpoParams& p2) {
  return 16.0 * p1.ec * p2.ec / (ec0 + p1.ec + p2.ec);
}

std::pair<double, double> renormalized_charging(double ec0, const KpoParams& p1,
                                                const KpoParams& p2) {
  const double sum = ec0 + p1.ec + p2.ec;
  return {p1.ec * (ec0 + p2.ec) / sum, p2.ec * (ec0 + p1.ec) / sum};
}

// ---------------------------------------------------------------------------

double pulse_envelope(double t, const GatePulseParams& gp) {
  if (t <= 0.0 || t >= gp.t_gate) return 0.0;
  const double s = t / gp.t_gate;
  const double norm = std::tanh(0.5 * gp.beta);
  return gp.p_g0 * std::tanh(gp.beta * s) * std::tanh(gp.beta * (1.0 - s)) / (norm * norm);
}

double delta_g_envelope(double t, const GatePulseParams& gp, const KpoParams& p1) {
  return delta_for_pump(pulse_envelope(t, gp), p1);
}

// ---------------------------------------------------------------------------

namespace {

Matrix kerr_pump_matrix(int dim, double detuning, double kerr, double pump) {
  const Matrix a = ladder(dim);
  const Matrix ad = a.adjoint();
  const Matrix a2 = a * a;
  const Matrix ad2 = ad * ad;
  return detuning * (ad * a) - 0.5 * kerr * (ad2 * a2) + 0.5 * pump * (ad2 + a2);
}

void add_kerr_modes(TimeDependentHamiltonian& h, const SimpleModelParams& sp) {
  for (int j = 0; j < 2; ++j) {
    const Matrix a = ladder(h.space().dim(j));
    const Matrix ad = a.adjoint();
    h.add_local(j, sp.detuning * (ad * a) - 0.5 * sp.kerr * (ad * ad * a * a), {},
                "kerr" + std::to_string(j + 1));
    h.add_local(j, 0.5 * sp.pump * (ad * ad + a * a), {}, "pump" + std::to_string(j + 1));
  }
}

void add_exchange(TimeDependentHamiltonian& h, const SimpleModelParams& sp) {
  const Matrix a1 = ladder(h.space().dim(0));
  const Matrix a2 = ladder(h.space().dim(1));
  const double g = sp.coupling, d12 = sp.delta12;
  h.add_product({{0, a1}, {1, a2.adjoint()}}, [g, d12](double t) { return g * std::exp(-kI * d12 * t); },
                "g a1 a2^dag");
  h.add_product({{0, a1.adjoint()}, {1, a2}}, [g, d12](double t) { return g * std::exp(kI * d12 * t); },
                "g a1^dag a2");
}

void check_two_mode(const HilbertSpace& space) {
  if (space.modes() != 2) throw std::invalid_argument("two-KPO model needs a two-mode space");
}

}  // namespace

TimeDependentHamiltonian build_simple_single(const SimpleModelParams& sp, int dim,
                                             ScalarFn pump_profile) {
  sp.validate();
  TimeDependentHamiltonian h(HilbertSpace{dim});
  if (!pump_profile) {
    h.add_local(0, kerr_pump_matrix(dim, sp.detuning, sp.kerr, sp.pump), {}, "kerr+pump");
    return h;
  }
  const Matrix a = ladder(dim);
  const Matrix ad = a.adjoint();
  h.add_local(0, sp.detuning * (ad * a) - 0.5 * sp.kerr * (ad * ad * a * a), {}, "kerr");
  h.add_local(0, 0.5 * sp.pump * (ad * ad + a * a),
              [f = std::move(pump_profile)](double t) { return cd(f(t)); }, "pump");
  return h;
}

TimeDependentHamiltonian build_simple_two(const SimpleModelParams& sp, const GatePulseParams& gp,
                                          const HilbertSpace& space) {
  sp.validate();
  gp.validate();
  check_two_mode(space);
  if (gp.kind != DriveKind::sum)
    throw std::invalid_argument("build_simple_two expects a sum-frequency gate pulse");

  TimeDependentHamiltonian h(space);
  add_kerr_modes(h, sp);
  add_exchange(h, sp);
  if (gp.p_g0 != 0.0) {
    const Matrix a1 = ladder(space.dim(0));
    const double d12 = sp.delta12;
    h.add_local(0, 0.5 * (a1 * a1),
                [gp, d12](double t) { return pulse_envelope(t, gp) * std::exp(-kI * d12 * t); },
                "gate a1^2");
    h.add_local(0, 0.5 * (a1 * a1).adjoint(),
                [gp, d12](double t) { return pulse_envelope(t, gp) * std::exp(kI * d12 * t); },
                "gate a1^dag^2");
  }
  return h;
}

TimeDependentHamiltonian build_simple_two_diff(const SimpleModelParams& sp,
                                               const GatePulseParams& gp,
                                               const HilbertSpace& space) {
  sp.validate();
  gp.validate();
  check_two_mode(space);
  if (gp.kind != DriveKind::difference)
    throw std::invalid_argument("build_simple_two_diff expects a difference-frequency gate pulse");

  TimeDependentHamiltonian h(space);
  add_kerr_modes(h, sp);
  add_exchange(h, sp);
  if (gp.p_g0 != 0.0) {
    const Matrix a1 = ladder(space.dim(0));
    const double d12 = sp.delta12;
    h.add_local(0, 0.5 * (a1.adjoint() * a1),
                [gp, d12](double t) { return cd(pulse_envelope(t, gp) * std::cos(d12 * t)); },
                "gate n1");
  }
  return h;
}

TimeDependentHamiltonian build_simple_gate(const SimpleModelParams& sp, const GatePulseParams& gp,
                                           const HilbertSpace& space) {
  return gp.kind == DriveKind::sum ? build_simple_two(sp, gp, space)
                                   : build_simple_two_diff(sp, gp, space);
}

// ---------------------------------------------------------------------------

ScMode make_sc_mode(const KpoParams& p, int dim, double ec_dressed) {
  p.validate();
  ScMode m;
  m.params = p;
  m.ec_dressed = ec_dressed;
  const double ejt = p.ej_eff();
  const double n = p.n_squids;
  m.omega = std::sqrt(8.0 * ec_dressed * ejt / n);

  const Matrix a = ladder(dim);
  const Matrix ad = a.adjoint();
  m.n_op = kI * std::pow(ejt / (32.0 * n * ec_dressed), 0.25) * (ad - a);
  m.phi_op = std::pow(2.0 * n * ec_dressed / ejt, 0.25) * (ad + a);
  m.cos_shifted =
      hermitian_function(m.phi_op, [n](double x) { return std::cos(x / n) - 1.0; });
  m.static_part = m.omega * (ad * a) - (ejt / (2.0 * n)) * (m.phi_op * m.phi_op) -
                  (n * ejt) * m.cos_shifted;
  return m;
}

namespace {

// -N E_J [cos(theta0 - m(t)) - cos(theta0)]
Coefficient modulation_coefficient(const KpoParams& p, FluxDrive drive) {
  const double amp = -p.n_squids * p.ej;
  const double th = p.theta0;
  return [amp, th, drive = std::move(drive)](double t) {
    const double m = drive(t);
    // cos(th - m) - cos(th) = -2 sin(th - m/2) sin(-m/2)
    return cd(amp * 2.0 * std::sin(th - 0.5 * m) * std::sin(0.5 * m));
  };
}

}  // namespace

TimeDependentHamiltonian build_sc_single(const KpoParams& p, int dim, FluxDrive drive) {
  const ScMode m = make_sc_mode(p, dim, p.ec);
  TimeDependentHamiltonian h(HilbertSpace{dim});
  h.add_local(0, m.static_part, {}, "transmon");
  if (drive) h.add_local(0, m.cos_shifted, modulation_coefficient(p, std::move(drive)), "flux drive");
  return h;
}

FluxDrive ramped_tone(double delta_max, double ramp_time, double omega, double phase) {
  return [=](double t) { return delta_max * (t / ramp_time) * std::cos(omega * t + phase); };
}

FluxDrive steady_tone(const PumpTone& tone) {
  return [tone](double t) { return tone.delta * std::cos(tone.omega * t + tone.phase); };
}

ScTwoModel build_sc_two(const ScTwoConfig& cfg, const HilbertSpace& space) {
  check_two_mode(space);
  cfg.gate.validate();
  if (cfg.coupling.ec0.has_value() == cfg.coupling.g.has_value())
    throw std::invalid_argument("coupler needs exactly one of E_C0 or target g");

  ScTwoModel out;
  out.ec0 = cfg.coupling.ec0 ? *cfg.coupling.ec0 : ec0_from_g(*cfg.coupling.g, cfg.kpo1, cfg.kpo2);
  out.implied_g = coupling_from_ec0(out.ec0, cfg.kpo1, cfg.kpo2);
  out.coupling_coefficient = charge_coupling_coefficient(out.ec0, cfg.kpo1, cfg.kpo2);

  const auto [ec1, ec2] = renormalized_charging(out.ec0, cfg.kpo1, cfg.kpo2);
  out.mode1 = make_sc_mode(cfg.kpo1, space.dim(0), ec1);
  out.mode2 = make_sc_mode(cfg.kpo2, space.dim(1), ec2);

  TimeDependentHamiltonian h(space);
  h.add_local(0, out.mode1.static_part, {}, "transmon1");
  h.add_local(1, out.mode2.static_part, {}, "transmon2");

  const PumpTone p1 = cfg.pump1;
  const GatePulseParams gate = cfg.gate;
  const KpoParams k1 = cfg.kpo1;
  const double carrier = cfg.gate_carrier, gphase = cfg.gate_phase;
  FluxDrive drive1 = [p1, gate, k1, carrier, gphase](double t) {
    double m = p1.delta * std::cos(p1.omega * t + p1.phase);
    if (gate.p_g0 != 0.0) m += delta_g_envelope(t, gate, k1) * std::cos(carrier * t + gphase);
    return m;
  };
  h.add_local(0, out.mode1.cos_shifted, modulation_coefficient(cfg.kpo1, std::move(drive1)),
              "flux drive 1");
  h.add_local(1, out.mode2.cos_shifted, modulation_coefficient(cfg.kpo2, steady_tone(cfg.pump2)),
              "flux drive 2");
  h.add_product({{0, out.coupling_coefficient * out.mode1.n_op}, {1, out.mode2.n_op}}, {},
                "V n1 n2");
  out.hamiltonian = std::move(h);
  return out;
}

// ---------------------------------------------------------------------------

double calibrate_resonance(const OperatorMatrix& h_static, int mode) {
  if (!h_static.is_hermitian(1e-10))
    throw std::invalid_argument("calibrate_resonance needs a Hermitian operator");
  const HilbertSpace& space = h_static.space();
  Eigen::SelfAdjointEigenSolver<Matrix> es(h_static.matrix());
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  const Matrix& u = es.eigenvectors();

  std::vector<int> zeros(space.modes(), 0);
  const Vector vac = StateVector::fock(space, zeros).amplitudes();

  Eigen::Index ref = 0;
  const double w0 = (u.adjoint() * vac).cwiseAbs2().maxCoeff(&ref);
  if (w0 < 0.5)
    throw std::runtime_error("no eigenstate is dominated by the vacuum; resonance undefined");

  const Vector excited = (creation(space, mode).matrix() * u.col(ref)).normalized();
  Eigen::Index exc = 0;
  const double w1 = (u.adjoint() * excited).cwiseAbs2().maxCoeff(&exc);
  if (w1 < 0.5 || exc == ref)
    throw std::runtime_error("single-photon partner is not a distinct eigenstate");
  return es.eigenvalues()(exc) - es.eigenvalues()(ref);
}

double max_hermiticity_error(const TimeDependentHamiltonian& h, double t0, double t1, int samples) {
  double worst = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double t = samples == 1 ? t0 : t0 + (t1 - t0) * k / (samples - 1);
    worst = std::max(worst, h.at(t).hermiticity_error());
  }
  return worst;
}

}  // namespace kpo
