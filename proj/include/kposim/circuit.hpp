#pragma once

#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kposim/hamiltonian.hpp"

namespace kpo {

// Units: times in ns, frequencies and energies as angular frequencies in
// rad/ns (hbar = 1). Config files use ordinary frequencies in GHz.
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline double ghz(double f_ghz) { return kTwoPi * f_ghz; }
inline double mhz(double f_mhz) { return kTwoPi * f_mhz * 1e-3; }
inline double to_ghz(double omega) { return omega / kTwoPi; }

/// One SQUID-array transmon. Energies are angular (E/hbar).
struct KpoParams {
  double ec = 0.0;      // shunt charging energy
  double ej = 0.0;      // per-SQUID Josephson energy
  int n_squids = 1;
  double theta0 = 0.0;  // dc flux bias

  double ej_eff() const;  // E_J cos(theta0)
  void validate() const;
  /// E_C / E_J_eff; the transmon expansion wants this well below 0.05.
  double transmon_ratio() const { return ec / ej_eff(); }
};

struct PumpTone {
  double delta = 0.0;  // flux modulation amplitude
  double omega = 0.0;  // carrier
  double phase = 0.0;
};

enum class DriveKind { sum, difference };

std::string to_string(DriveKind k);
DriveKind drive_kind_from_string(const std::string& s);

struct GatePulseParams {
  double p_g0 = 0.0;   // peak of the simple-model gate amplitude
  double t_gate = 0.0;
  double beta = 3.0;
  DriveKind kind = DriveKind::sum;
  void validate() const;
};

struct SimpleModelParams {
  double detuning = 0.0;
  double kerr = 0.0;
  double pump = 0.0;
  double coupling = 0.0;
  double delta12 = 0.0;  // omega_1 - omega_2
  double alpha() const;  // sqrt(P/K)
  void validate() const;
};

struct CouplingParams {
  std::optional<double> ec0;  // coupler charging energy
  std::optional<double> g;    // target coupling
};

// -- parameter conversions --------------------------------------------------

/// sqrt(8 E_C E_J_eff / N)
double omega_from_circuit(const KpoParams& p);
/// E_J = N omega^2 / (8 E_C cos theta0)
double ej_from_omega(double omega, double ec, int n_squids, double theta0);

struct KerrPump {
  double kerr = 0.0;
  double pump = 0.0;
};
/// K = E_C / N^2 and P = delta sqrt(E_C E_J_eff / 2N) tan(theta0).
KerrPump kerr_and_pump(const KpoParams& p, double delta);
/// Inverse of the pump map: delta such that P(delta) = pump.
double delta_for_pump(double pump, const KpoParams& p);

/// Coupling constant implied by a coupler charging energy.
double coupling_from_ec0(double ec0, const KpoParams& p1, const KpoParams& p2);
/// Closed-form inverse of coupling_from_ec0.
double ec0_from_g(double g, const KpoParams& p1, const KpoParams& p2);
/// Coefficient 16 E_C1 E_C2 / (E_C0 + E_C1 + E_C2) of the n1 n2 coupling.
double charge_coupling_coefficient(double ec0, const KpoParams& p1, const KpoParams& p2);
/// Charging energies dressed by the coupler: E_Cj (E_C0 + E_Ck) / sum.
std::pair<double, double> renormalized_charging(double ec0, const KpoParams& p1,
                                                const KpoParams& p2);

// -- envelopes ---------------------------------------------------------------

/// p_g0 tanh(beta t/T) tanh(beta (1 - t/T)) / tanh^2(beta/2); zero outside [0, T].
double pulse_envelope(double t, const GatePulseParams& gp);
/// Flux-modulation amplitude that realizes pulse_envelope on KPO1 through the pump map.
double delta_g_envelope(double t, const GatePulseParams& gp, const KpoParams& p1);

// -- Hamiltonian builders ----------------------------------------------------

using ScalarFn = std::function<double(double)>;

/// Delta n - (K/2) a^dag^2 a^2 + (P/2)(a^dag^2 + a^2). When `pump_profile`
/// is given, the pump term is scaled by pump_profile(t).
TimeDependentHamiltonian build_simple_single(const SimpleModelParams& sp, int dim,
                                             ScalarFn pump_profile = {});

/// Two KPOs in the frame rotating at half their pump frequencies, coupled
/// by g and driven by the sum-frequency gate pulse on KPO1.
TimeDependentHamiltonian build_simple_two(const SimpleModelParams& sp, const GatePulseParams& gp,
                                          const HilbertSpace& space);

/// Same with the difference-frequency gate term (p_g/2) cos(D12 t) n_1.
TimeDependentHamiltonian build_simple_two_diff(const SimpleModelParams& sp,
                                               const GatePulseParams& gp,
                                               const HilbertSpace& space);

/// Dispatches on gp.kind.
TimeDependentHamiltonian build_simple_gate(const SimpleModelParams& sp, const GatePulseParams& gp,
                                           const HilbertSpace& space);

/// Local operators of one lab-frame SQUID-array mode.
struct ScMode {
  KpoParams params;
  double ec_dressed = 0.0;  // charging energy used for the ladder basis
  double omega = 0.0;       // sqrt(8 ec_dressed E_J_eff / N)
  Matrix n_op;              // Cooper-pair number
  Matrix phi_op;            // phase
  Matrix static_part;       // omega a^dag a - E_J_eff phi^2/2N - N E_J_eff (cos(phi/N) - 1)
  Matrix cos_shifted;       // cos(phi/N) - 1
};

ScMode make_sc_mode(const KpoParams& p, int dim, double ec_dressed);

/// Flux-modulation drive m(t) entering cos(theta0 - m(t)).
using FluxDrive = std::function<double(double)>;

/// omega a^dag a - N E_J cos(theta0 - m(t)) cos(phi/N) - E_J_eff phi^2 / 2N, with
/// the c-number terms dropped (they only contribute a global phase).
TimeDependentHamiltonian build_sc_single(const KpoParams& p, int dim, FluxDrive drive = {});

/// Pump tone with a linear ramp delta(t) = delta_max t / T (the photon-ramp experiment).
FluxDrive ramped_tone(double delta_max, double ramp_time, double omega, double phase = 0.0);
FluxDrive steady_tone(const PumpTone& tone);

struct ScTwoConfig {
  KpoParams kpo1, kpo2;
  PumpTone pump1, pump2;
  GatePulseParams gate;
  double gate_carrier = 0.0;  // omega_1 + omega_2 (sum) or |omega_1 - omega_2| (difference)
  double gate_phase = 0.0;
  CouplingParams coupling;
};

struct ScTwoModel {
  TimeDependentHamiltonian hamiltonian;
  ScMode mode1, mode2;
  double ec0 = 0.0;
  double coupling_coefficient = 0.0;  // 16 E_C1 E_C2 / sum
  double implied_g = 0.0;
};

/// Lab-frame two-KPO circuit Hamiltonian with capacitive n1 n2 coupling.
ScTwoModel build_sc_two(const ScTwoConfig& cfg, const HilbertSpace& space);

/// Single-photon resonance E1 - E0 of a static Hamiltonian, where E1 is the
/// lowest level reached from the ground state by a^dagger.
double calibrate_resonance(const OperatorMatrix& h_static, int mode = 0);

/// Maximum of max|H(t) - H(t)^dag| / max|H(t)| over `samples` points of [t0, t1].
double max_hermiticity_error(const TimeDependentHamiltonian& h, double t0, double t1, int samples);

}  // namespace kpo
