#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kposim/circuit.hpp"
#include "kposim/dynamics.hpp"

namespace kpo {

enum class Model { simple, sc };

std::string to_string(Model m);
Model model_from_string(const std::string& s);

/// Where the SC pump frequency omega_p = 2 omega~ comes from.
enum class PumpCalibration {
  sc_static,  // single-photon gap of the static circuit Hamiltonian (default)
  bare_mode,  // harmonic mode frequency sqrt(8 E_C E_J_eff / N)
  explicit_,  // user-supplied pump frequencies
};

std::string to_string(PumpCalibration c);
PumpCalibration pump_calibration_from_string(const std::string& s);

/// Device description in the units used internally (rad/ns).
struct TwoKpoDevice {
  double ec1 = 0.0, ec2 = 0.0;
  double omega1 = 0.0, omega2 = 0.0;  // harmonic mode frequencies
  int n_squids = 5;
  double theta0 = std::numbers::pi / 4;
  double detuning = 0.0;
  double pump_over_kerr = 4.0;
  CouplingParams coupling;  // target g or E_C0
  PumpCalibration calibration = PumpCalibration::sc_static;
  std::optional<double> pump_freq1, pump_freq2;  // used when calibration == explicit_
};

/// Everything derived from a TwoKpoDevice.
struct ResolvedDevice {
  KpoParams kpo1, kpo2;
  double kerr = 0.0, pump = 0.0, alpha = 0.0;
  double delta1 = 0.0, delta2 = 0.0;  // flux pump amplitudes giving P on each KPO
  double ec0 = 0.0, g = 0.0;
  double delta12 = 0.0;
  SimpleModelParams simple;
  // Filled for the SC model only.
  double omega_tilde1 = 0.0, omega_tilde2 = 0.0;
  double pump_freq1 = 0.0, pump_freq2 = 0.0;
};

ResolvedDevice resolve_device(const TwoKpoDevice& dev);

/// omega_p1/2, omega_p2/2 and the dressed-mode resonances (needs the Fock cutoff).
void calibrate_sc_pumps(ResolvedDevice& rd, const TwoKpoDevice& dev, int dim);

struct GateDiagnostics {
  SolverStats main_stats;
  SolverStats reference_stats;
  double final_norm = 1.0;  // norm (pure) or trace (mixed) of the final state
  double tail_mass = 0.0;   // coherent-state weight beyond the Fock cutoff
  double raw_overlap = 0.0; // |<Psi_even|Psi_odd>| before orthonormalization
  double min_eigenvalue = 0.0;  // mixed runs only
};

struct GateOutcome {
  double theta = 0.0;    // wrapped to (-pi, pi]
  double fidelity = 0.0;
  cd alpha1, alpha2;
  double leakage = 0.0;
  bool degenerate = false;  // |alpha1| too small for a phase
  GateDiagnostics diagnostics;
};

/// Wrap to (-pi, pi] with -pi mapped to pi.
double wrap_angle(double x);

/// N0 (psi_even + psi_odd) with alpha real.
StateVector prepare_initial(const HilbertSpace& space, double alpha);

struct ReferencePair {
  StateVector even, odd;
};

/// Gram-Schmidt on (even, odd), keeping `even`'s direction.
ReferencePair orthonormalize(const ReferencePair& p);

/// N1 (Psi_even + e^{i theta} Psi_odd), normalized.
StateVector ideal_target(double theta, const StateVector& psi_even, const StateVector& psi_odd);

/// Projections, rotation angle and fidelity of a pure final state.
GateOutcome extract_angle_and_fidelity(const StateVector& final_state, const StateVector& psi_even,
                                       const StateVector& psi_odd);

/// <ideal|rho|ideal>, clamped to [0, 1].
double fidelity_mixed(const DensityMatrix& rho, const StateVector& ideal);

/// Mixed-state analogue: theta from the phase of <Psi_odd|rho|Psi_even>.
GateOutcome extract_mixed(const DensityMatrix& rho, const StateVector& psi_even,
                          const StateVector& psi_odd);

struct RzzSetup {
  Model model = Model::simple;
  DriveKind drive = DriveKind::sum;
  TwoKpoDevice device;
  double t_gate = 40.0;
  double beta = 3.0;
  int fock_dim = 0;  // 0 selects the recommended cutoff for alpha
  SolverSettings solver;
};

/// One R_zz configuration with its gate-free reference pair cached, so that
/// sweeps over p_g0 and gamma only run the gated propagation.
class RzzExperiment {
 public:
  explicit RzzExperiment(RzzSetup setup);

  const RzzSetup& setup() const { return setup_; }
  const ResolvedDevice& device() const { return rd_; }
  const HilbertSpace& space() const { return space_; }
  const StateVector& initial_state() const { return psi0_; }
  const ReferencePair& reference() const { return ref_; }
  double raw_reference_overlap() const { return raw_overlap_; }

  /// Gated Hamiltonian for a given peak amplitude (p_g0 = 0 is U_0's generator).
  TimeDependentHamiltonian hamiltonian(double p_g0) const;

  StateVector final_state(double p_g0, SolverStats* stats = nullptr) const;
  GateOutcome run(double p_g0, double gamma = 0.0) const;

 private:
  RzzSetup setup_;
  ResolvedDevice rd_;
  HilbertSpace space_;
  StateVector psi0_;
  ReferencePair ref_;
  double raw_overlap_ = 0.0;
  double tail_mass_ = 0.0;
  SolverStats ref_stats_;
};

/// Convenience wrapper: build the experiment and run a single point.
GateOutcome run_rzz(const RzzSetup& setup, double p_g0, double gamma = 0.0);

struct ConvergenceReport {
  double tolerance_delta = 0.0;  // 1 - |<psi(tol)|psi(tol/2)>|^2, any step cap halved too
  double truncation_delta = 0.0; // 1 - |<psi(D)|psi(D+8)>|^2
  int fock_dim = 0;
  double rel_tol = 0.0;
};

/// End-state changes under tolerance halving and a Fock cutoff bump of 8.
ConvergenceReport certify_convergence(const RzzSetup& setup, double p_g0);

/// Bisection on p_g0 in [lo, hi] so that the lossless run gives `target`
/// rotation angle within `tol` radians. Assumes theta increases with p_g0.
double tune_pulse_for_angle(const RzzExperiment& exp, double target, double lo, double hi,
                            double tol = 1e-3, int max_iter = 60);

}  // namespace kpo
