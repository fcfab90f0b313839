#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "kposim/hamiltonian.hpp"

namespace kpo {

/// The integrator gave up (step size underflow or step budget exhausted).
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The state became non-finite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Method { dopri5, rk4 };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct SolverSettings {
  Method method = Method::dopri5;
  double rel_tol = 1e-9;
  double abs_tol = 1e-9;
  double max_step = std::numeric_limits<double>::infinity();
  double initial_step = 0.0;  // 0 selects a step from the initial derivative; rk4 requires > 0
  bool renormalize = false;
  // Schrodinger runs only: integrate in the interaction picture of the
  // time-independent single-mode terms (exact, no rotating-wave step).
  bool static_frame = false;
  int samples = 2001;  // points on the uniform observation grid (>= 2)
  std::int64_t max_steps = 200'000'000;

  void validate() const;
};

struct SolverStats {
  std::int64_t accepted = 0;
  std::int64_t rejected = 0;
  std::int64_t rhs_evals = 0;
  double min_step = std::numeric_limits<double>::infinity();
  double max_step = 0.0;
};

/// Observables on a uniform time grid: <n_j> per mode and the norm
/// (pure states) or trace (density matrices).
struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> photons;  // photons[mode][sample]
  std::vector<double> norm;
  SolverStats stats;
};

template <typename State>
struct Propagation {
  State state;
  Trajectory trajectory;
};

/// Generic explicit integrator on a flat complex vector.
using Rhs = std::function<void(double t, const Vector& y, Vector& dy)>;
using Observer = std::function<void(double t, const Vector& y)>;
/// Called after every accepted step with the state and its derivative; must
/// apply the same linear map to both (renormalization, symmetrization).
using StepHook = std::function<void(Vector& y, Vector& dy)>;

SolverStats integrate(const Rhs& f, Vector& y, double t0, double t1, const SolverSettings& s,
                      const std::vector<double>& sample_times, const Observer& observe,
                      const StepHook& hook = {});

/// Uniform grid of `samples` points on [t0, t1] (at least both ends).
std::vector<double> sample_grid(double t0, double t1, int samples);

/// i d/dt psi = H(t) psi.
Propagation<StateVector> schrodinger_propagate(const TimeDependentHamiltonian& h,
                                               const StateVector& psi0, double t0, double t1,
                                               const SolverSettings& settings);

/// d/dt rho = -i[H, rho] + (gamma/2) sum_j (2 a_j rho a_j^dag - {a_j^dag a_j, rho}).
Propagation<DensityMatrix> lindblad_propagate(const TimeDependentHamiltonian& h,
                                              const DensityMatrix& rho0, double gamma, double t0,
                                              double t1, const SolverSettings& settings);
Propagation<DensityMatrix> lindblad_propagate(const TimeDependentHamiltonian& h,
                                              const StateVector& psi0, double gamma, double t0,
                                              double t1, const SolverSettings& settings);

/// Propagates each state with the gate-free Hamiltonian `h_reference` (U_0).
std::vector<StateVector> reference_propagate(const TimeDependentHamiltonian& h_reference,
                                             const std::vector<StateVector>& states, double t0,
                                             double t1, const SolverSettings& settings);

/// |<a|b>|^2 for normalized states.
double state_fidelity(const StateVector& a, const StateVector& b);

}  // namespace kpo
