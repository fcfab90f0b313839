#include <doctest.h>

#include <cmath>
#include <limits>

#include "kposim/circuit.hpp"
#include "kposim/dynamics.hpp"

using namespace kpo;

namespace {

SolverSettings tight(double tol = 1e-10) {
  SolverSettings s;
  s.rel_tol = s.abs_tol = tol;
  s.samples = 11;
  return s;
}

TimeDependentHamiltonian harmonic(double w, int dim) {
  TimeDependentHamiltonian h(HilbertSpace{dim});
  h.add_local(0, w * number(HilbertSpace{dim}, 0).matrix());
  return h;
}

}  // namespace

TEST_CASE("coherent state in a harmonic oscillator rotates at the mode frequency") {
  const double w = 2.0, period = kTwoPi / w;
  const int dim = 30;
  const cd alpha(1.5, 0.2);
  const TimeDependentHamiltonian h = harmonic(w, dim);
  const StateVector psi0 = coherent_state(HilbertSpace{dim}, {alpha});
  const OperatorMatrix a = annihilation(HilbertSpace{dim}, 0);
  for (int k : {1, 4, 10}) {
    const double t = k * period + 0.3;
    const auto out = schrodinger_propagate(h, psi0, 0.0, t, tight());
    const cd expected = alpha * std::exp(cd(0, -w * t));
    CHECK(std::abs(expectation(a, out.state) - expected) < 1e-7);
  }
}

TEST_CASE("zero Hamiltonian leaves the state unchanged") {
  const HilbertSpace s{4, 3};
  TimeDependentHamiltonian h(s);
  const StateVector psi = coherent_state(s, {cd(0.4), cd(0.0, 0.3)});
  const auto out = schrodinger_propagate(h, psi, 0.0, 5.0, tight());
  CHECK((out.state.amplitudes() - psi.amplitudes()).norm() < 1e-14);
}

TEST_CASE("energy and norm are conserved for a static Hamiltonian") {
  const SimpleModelParams sp{.detuning = 0.3, .kerr = 1.0, .pump = 2.0};
  const TimeDependentHamiltonian h = build_simple_single(sp, 20);
  const OperatorMatrix hm = h.at(0);
  const StateVector psi0 = coherent_state(HilbertSpace{20}, {cd(0.8, -0.5)});
  const auto out = schrodinger_propagate(h, psi0, 0.0, 8.0, tight(1e-12));
  CHECK(expectation(hm, out.state).real() ==
        doctest::Approx(expectation(hm, psi0).real()).epsilon(1e-8));
  for (double n : out.trajectory.norm) CHECK(n == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(out.trajectory.times.size() == 11);
  CHECK(out.trajectory.photons.size() == 1);
}

TEST_CASE("damped coherent state follows exponential photon decay") {
  const int dim = 14;
  const double gamma = 0.35, w = 1.0;
  const TimeDependentHamiltonian h = harmonic(w, dim);
  const StateVector psi0 = coherent_state(HilbertSpace{dim}, {cd(1.2)});
  SolverSettings s = tight();
  const auto out = lindblad_propagate(h, psi0, gamma, 0.0, 4.0, s);
  const double n0 = 1.44 * 1.0;
  for (std::size_t k = 0; k < out.trajectory.times.size(); ++k) {
    const double t = out.trajectory.times[k];
    CHECK(out.trajectory.photons[0][k] == doctest::Approx(n0 * std::exp(-gamma * t)).epsilon(1e-6));
    CHECK(out.trajectory.norm[k] == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK(out.state.hermiticity_error() < 1e-12);
  CHECK(out.state.min_eigenvalue() > -1e-9);
}

TEST_CASE("lossless master equation reproduces the pure evolution") {
  const SimpleModelParams sp{.detuning = 0.0, .kerr = 1.0, .pump = 1.0, .coupling = 0.2,
                             .delta12 = -3.0};
  const HilbertSpace s{6, 6};
  const GatePulseParams gp{.p_g0 = 0.8, .t_gate = 3.0, .beta = 3.0};
  const TimeDependentHamiltonian h = build_simple_gate(sp, gp, s);
  const StateVector psi0 = coherent_state(s, {cd(0.7), cd(-0.4)});
  const auto pure = schrodinger_propagate(h, psi0, 0.0, 3.0, tight(1e-11));
  const auto mixed = lindblad_propagate(h, psi0, 0.0, 0.0, 3.0, tight(1e-11));
  const Matrix rho = pure.state.amplitudes() * pure.state.amplitudes().adjoint();
  CHECK((mixed.state.matrix() - rho).norm() < 1e-8);
}

TEST_CASE("fixed-step rk4 agrees with adaptive dopri5") {
  const TimeDependentHamiltonian h = harmonic(1.3, 12);
  const StateVector psi0 = coherent_state(HilbertSpace{12}, {cd(0.9)});
  SolverSettings rk = tight();
  rk.method = Method::rk4;
  rk.initial_step = 5e-4;
  const auto a = schrodinger_propagate(h, psi0, 0.0, 2.0, rk);
  const auto b = schrodinger_propagate(h, psi0, 0.0, 2.0, tight(1e-12));
  Vector exact = psi0.amplitudes();
  for (int n = 0; n < 12; ++n) exact[n] *= std::exp(cd(0, -1.3 * n * 2.0));
  CHECK((a.state.amplitudes() - exact).norm() < 1e-9);
  CHECK((b.state.amplitudes() - exact).norm() < 1e-9);
  CHECK(method_from_string(to_string(Method::rk4)) == Method::rk4);
  CHECK_THROWS(method_from_string("euler"));
}

TEST_CASE("static-frame integration matches the lab frame") {
  KpoParams k;
  k.ec = 0.3;
  k.n_squids = 5;
  k.theta0 = std::numbers::pi / 4;
  k.ej = ej_from_omega(2.0, k.ec, 5, k.theta0);
  const TimeDependentHamiltonian h = build_sc_single(k, 12, ramped_tone(0.05, 20.0, 4.0));
  const StateVector psi0 = coherent_state(HilbertSpace{12}, {cd(0.5)});
  SolverSettings lab = tight(1e-11), frame = tight(1e-11);
  frame.static_frame = true;
  const auto a = schrodinger_propagate(h, psi0, 0.0, 20.0, lab);
  const auto b = schrodinger_propagate(h, psi0, 0.0, 20.0, frame);
  CHECK(1.0 - state_fidelity(a.state, b.state) < 1e-9);
  for (std::size_t k2 = 0; k2 < a.trajectory.times.size(); ++k2)
    CHECK(a.trajectory.photons[0][k2] == doctest::Approx(b.trajectory.photons[0][k2]).epsilon(1e-7));
}

TEST_CASE("propagation is deterministic") {
  const SimpleModelParams sp{.kerr = 1.0, .pump = 2.0};
  const TimeDependentHamiltonian h = build_simple_single(sp, 15);
  const StateVector psi0 = coherent_state(HilbertSpace{15}, {cd(0.3)});
  const auto a = schrodinger_propagate(h, psi0, 0.0, 3.0, tight());
  const auto b = schrodinger_propagate(h, psi0, 0.0, 3.0, tight());
  CHECK((a.state.amplitudes() - b.state.amplitudes()).norm() == 0.0);
  CHECK(a.trajectory.stats.accepted == b.trajectory.stats.accepted);
}

TEST_CASE("reference propagation is linear") {
  const SimpleModelParams sp{.kerr = 1.0, .pump = 1.5, .coupling = 0.1, .delta12 = -2.0};
  const HilbertSpace s{5, 5};
  const TimeDependentHamiltonian h = build_simple_two(sp, {.p_g0 = 0.0, .t_gate = 2.0}, s);
  const StateVector u = coherent_state(s, {cd(0.5), cd(0.2)});
  const StateVector v = coherent_state(s, {cd(-0.3), cd(0.6)});
  const cd c(0.3, -0.7);
  const auto out = reference_propagate(h, {u, v, u + c * v}, 0.0, 2.0, tight(1e-11));
  const Vector lin = out[0].amplitudes() + c * out[1].amplitudes();
  CHECK((out[2].amplitudes() - lin).norm() < 1e-9);
}

TEST_CASE("solver failures are reported as typed errors") {
  const TimeDependentHamiltonian h = harmonic(1.0, 6);
  const StateVector psi0 = coherent_state(HilbertSpace{6}, {cd(0.5)});
  SolverSettings s = tight();
  s.max_steps = 5;
  CHECK_THROWS_AS(schrodinger_propagate(h, psi0, 0.0, 100.0, s), ConvergenceError);

  TimeDependentHamiltonian bad(HilbertSpace{6});
  bad.add_local(0, Matrix::Identity(6, 6), [](double t) {
    return t > 0.5 ? cd(std::numeric_limits<double>::quiet_NaN()) : cd(1.0);
  });
  CHECK_THROWS_AS(schrodinger_propagate(bad, psi0, 0.0, 1.0, tight()), NumericalError);

  SolverSettings invalid;
  invalid.rel_tol = 0.5;
  CHECK_THROWS_AS(schrodinger_propagate(h, psi0, 0.0, 1.0, invalid), std::invalid_argument);
  CHECK_THROWS_AS(lindblad_propagate(h, psi0, -1.0, 0.0, 1.0, tight()), std::invalid_argument);
}

TEST_CASE("sample grid") {
  const auto g = sample_grid(1.0, 2.0, 5);
  CHECK(g.size() == 5);
  CHECK(g.front() == 1.0);
  CHECK(g.back() == 2.0);
  CHECK(g[2] == doctest::Approx(1.5));
}
