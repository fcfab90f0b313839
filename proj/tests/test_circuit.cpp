#include <doctest.h>

#include <cmath>
#include <numbers>

#include "kposim/circuit.hpp"

using namespace kpo;

namespace {

constexpr double kTheta0 = std::numbers::pi / 4;

KpoParams paper_kpo(double omega_ghz) {
  KpoParams p;
  p.ec = ghz(0.3);
  p.n_squids = 5;
  p.theta0 = kTheta0;
  p.ej = ej_from_omega(ghz(omega_ghz), p.ec, 5, kTheta0);
  return p;
}

}  // namespace

TEST_CASE("unit helpers") {
  CHECK(ghz(1.0) == doctest::Approx(2 * std::numbers::pi));
  CHECK(mhz(1000.0) == doctest::Approx(ghz(1.0)));
  CHECK(to_ghz(ghz(3.7)) == doctest::Approx(3.7));
}

TEST_CASE("parameter set conversions") {
  const KpoParams k1 = paper_kpo(10.0), k2 = paper_kpo(11.0);
  // E_J = N omega^2 / (8 E_C cos theta0) by hand: 5 * 100 / (2.4 * 0.70710678)
  CHECK(to_ghz(k1.ej) == doctest::Approx(500.0 / (2.4 * std::cos(kTheta0))).epsilon(1e-12));
  CHECK(to_ghz(k1.ej) == doctest::Approx(294.628).epsilon(1e-6));
  CHECK(to_ghz(k2.ej_eff()) == doctest::Approx(605.0 / 2.4).epsilon(1e-12));
  CHECK(to_ghz(omega_from_circuit(k1)) == doctest::Approx(10.0).epsilon(1e-12));

  const KerrPump kp = kerr_and_pump(k1, 0.0);
  CHECK(to_ghz(kp.kerr) * 1e3 == doctest::Approx(12.0).epsilon(1e-12));
  CHECK(kp.pump == 0.0);

  const double p = 4.0 * kp.kerr;
  const double delta = delta_for_pump(p, k1);
  CHECK(kerr_and_pump(k1, delta).pump == doctest::Approx(p).epsilon(1e-12));
  // delta = P / (sqrt(E_C E_J_eff / 2N) tan theta0) with E_C E_J_eff = omega^2 N / 8
  const double by_hand = p / std::sqrt(ghz(10.0) * ghz(10.0) / 16.0);
  CHECK(delta == doctest::Approx(by_hand).epsilon(1e-12));
  CHECK(delta == doctest::Approx(0.0192).epsilon(1e-9));
}

TEST_CASE("coupler round trip and limits") {
  const KpoParams k1 = paper_kpo(10.0), k2 = paper_kpo(11.0);
  const double g = mhz(10.0);
  const double ec0 = ec0_from_g(g, k1, k2);
  CHECK(coupling_from_ec0(ec0, k1, k2) == doctest::Approx(g).epsilon(1e-12));
  CHECK(to_ghz(ec0) == doctest::Approx(314.0427).epsilon(1e-6));
  CHECK(to_ghz(charge_coupling_coefficient(ec0, k1, k2)) * 1e3 ==
        doctest::Approx(4.5766).epsilon(1e-4));

  const auto [e1, e2] = renormalized_charging(ec0, k1, k2);
  CHECK(to_ghz(e1) == doctest::Approx(0.29971).epsilon(1e-5));
  CHECK(e1 == doctest::Approx(e2));

  // A vanishing coupling capacitance decouples the modes.
  const double huge = 1e12;
  CHECK(coupling_from_ec0(huge, k1, k2) < 1e-8);
  const auto [l1, l2] = renormalized_charging(huge, k1, k2);
  CHECK(l1 == doctest::Approx(k1.ec).epsilon(1e-9));
  CHECK(l2 == doctest::Approx(k2.ec).epsilon(1e-9));

  CHECK_THROWS(ec0_from_g(1e3, k1, k2));
  CHECK_THROWS(coupling_from_ec0(-1.0, k1, k2));
  CHECK_THROWS(ej_from_omega(1.0, 1.0, 5, 1.6));
}

TEST_CASE("gate envelope") {
  GatePulseParams gp{.p_g0 = 2.0, .t_gate = 40.0, .beta = 3.0};
  CHECK(pulse_envelope(0.0, gp) == 0.0);
  CHECK(pulse_envelope(40.0, gp) == 0.0);
  CHECK(pulse_envelope(-1.0, gp) == 0.0);
  CHECK(pulse_envelope(20.0, gp) == doctest::Approx(2.0).epsilon(1e-14));
  double peak = 0.0;
  for (int k = 0; k <= 4000; ++k) {
    const double t = 40.0 * k / 4000;
    CHECK(pulse_envelope(t, gp) == doctest::Approx(pulse_envelope(40.0 - t, gp)).epsilon(1e-12));
    peak = std::max(peak, pulse_envelope(t, gp));
  }
  CHECK(peak == doctest::Approx(2.0).epsilon(1e-14));

  const KpoParams k1 = paper_kpo(10.0);
  gp.p_g0 = 5.0 * kerr_and_pump(k1, 0).kerr;
  CHECK(delta_g_envelope(20.0, gp, k1) == doctest::Approx(0.024).epsilon(1e-9));
  CHECK_THROWS(GatePulseParams{.p_g0 = 1.0, .t_gate = 0.0}.validate());
}

TEST_CASE("cat states are near eigenstates of the single Kerr mode") {
  const SimpleModelParams sp{.detuning = 0.0, .kerr = 1.0, .pump = 4.0};
  const int dim = 40;
  const Matrix h = build_simple_single(sp, dim).at(0.0).matrix();
  const double alpha = sp.alpha();
  for (double sign : {1.0, -1.0}) {
    const Vector a = coherent_amplitudes(alpha, dim), b = coherent_amplitudes(-alpha, dim);
    const Vector cat = (a + sign * b).normalized();
    const cd e = cat.dot(h * cat);
    CHECK(((h * cat) - e * cat).norm() < 1e-6);
    // Degenerate level P^2/2K
    CHECK(e.real() == doctest::Approx(sp.pump * sp.pump / (2 * sp.kerr)).epsilon(1e-6));
  }
}

TEST_CASE("every builder is Hermitian on a dense time grid") {
  const SimpleModelParams sp{.detuning = mhz(1), .kerr = mhz(12), .pump = mhz(48),
                             .coupling = mhz(10), .delta12 = ghz(-1)};
  const HilbertSpace s{8, 8};
  for (DriveKind kind : {DriveKind::sum, DriveKind::difference}) {
    const GatePulseParams gp{.p_g0 = mhz(60), .t_gate = 40, .beta = 3, .kind = kind};
    CHECK(max_hermiticity_error(build_simple_gate(sp, gp, s), -1, 41, 1200) < 1e-10);
  }
  CHECK(max_hermiticity_error(build_simple_single(sp, 10, [](double t) { return t; }), 0, 2, 1000) <
        1e-10);

  const KpoParams k1 = paper_kpo(10.0), k2 = paper_kpo(11.0);
  CHECK(max_hermiticity_error(build_sc_single(k1, 12, ramped_tone(0.05, 10, ghz(20))), 0, 10,
                              1000) < 1e-10);
  ScTwoConfig cfg;
  cfg.kpo1 = k1;
  cfg.kpo2 = k2;
  cfg.pump1 = {0.0192, ghz(20)};
  cfg.pump2 = {0.0175, ghz(22)};
  cfg.gate = {.p_g0 = mhz(60), .t_gate = 40, .beta = 3};
  cfg.gate_carrier = ghz(21);
  cfg.coupling.g = mhz(10);
  const ScTwoModel m = build_sc_two(cfg, HilbertSpace{6, 6});
  CHECK(max_hermiticity_error(m.hamiltonian, 0, 40, 1000) < 1e-10);
  CHECK(m.implied_g == doctest::Approx(mhz(10)));
}

TEST_CASE("zero pump amplitude leaves the SC mode time independent") {
  const KpoParams k1 = paper_kpo(10.0);
  const TimeDependentHamiltonian h = build_sc_single(k1, 10, ramped_tone(0.0, 100, ghz(20)));
  const Matrix h0 = h.at(0.0).matrix();
  for (double t : {0.3, 7.1, 55.0}) CHECK((h.at(t).matrix() - h0).norm() == 0.0);
}

TEST_CASE("resonance calibration") {
  const HilbertSpace s{10};
  const double w = 3.3;
  const OperatorMatrix harmonic = w * number(s, 0);
  CHECK(calibrate_resonance(harmonic) == doctest::Approx(w).epsilon(1e-12));

  // Pure Kerr: levels -K/2 n(n-1) in the rotating frame, so E1 - E0 = 0.
  const SimpleModelParams kerr_only{.kerr = 1.0};
  const OperatorMatrix kerr = build_simple_single(kerr_only, 10).at(0);
  CHECK(std::abs(calibrate_resonance(kerr)) < 1e-12);

  // Independent oracle: the static circuit spectrum in the charge basis.
  const KpoParams k1 = paper_kpo(10.0);
  const int dim = 40;
  const ScMode mode = make_sc_mode(k1, dim, k1.ec);
  const double w_fock = calibrate_resonance(OperatorMatrix(HilbertSpace{dim}, mode.static_part));
  // The static part equals 4 E_C n^2 - N E_J_eff cos(phi/N) up to a constant;
  // diagonalize it on a phase grid of the array phase with finite differences.
  const int grid = 1200;
  const double n = k1.n_squids, span = 2.0;
  const double h = 2 * span / grid;
  Eigen::MatrixXd op = Eigen::MatrixXd::Zero(grid, grid);
  for (int i = 0; i < grid; ++i) {
    const double phi = -span + h * (i + 0.5);
    op(i, i) = 8.0 * k1.ec / (h * h) - n * k1.ej_eff() * std::cos(phi / n);
    if (i > 0) op(i, i - 1) = op(i - 1, i) = -4.0 * k1.ec / (h * h);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op, Eigen::EigenvaluesOnly);
  const double w_grid = es.eigenvalues()(1) - es.eigenvalues()(0);
  CHECK(w_fock == doctest::Approx(w_grid).epsilon(1e-4));
  CHECK(to_ghz(w_fock) == doctest::Approx(9.9817).epsilon(1e-3));
}
