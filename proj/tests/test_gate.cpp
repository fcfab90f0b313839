#include <doctest.h>

#include <cmath>
#include <numbers>

#include "kposim/gate.hpp"

using namespace kpo;

namespace {

constexpr double kPi = std::numbers::pi;

TwoKpoDevice paper_device() {
  TwoKpoDevice d;
  d.ec1 = d.ec2 = ghz(0.3);
  d.omega1 = ghz(10.0);
  d.omega2 = ghz(11.0);
  d.coupling.g = mhz(10.0);
  return d;
}

RzzSetup simple_setup(int dim = 0) {
  RzzSetup s;
  s.device = paper_device();
  s.fock_dim = dim;
  s.solver.rel_tol = s.solver.abs_tol = 1e-9;
  return s;
}

double kerr() { return mhz(12.0); }

}  // namespace

TEST_CASE("angle wrapping") {
  CHECK(wrap_angle(0.0) == 0.0);
  CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(3 * kPi / 2) == doctest::Approx(-kPi / 2));
  CHECK(wrap_angle(-5 * kPi / 2) == doctest::Approx(-kPi / 2));
  CHECK(wrap_angle(1e-3 + 4 * kPi) == doctest::Approx(1e-3));
}

TEST_CASE("resolved device matches the hand-computed parameter set") {
  const ResolvedDevice rd = resolve_device(paper_device());
  CHECK(rd.kerr == doctest::Approx(kerr()).epsilon(1e-12));
  CHECK(rd.pump == doctest::Approx(4 * kerr()).epsilon(1e-12));
  CHECK(rd.alpha == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(rd.delta12 == doctest::Approx(ghz(-1.0)));
  CHECK(rd.g == doctest::Approx(mhz(10.0)));
  CHECK(to_ghz(rd.ec0) == doctest::Approx(314.0427).epsilon(1e-6));
  CHECK(rd.delta1 == doctest::Approx(0.0192).epsilon(1e-9));

  TwoKpoDevice both = paper_device();
  both.coupling.ec0 = 300.0;
  CHECK_THROWS(resolve_device(both));
}

TEST_CASE("initial state and reference pair") {
  const HilbertSpace s{30, 30};
  const StateVector psi0 = prepare_initial(s, 2.0);
  CHECK(psi0.norm() == doctest::Approx(1.0).epsilon(1e-13));
  // Parity: swapping the two modes leaves the state invariant.
  const Vector& v = psi0.amplitudes();
  double asym = 0.0;
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 30; ++j) asym = std::max(asym, std::abs(v[i * 30 + j] - v[j * 30 + i]));
  CHECK(asym < 1e-15);
  // <psi0|cat_even> from the Gram matrix: N0 (1 + S) with S the even/odd overlap.
  const CatPair cats = cat_pair_states(s, 2.0);
  const double ov = inner_product(cats.even, cats.odd).real();
  CHECK(inner_product(cats.even, psi0).real() ==
        doctest::Approx((1 + ov) / std::sqrt(2 + 2 * ov)).epsilon(1e-12));

  const ReferencePair ortho = orthonormalize({cats.even, cats.odd});
  CHECK(std::abs(inner_product(ortho.even, ortho.odd)) < 1e-14);
  CHECK(ortho.odd.norm() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(inner_product(ortho.even, cats.even) - 1.0) < 1e-14);
}

TEST_CASE("ideal target and angle extraction are self-consistent") {
  const HilbertSpace s{24, 24};
  const CatPair cats = cat_pair_states(s, 2.0);
  const ReferencePair r = orthonormalize({cats.even, cats.odd});
  for (double theta : {0.0, 0.4, kPi / 2, -2.5, kPi}) {
    const StateVector ideal = ideal_target(theta, r.even, r.odd);
    CHECK(ideal.norm() == doctest::Approx(1.0).epsilon(1e-14));
    const GateOutcome o = extract_angle_and_fidelity(ideal, r.even, r.odd);
    CHECK(o.theta == doctest::Approx(wrap_angle(theta)).epsilon(1e-12));
    CHECK(o.fidelity == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(o.leakage) < 1e-12);
    // Global phases drop out.
    const StateVector rotated = cd(std::polar(1.0, 1.234)) * ideal;
    const GateOutcome p = extract_angle_and_fidelity(rotated, r.even, r.odd);
    CHECK(p.theta == doctest::Approx(o.theta).epsilon(1e-12));
    CHECK(p.fidelity == doctest::Approx(o.fidelity).epsilon(1e-12));
    // Mixed-state extraction agrees for a pure density matrix.
    const GateOutcome m = extract_mixed(DensityMatrix::pure(ideal), r.even, r.odd);
    CHECK(m.theta == doctest::Approx(o.theta).epsilon(1e-12));
    CHECK(m.fidelity == doctest::Approx(1.0).epsilon(1e-12));
  }
  // Unequal weights: F = (|a1| + |a2|)^2 / 2 for an orthonormal pair.
  const StateVector skew = StateVector(s, 0.8 * r.even.amplitudes() +
                                              std::polar(0.6, 0.7) * r.odd.amplitudes());
  const GateOutcome o = extract_angle_and_fidelity(skew, r.even, r.odd);
  CHECK(o.fidelity == doctest::Approx(0.98).epsilon(1e-12));
  CHECK(o.theta == doctest::Approx(0.7).epsilon(1e-12));

  const GateOutcome deg = extract_angle_and_fidelity(r.odd, r.even, r.odd);
  CHECK(deg.degenerate);
}

TEST_CASE("mixed fidelity bounds") {
  const HilbertSpace s{3, 3};
  const StateVector psi = coherent_state(s, {cd(0.2), cd(-0.1)});
  CHECK(fidelity_mixed(DensityMatrix::pure(psi), psi) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(fidelity_mixed(DensityMatrix::maximally_mixed(s), psi) == doctest::Approx(1.0 / 9));
}

TEST_CASE("gate-free evolution is the identity in the reference frame") {
  const RzzExperiment exp(simple_setup());
  CHECK(exp.setup().fock_dim == recommended_dim(2.0));
  CHECK(exp.raw_reference_overlap() == doctest::Approx(6.709e-4).epsilon(1e-3));
  const GateOutcome o = exp.run(0.0);
  CHECK(std::abs(o.theta) < 1e-6);
  CHECK(o.fidelity > 1 - 1e-6);
  CHECK_FALSE(o.degenerate);
  // With S the raw even/odd overlap, psi0 projects onto the orthonormalized
  // pair with weights (1 + S) and sqrt(1 - S^2), both divided by sqrt(2 + 2S).
  const double ov = exp.raw_reference_overlap();
  CHECK(std::abs(o.alpha1) == doctest::Approx((1 + ov) / std::sqrt(2 + 2 * ov)).epsilon(1e-6));
  CHECK(std::abs(o.alpha2) ==
        doctest::Approx(std::sqrt(1 - ov * ov) / std::sqrt(2 + 2 * ov)).epsilon(1e-6));

  // Reference states carry the initial-state overlap to within solver error.
  const StateVector psi = exp.final_state(0.0);
  const cd a1 = inner_product(exp.reference().even, psi);
  const cd a2 = inner_product(exp.reference().odd, psi);
  CHECK(std::norm(a1) + std::norm(a2) <= 1.0 + 1e-8);
}

TEST_CASE("rotation angle grows with the gate amplitude") {
  const RzzExperiment exp(simple_setup());
  double prev = -1.0;
  for (double x : {0.5, 1.5, 3.0}) {
    const GateOutcome o = exp.run(x * kerr());
    CHECK(o.theta > prev);
    CHECK(o.fidelity > 0.999);
    prev = o.theta;
  }
}

TEST_CASE("lossless master equation matches the pure gate at small cutoff") {
  RzzSetup setup = simple_setup(10);
  setup.solver.rel_tol = setup.solver.abs_tol = 1e-10;
  const RzzExperiment exp(setup);
  const GateOutcome pure = exp.run(2.0 * kerr());
  const GateOutcome mixed = exp.run(2.0 * kerr(), 1e-14);
  CHECK(mixed.theta == doctest::Approx(pure.theta).epsilon(1e-7));
  CHECK(std::abs(mixed.fidelity - pure.fidelity) < 1e-7);
  CHECK(mixed.diagnostics.min_eigenvalue > -1e-6);
}

TEST_CASE("default tolerances and cutoff are converged") {
  const ConvergenceReport rep = certify_convergence(simple_setup(), 5.0 * kerr());
  CHECK(rep.tolerance_delta < 1e-6);
  CHECK(rep.truncation_delta < 1e-6);
  CHECK(rep.fock_dim == 24);
}

TEST_CASE("pulse tuning hits the requested angle") {
  const RzzExperiment exp(simple_setup());
  const double target = 1.0;
  const double p = tune_pulse_for_angle(exp, target, 0.0, 5.0 * kerr(), 1e-4);
  CHECK(exp.run(p).theta == doctest::Approx(target).epsilon(1e-4));
  CHECK_THROWS(tune_pulse_for_angle(exp, 3.0, 0.0, kerr(), 1e-4));
}
