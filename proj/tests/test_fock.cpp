#include <doctest.h>

#include <cmath>
#include <random>

#include "kposim/fock.hpp"

using namespace kpo;

TEST_CASE("hilbert space validates mode dimensions") {
  CHECK_THROWS_AS(HilbertSpace({1, 4}), std::invalid_argument);
  CHECK_THROWS_AS(HilbertSpace(std::vector<int>{}), std::invalid_argument);
  const HilbertSpace s{3, 5};
  CHECK(s.modes() == 2);
  CHECK(s.total_dim() == 15);
  CHECK(s.dim(1) == 5);
  CHECK_THROWS_AS(s.dim(2), std::out_of_range);
}

TEST_CASE("first mode is the most significant tensor index") {
  const HilbertSpace s{3, 4};
  const std::vector<int> occ{1, 2};
  const StateVector v = StateVector::fock(s, occ);
  CHECK(std::abs(v.amplitudes()[1 * 4 + 2] - cd(1.0)) == 0.0);
  const cd n0 = expectation(number(s, 0), v), n1 = expectation(number(s, 1), v);
  CHECK(n0.real() == doctest::Approx(1.0));
  CHECK(n1.real() == doctest::Approx(2.0));
}

TEST_CASE("truncated commutator is identity except the top level") {
  for (int d : {2, 5, 17}) {
    const HilbertSpace s{d};
    const Matrix c = commutator(annihilation(s, 0), creation(s, 0)).matrix();
    Matrix expected = Matrix::Identity(d, d);
    expected(d - 1, d - 1) = -(d - 1);
    CHECK((c - expected).norm() < 1e-13);
  }
}

TEST_CASE("commutators on different modes vanish") {
  const HilbertSpace s{4, 3};
  const Matrix c = commutator(annihilation(s, 0), creation(s, 1)).matrix();
  CHECK(c.norm() < 1e-14);
}

TEST_CASE("ladder and quadrature operators") {
  const HilbertSpace s{6};
  CHECK(quadrature_x(s, 0).is_hermitian());
  CHECK(quadrature_p(s, 0).is_hermitian());
  CHECK((creation(s, 0).matrix() - annihilation(s, 0).matrix().adjoint()).norm() == 0.0);
  const Matrix n = number(s, 0).matrix();
  for (int k = 0; k < 6; ++k) CHECK(n(k, k).real() == doctest::Approx(k));
  const Matrix a = annihilation_matrix(6);
  CHECK(a(2, 3).real() == doctest::Approx(std::sqrt(3.0)));
}

TEST_CASE("operator arithmetic rejects mismatched spaces") {
  const OperatorMatrix a = number(HilbertSpace{3}, 0);
  const OperatorMatrix b = number(HilbertSpace{4}, 0);
  CHECK_THROWS_AS(a + b, SpaceMismatch);
  CHECK_THROWS_AS(inner_product(StateVector::fock(HilbertSpace{3}, std::vector<int>{0}),
                                StateVector::fock(HilbertSpace{4}, std::vector<int>{0})),
                  SpaceMismatch);
}

TEST_CASE("cosine of the phase operator matches its Taylor series") {
  const HilbertSpace s{12};
  const ChargePhase cp = charge_phase_operators(s, 0, 0.3, 208.3, 5);
  const Matrix phi = cp.phase.matrix() / 5.0;
  const Matrix cosine = operator_function(cp.phase, [](double x) { return std::cos(x / 5.0); }).matrix();
  // Independent oracle: truncated power series of the same matrix.
  Matrix series = Matrix::Identity(12, 12), term = Matrix::Identity(12, 12);
  for (int k = 1; k < 30; ++k) {
    term = (-1.0 * term * phi * phi / double((2 * k - 1) * (2 * k))).eval();
    series += term;
  }
  CHECK((cosine - series).norm() < 1e-12);
}

TEST_CASE("operator function of x^2 is the matrix square") {
  const HilbertSpace s{8};
  const OperatorMatrix x = quadrature_x(s, 0);
  const Matrix sq = operator_function(x, [](double v) { return v * v; }).matrix();
  CHECK((sq - x.matrix() * x.matrix()).norm() < 1e-11);
  CHECK_THROWS(operator_function(annihilation(s, 0), [](double v) { return v; }));
}

TEST_CASE("charge and phase scales follow the transmon expressions") {
  const ChargePhase cp = charge_phase_operators(HilbertSpace{5}, 0, 0.3, 208.3, 5);
  CHECK(cp.charge_scale == doctest::Approx(std::pow(208.3 / (32.0 * 5 * 0.3), 0.25)));
  CHECK(cp.phase_scale == doctest::Approx(std::pow(2.0 * 5 * 0.3 / 208.3, 0.25)));
  CHECK(cp.charge.is_hermitian());
  CHECK_THROWS(charge_phase_operators(HilbertSpace{5}, 0, -1.0, 1.0, 5));
}

TEST_CASE("coherent states match the analytic overlap") {
  const int d = 40;
  const HilbertSpace s{d};
  const cd a(1.3, -0.4), b(-0.7, 0.9);
  const StateVector va = coherent_state(s, {a});
  const StateVector vb = coherent_state(s, {b});
  CHECK(va.norm() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(inner_product(va, vb) - coherent_overlap(a, b)) < 1e-12);
  const cd mean = expectation(annihilation(s, 0), va);
  CHECK(std::abs(mean - a) < 1e-10);
  CHECK(coherent_tail_mass(a, d) < 1e-20);
  CHECK(coherent_tail_mass(cd(3.0), 5) > 0.1);
}

TEST_CASE("recommended cutoff") {
  CHECK(recommended_dim(2.0) == 24);
  CHECK(recommended_dim(0.0) == 10);
}

TEST_CASE("cat pair overlap equals the Gram-matrix prediction") {
  const double alpha = 2.0;
  const HilbertSpace s{30, 30};
  const CatPair cats = cat_pair_states(s, alpha);
  CHECK(cats.even.norm() == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(cats.odd.norm() == doctest::Approx(1.0).epsilon(1e-13));
  const double x = std::exp(-4 * alpha * alpha);
  const double predicted = 2.0 * std::exp(-2 * alpha * alpha) / (1.0 + x);
  CHECK(inner_product(cats.even, cats.odd).real() == doctest::Approx(predicted).epsilon(1e-9));
  CHECK(predicted == doctest::Approx(6.7e-4).epsilon(0.01));
}

TEST_CASE("density matrices") {
  const HilbertSpace s{3, 3};
  const DensityMatrix mixed = DensityMatrix::maximally_mixed(s);
  CHECK(mixed.trace().real() == doctest::Approx(1.0));
  CHECK(mixed.min_eigenvalue() == doctest::Approx(1.0 / 9));
  const StateVector psi = coherent_state(s, {cd(0.3), cd(-0.2)});
  const DensityMatrix pure = DensityMatrix::pure(psi);
  CHECK(pure.hermiticity_error() < 1e-15);
  CHECK(expectation(number(s, 0), pure).real() ==
        doctest::Approx(expectation(number(s, 0), psi).real()));
}

TEST_CASE("tensor products and padding") {
  const HilbertSpace a{3}, b{4};
  const StateVector u = coherent_state(a, {cd(0.5)});
  const StateVector v = coherent_state(b, {cd(-0.3)});
  const StateVector uv = tensor(u, v);
  CHECK(uv.space() == HilbertSpace({3, 4}));
  CHECK(std::abs(uv.amplitudes()[1 * 4 + 2] - u.amplitudes()[1] * v.amplitudes()[2]) < 1e-15);
  const OperatorMatrix n0 = tensor(number(a, 0), OperatorMatrix::identity(b));
  CHECK((n0.matrix() - number(HilbertSpace{3, 4}, 0).matrix()).norm() == 0.0);

  const StateVector padded = pad_to(uv, HilbertSpace{5, 6});
  CHECK(padded.norm() == doctest::Approx(uv.norm()));
  CHECK(std::abs(padded.amplitudes()[2 * 6 + 3] - uv.amplitudes()[2 * 4 + 3]) == 0.0);
  CHECK_THROWS(pad_to(uv, HilbertSpace{2, 6}));
}
