#include <doctest.h>

#include <random>

#include <unsupported/Eigen/KroneckerProduct>

#include "kposim/hamiltonian.hpp"

using namespace kpo;

namespace {

Matrix random_matrix(int n, std::mt19937& rng) {
  std::normal_distribution<double> g;
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = cd(g(rng), g(rng));
  return m;
}

Vector random_vector(Eigen::Index n, std::mt19937& rng) {
  std::normal_distribution<double> g;
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = cd(g(rng), g(rng));
  return v;
}

TimeDependentHamiltonian mixed_hamiltonian(std::mt19937& rng) {
  const HilbertSpace s{4, 3, 5};
  TimeDependentHamiltonian h(s);
  const Matrix a4 = annihilation_matrix(4), a3 = annihilation_matrix(3), a5 = annihilation_matrix(5);
  h.add_local(0, a4.adjoint() * a4);                                                  // sparse
  h.add_local(0, a4 * a4, [](double t) { return std::exp(cd(0.0, 2.0 * t)); });         // sparse
  h.add_local(1, random_matrix(3, rng), [](double t) { return cd(std::cos(t)); });      // dense
  h.add_local(2, a5 + a5.adjoint());
  h.add_product({{0, a4}, {2, a5.adjoint()}}, [](double t) { return cd(0.5, t); });
  h.add_product({{1, random_matrix(3, rng)}, {2, random_matrix(5, rng)}});
  h.add_product({}, [](double t) { return cd(t, -1.0); });  // c-number
  (void)a3;
  return h;
}

}  // namespace

TEST_CASE("structured action equals the dense Hamiltonian") {
  std::mt19937 rng(7);
  const TimeDependentHamiltonian h = mixed_hamiltonian(rng);
  HamiltonianAction action(h);
  const Eigen::Index d = h.space().total_dim();
  for (double t : {0.0, 0.37, 2.5}) {
    const Vector x = random_vector(d, rng);
    Vector y(d);
    action.apply(t, x.data(), y.data());
    const Vector ref = h.at(t).matrix() * x;
    CHECK((y - ref).norm() < 1e-12 * ref.norm());
  }
}

TEST_CASE("structured action with batch dimensions") {
  std::mt19937 rng(11);
  const TimeDependentHamiltonian h = mixed_hamiltonian(rng);
  HamiltonianAction action(h);
  const Eigen::Index d = h.space().total_dim();
  const Eigen::Index lead = 3, trail = 2;
  const Matrix full = Eigen::kroneckerProduct(
      Matrix::Identity(lead, lead),
      Eigen::kroneckerProduct(h.at(0.8).matrix(), Matrix::Identity(trail, trail)).eval());
  const Vector x = random_vector(lead * d * trail, rng);
  Vector y(x.size());
  action.apply(0.8, x.data(), y.data(), lead, trail);
  const Vector ref = full * x;
  CHECK((y - ref).norm() < 1e-12 * ref.norm());
}

TEST_CASE("terms are validated") {
  TimeDependentHamiltonian h(HilbertSpace{3, 4});
  CHECK_THROWS(h.add_local(0, Matrix::Identity(4, 4)));
  CHECK_THROWS(h.add_local(2, Matrix::Identity(3, 3)));
  CHECK_THROWS(h.add_product({{0, Matrix::Identity(3, 3)}, {0, Matrix::Identity(3, 3)}}));
  h.add_local(1, Matrix::Identity(4, 4));
  CHECK(h.time_independent());
  h.add_local(0, Matrix::Identity(3, 3), [](double t) { return cd(t); });
  CHECK_FALSE(h.time_independent());
}

TEST_CASE("empty Hamiltonian acts as zero") {
  TimeDependentHamiltonian h(HilbertSpace{3});
  HamiltonianAction action(h);
  const Vector x = Vector::Ones(3);
  Vector y = Vector::Constant(3, cd(5.0));
  action.apply(0.0, x.data(), y.data());
  CHECK(y.norm() == 0.0);
}
