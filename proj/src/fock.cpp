#include "kposim/fock.hpp"

#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

namespace kpo {

HilbertSpace::HilbertSpace(std::vector<int> mode_dims) : dims_(std::move(mode_dims)) {
  if (dims_.empty()) throw std::invalid_argument("HilbertSpace needs at least one mode");
  total_ = 1;
  for (int d : dims_) {
    if (d < 2) throw std::invalid_argument("mode dimension must be >= 2");
    total_ *= d;
  }
}

int HilbertSpace::dim(int mode) const {
  if (mode < 0 || mode >= modes())
    throw std::out_of_range("mode index " + std::to_string(mode) + " out of range");
  return dims_[mode];
}

void require_same_space(const HilbertSpace& a, const HilbertSpace& b, const char* what) {
  if (!(a == b)) throw SpaceMismatch(std::string("space mismatch in ") + what);
}

// ---------------------------------------------------------------------------

OperatorMatrix::OperatorMatrix(HilbertSpace space, Matrix entries)
    : space_(std::move(space)), m_(std::move(entries)) {
  if (m_.rows() != space_.total_dim() || m_.cols() != space_.total_dim())
    throw SpaceMismatch("operator size does not match its space");
}

OperatorMatrix OperatorMatrix::identity(const HilbertSpace& space) {
  return {space, Matrix::Identity(space.total_dim(), space.total_dim())};
}

OperatorMatrix OperatorMatrix::zero(const HilbertSpace& space) {
  return {space, Matrix::Zero(space.total_dim(), space.total_dim())};
}

OperatorMatrix OperatorMatrix::dagger() const { return {space_, m_.adjoint()}; }

double OperatorMatrix::hermiticity_error() const {
  const double scale = m_.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (m_ - m_.adjoint()).cwiseAbs().maxCoeff() / scale;
}

bool OperatorMatrix::is_hermitian(double rel_tol) const { return hermiticity_error() < rel_tol; }

OperatorMatrix& OperatorMatrix::operator+=(const OperatorMatrix& o) {
  require_same_space(space_, o.space_, "operator +");
  m_ += o.m_;
  return *this;
}

OperatorMatrix& OperatorMatrix::operator-=(const OperatorMatrix& o) {
  require_same_space(space_, o.space_, "operator -");
  m_ -= o.m_;
  return *this;
}

OperatorMatrix& OperatorMatrix::operator*=(cd s) {
  m_ *= s;
  return *this;
}

OperatorMatrix operator*(const OperatorMatrix& a, const OperatorMatrix& b) {
  require_same_space(a.space(), b.space(), "operator *");
  return {a.space(), a.matrix() * b.matrix()};
}

OperatorMatrix commutator(const OperatorMatrix& a, const OperatorMatrix& b) {
  return a * b - b * a;
}

// ---------------------------------------------------------------------------

StateVector::StateVector(HilbertSpace space, Vector amplitudes)
    : space_(std::move(space)), v_(std::move(amplitudes)) {
  if (v_.size() != space_.total_dim()) throw SpaceMismatch("state size does not match its space");
}

StateVector StateVector::fock(const HilbertSpace& space, std::span<const int> occupations) {
  if (static_cast<int>(occupations.size()) != space.modes())
    throw std::invalid_argument("one occupation per mode required");
  int index = 0;
  for (int m = 0; m < space.modes(); ++m) {
    if (occupations[m] < 0 || occupations[m] >= space.dim(m))
      throw std::out_of_range("Fock occupation outside truncation");
    index = index * space.dim(m) + occupations[m];
  }
  Vector v = Vector::Zero(space.total_dim());
  v(index) = 1.0;
  return {space, std::move(v)};
}

StateVector StateVector::normalized() const {
  const double n = norm();
  if (n == 0.0) throw std::domain_error("cannot normalize a zero state");
  return {space_, v_ / n};
}

StateVector& StateVector::operator+=(const StateVector& o) {
  require_same_space(space_, o.space_, "state +");
  v_ += o.v_;
  return *this;
}

StateVector& StateVector::operator*=(cd s) {
  v_ *= s;
  return *this;
}

// ---------------------------------------------------------------------------

DensityMatrix::DensityMatrix(HilbertSpace space, Matrix entries)
    : space_(std::move(space)), m_(std::move(entries)) {
  if (m_.rows() != space_.total_dim() || m_.cols() != space_.total_dim())
    throw SpaceMismatch("density matrix size does not match its space");
}

DensityMatrix DensityMatrix::pure(const StateVector& psi) {
  return {psi.space(), psi.amplitudes() * psi.amplitudes().adjoint()};
}

DensityMatrix DensityMatrix::maximally_mixed(const HilbertSpace& space) {
  const int d = space.total_dim();
  return {space, Matrix::Identity(d, d) / static_cast<double>(d)};
}

double DensityMatrix::hermiticity_error() const {
  return (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
}

double DensityMatrix::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m_ + m_.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// ---------------------------------------------------------------------------

Matrix annihilation_matrix(int dim) {
  Matrix a = Matrix::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

OperatorMatrix embed(const HilbertSpace& space, int mode, const Matrix& local) {
  const int d = space.dim(mode);
  if (local.rows() != d || local.cols() != d)
    throw SpaceMismatch("local operator size does not match the mode cutoff");
  Matrix full = Matrix::Identity(1, 1);
  for (int m = 0; m < space.modes(); ++m) {
    const Matrix factor = (m == mode) ? local : Matrix::Identity(space.dim(m), space.dim(m));
    Matrix next = Eigen::kroneckerProduct(full, factor).eval();
    full = std::move(next);
  }
  return {space, std::move(full)};
}

OperatorMatrix annihilation(const HilbertSpace& space, int mode) {
  return embed(space, mode, annihilation_matrix(space.dim(mode)));
}

OperatorMatrix creation(const HilbertSpace& space, int mode) {
  return embed(space, mode, annihilation_matrix(space.dim(mode)).adjoint());
}

OperatorMatrix number(const HilbertSpace& space, int mode) {
  const Matrix a = annihilation_matrix(space.dim(mode));
  return embed(space, mode, a.adjoint() * a);
}

OperatorMatrix quadrature_x(const HilbertSpace& space, int mode) {
  const Matrix a = annihilation_matrix(space.dim(mode));
  return embed(space, mode, a.adjoint() + a);
}

OperatorMatrix quadrature_p(const HilbertSpace& space, int mode) {
  const Matrix a = annihilation_matrix(space.dim(mode));
  return embed(space, mode, cd(0, 1) * (a.adjoint() - a));
}

ChargePhase charge_phase_operators(const HilbertSpace& space, int mode, double ec, double ej_eff,
                                   int n_squids) {
  if (!(ec > 0.0) || !(ej_eff > 0.0)) throw std::invalid_argument("E_C and E_J must be positive");
  if (n_squids < 1) throw std::invalid_argument("SQUID count must be >= 1");
  const double n = n_squids;
  ChargePhase cp;
  cp.charge_scale = std::pow(ej_eff / (32.0 * n * ec), 0.25);
  cp.phase_scale = std::pow(2.0 * n * ec / ej_eff, 0.25);
  cp.charge = quadrature_p(space, mode) * cd(cp.charge_scale);
  cp.phase = quadrature_x(space, mode) * cd(cp.phase_scale);
  return cp;
}

Matrix hermitian_function(const Matrix& m, const std::function<double(double)>& f,
                          double herm_tol) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > herm_tol * scale)
    throw std::invalid_argument("operator_function requires a Hermitian operator");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.adjoint()));
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  Eigen::VectorXd fl = es.eigenvalues().unaryExpr(f);
  const Matrix& u = es.eigenvectors();
  return u * fl.asDiagonal() * u.adjoint();
}

OperatorMatrix operator_function(const OperatorMatrix& op, const std::function<double(double)>& f,
                                 double herm_tol) {
  return {op.space(), hermitian_function(op.matrix(), f, herm_tol)};
}

// ---------------------------------------------------------------------------

double coherent_tail_mass(cd alpha, int dim) {
  const double x = std::norm(alpha);
  double term = std::exp(-x);
  double kept = 0.0;
  for (int n = 0; n < dim; ++n) {
    kept += term;
    term *= x / (n + 1);
  }
  return std::max(0.0, 1.0 - kept);
}

int recommended_dim(double alpha_abs) {
  return static_cast<int>(std::ceil(alpha_abs * alpha_abs + 5.0 * alpha_abs + 10.0));
}

Vector coherent_amplitudes(cd alpha, int dim) {
  Vector v(dim);
  cd c = std::exp(-0.5 * std::norm(alpha));
  for (int n = 0; n < dim; ++n) {
    v(n) = c;
    c *= alpha / std::sqrt(static_cast<double>(n + 1));
  }
  v.normalize();
  return v;
}

StateVector coherent_state(const HilbertSpace& space, std::span<const cd> alphas) {
  if (static_cast<int>(alphas.size()) != space.modes())
    throw std::invalid_argument("one coherent amplitude per mode required");
  Vector full = Vector::Ones(1);
  for (int m = 0; m < space.modes(); ++m) {
    Vector next = Eigen::kroneckerProduct(full, coherent_amplitudes(alphas[m], space.dim(m))).eval();
    full = std::move(next);
  }
  return {space, std::move(full)};
}

StateVector coherent_state(const HilbertSpace& space, std::initializer_list<cd> alphas) {
  return coherent_state(space, std::span<const cd>(alphas.begin(), alphas.size()));
}

cd coherent_overlap(cd alpha, cd beta) {
  return std::exp(-0.5 * std::norm(alpha) - 0.5 * std::norm(beta) + std::conj(alpha) * beta);
}

CatPair cat_pair_states(const HilbertSpace& space, double alpha) {
  if (space.modes() != 2) throw std::invalid_argument("cat pair needs a two-mode space");
  const std::array<StateVector, 4> comp = {
      coherent_state(space, {alpha, alpha}), coherent_state(space, {-alpha, -alpha}),
      coherent_state(space, {alpha, -alpha}), coherent_state(space, {-alpha, alpha})};

  Eigen::Matrix4cd gram;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) gram(i, j) = comp[i].amplitudes().dot(comp[j].amplitudes());

  auto combine = [&](int i, int j) {
    Eigen::Vector4cd c = Eigen::Vector4cd::Zero();
    c(i) = 1.0;
    c(j) = 1.0;
    const double n2 = (c.adjoint() * gram * c)(0).real();
    Vector v = (comp[i].amplitudes() + comp[j].amplitudes()) / std::sqrt(n2);
    return StateVector(space, std::move(v));
  };

  CatPair out{combine(0, 1), combine(2, 3), 0.0};
  out.tail_mass = std::max(coherent_tail_mass(alpha, space.dim(0)),
                           coherent_tail_mass(alpha, space.dim(1)));
  return out;
}

// ---------------------------------------------------------------------------

HilbertSpace tensor(const HilbertSpace& a, const HilbertSpace& b) {
  std::vector<int> dims(a.dims().begin(), a.dims().end());
  dims.insert(dims.end(), b.dims().begin(), b.dims().end());
  return HilbertSpace(std::move(dims));
}

OperatorMatrix tensor(const OperatorMatrix& a, const OperatorMatrix& b) {
  return {tensor(a.space(), b.space()), Eigen::kroneckerProduct(a.matrix(), b.matrix()).eval()};
}

StateVector tensor(const StateVector& a, const StateVector& b) {
  return {tensor(a.space(), b.space()),
          Eigen::kroneckerProduct(a.amplitudes(), b.amplitudes()).eval()};
}

cd inner_product(const StateVector& bra, const StateVector& ket) {
  require_same_space(bra.space(), ket.space(), "inner_product");
  return bra.amplitudes().dot(ket.amplitudes());
}

cd expectation(const OperatorMatrix& op, const StateVector& psi) {
  require_same_space(op.space(), psi.space(), "expectation");
  return psi.amplitudes().dot(op.matrix() * psi.amplitudes());
}

cd expectation(const OperatorMatrix& op, const DensityMatrix& rho) {
  require_same_space(op.space(), rho.space(), "expectation");
  return (op.matrix() * rho.matrix()).trace();
}

OperatorMatrix dagger(const OperatorMatrix& op) { return op.dagger(); }

StateVector pad_to(const StateVector& psi, const HilbertSpace& larger) {
  const HilbertSpace& small = psi.space();
  if (small.modes() != larger.modes()) throw SpaceMismatch("pad_to: mode count differs");
  for (int m = 0; m < small.modes(); ++m)
    if (small.dim(m) > larger.dim(m)) throw SpaceMismatch("pad_to: target cutoff is smaller");
  Vector out = Vector::Zero(larger.total_dim());
  std::vector<int> idx(small.modes(), 0);
  for (int flat = 0; flat < small.total_dim(); ++flat) {
    int rem = flat;
    for (int m = small.modes() - 1; m >= 0; --m) {
      idx[m] = rem % small.dim(m);
      rem /= small.dim(m);
    }
    int target = 0;
    for (int m = 0; m < small.modes(); ++m) target = target * larger.dim(m) + idx[m];
    out(target) = psi.amplitudes()(flat);
  }
  return {larger, std::move(out)};
}

}  // namespace kpo
