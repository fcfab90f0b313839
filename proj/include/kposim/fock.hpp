#pragma once

#include <complex>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace kpo {

using cd = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

/// Thrown when two objects living on different Hilbert spaces are combined.
class SpaceMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Truncated multi-mode Fock space. Mode 0 is the most significant index in
/// the Kronecker ordering, i.e. |n0, n1> sits at n0 * D1 + n1.
class HilbertSpace {
 public:
  HilbertSpace() = default;
  explicit HilbertSpace(std::vector<int> mode_dims);
  HilbertSpace(std::initializer_list<int> mode_dims)
      : HilbertSpace(std::vector<int>(mode_dims)) {}

  int modes() const { return static_cast<int>(dims_.size()); }
  int dim(int mode) const;
  int total_dim() const { return total_; }
  std::span<const int> dims() const { return dims_; }

  bool operator==(const HilbertSpace&) const = default;

 private:
  std::vector<int> dims_;
  int total_ = 0;
};

void require_same_space(const HilbertSpace& a, const HilbertSpace& b, const char* what);

/// Dense operator on a HilbertSpace.
class OperatorMatrix {
 public:
  OperatorMatrix() = default;
  OperatorMatrix(HilbertSpace space, Matrix entries);

  static OperatorMatrix identity(const HilbertSpace& space);
  static OperatorMatrix zero(const HilbertSpace& space);

  const HilbertSpace& space() const { return space_; }
  const Matrix& matrix() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }

  OperatorMatrix dagger() const;
  /// max |M - M^dagger| relative to max |M| (0 for the zero matrix).
  double hermiticity_error() const;
  bool is_hermitian(double rel_tol = 1e-12) const;

  OperatorMatrix& operator+=(const OperatorMatrix& o);
  OperatorMatrix& operator-=(const OperatorMatrix& o);
  OperatorMatrix& operator*=(cd s);

  friend OperatorMatrix operator+(OperatorMatrix a, const OperatorMatrix& b) { return a += b; }
  friend OperatorMatrix operator-(OperatorMatrix a, const OperatorMatrix& b) { return a -= b; }
  friend OperatorMatrix operator*(OperatorMatrix a, cd s) { return a *= s; }
  friend OperatorMatrix operator*(cd s, OperatorMatrix a) { return a *= s; }
  friend OperatorMatrix operator*(const OperatorMatrix& a, const OperatorMatrix& b);

 private:
  HilbertSpace space_;
  Matrix m_;
};

OperatorMatrix commutator(const OperatorMatrix& a, const OperatorMatrix& b);

class StateVector {
 public:
  StateVector() = default;
  StateVector(HilbertSpace space, Vector amplitudes);

  /// Fock basis state |n_0, n_1, ...>.
  static StateVector fock(const HilbertSpace& space, std::span<const int> occupations);

  const HilbertSpace& space() const { return space_; }
  const Vector& amplitudes() const { return v_; }
  Vector& amplitudes() { return v_; }
  int dim() const { return static_cast<int>(v_.size()); }

  double norm() const { return v_.norm(); }
  StateVector normalized() const;

  StateVector& operator+=(const StateVector& o);
  StateVector& operator*=(cd s);
  friend StateVector operator+(StateVector a, const StateVector& b) { return a += b; }
  friend StateVector operator*(cd s, StateVector a) { return a *= s; }

 private:
  HilbertSpace space_;
  Vector v_;
};

class DensityMatrix {
 public:
  DensityMatrix() = default;
  DensityMatrix(HilbertSpace space, Matrix entries);

  /// |psi><psi|
  static DensityMatrix pure(const StateVector& psi);
  static DensityMatrix maximally_mixed(const HilbertSpace& space);

  const HilbertSpace& space() const { return space_; }
  const Matrix& matrix() const { return m_; }
  Matrix& matrix() { return m_; }

  cd trace() const { return m_.trace(); }
  double hermiticity_error() const;
  double min_eigenvalue() const;

 private:
  HilbertSpace space_;
  Matrix m_;
};

// Ladder and quadrature operators. All are embedded into the full space via
// Kronecker products with identities on the other modes.

/// Single-mode annihilation matrix of size dim x dim: <n-1|a|n> = sqrt(n).
Matrix annihilation_matrix(int dim);

OperatorMatrix annihilation(const HilbertSpace& space, int mode);
OperatorMatrix creation(const HilbertSpace& space, int mode);
OperatorMatrix number(const HilbertSpace& space, int mode);
/// a^dagger + a
OperatorMatrix quadrature_x(const HilbertSpace& space, int mode);
/// i (a^dagger - a)
OperatorMatrix quadrature_p(const HilbertSpace& space, int mode);

/// Lift a single-mode matrix acting on `mode` into the full space.
OperatorMatrix embed(const HilbertSpace& space, int mode, const Matrix& local);

struct ChargePhase {
  OperatorMatrix charge;  // Cooper-pair number n
  OperatorMatrix phase;   // phase difference phi
  double charge_scale = 0.0;
  double phase_scale = 0.0;
};

/// Charge-number and phase operators of a SQUID-array transmon written in
/// terms of the mode's ladder operators:
///   n   = i (EJ/(32 N EC))^(1/4) (a^dagger - a)
///   phi =   (2 N EC/EJ)^(1/4)   (a^dagger + a)
/// Any consistent energy unit works for ec and ej_eff.
ChargePhase charge_phase_operators(const HilbertSpace& space, int mode, double ec, double ej_eff,
                                   int n_squids);

/// f(op) for Hermitian op, through its eigendecomposition.
OperatorMatrix operator_function(const OperatorMatrix& op, const std::function<double(double)>& f,
                                 double herm_tol = 1e-10);
/// Same on a bare Hermitian matrix (used for single-mode factors).
Matrix hermitian_function(const Matrix& m, const std::function<double(double)>& f,
                          double herm_tol = 1e-10);

/// Probability weight of a coherent state |alpha> beyond Fock level dim-1.
double coherent_tail_mass(cd alpha, int dim);

/// Recommended per-mode cutoff |alpha|^2 + 5|alpha| + 10.
int recommended_dim(double alpha_abs);

/// Single-mode truncated coherent state, renormalized.
Vector coherent_amplitudes(cd alpha, int dim);

/// Product coherent state with one amplitude per mode.
StateVector coherent_state(const HilbertSpace& space, std::span<const cd> alphas);
StateVector coherent_state(const HilbertSpace& space, std::initializer_list<cd> alphas);

struct CatPair {
  StateVector even;  // ~ |a,a> + |-a,-a>
  StateVector odd;   // ~ |a,-a> + |-a,a>
  double tail_mass = 0.0;
};

/// Two-mode cat-pair states for a real amplitude alpha.
CatPair cat_pair_states(const HilbertSpace& space, double alpha);

/// Analytic overlap <alpha|beta> of untruncated coherent states.
cd coherent_overlap(cd alpha, cd beta);

OperatorMatrix tensor(const OperatorMatrix& a, const OperatorMatrix& b);
HilbertSpace tensor(const HilbertSpace& a, const HilbertSpace& b);
StateVector tensor(const StateVector& a, const StateVector& b);

cd inner_product(const StateVector& bra, const StateVector& ket);
cd expectation(const OperatorMatrix& op, const StateVector& psi);
cd expectation(const OperatorMatrix& op, const DensityMatrix& rho);
OperatorMatrix dagger(const OperatorMatrix& op);

/// Embed a state into a space with larger per-mode cutoffs (zero padding).
StateVector pad_to(const StateVector& psi, const HilbertSpace& larger);

}  // namespace kpo
