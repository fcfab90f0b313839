#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "kposim/fock.hpp"

namespace kpo {

/// Scalar time dependence of a Hamiltonian term. An empty function means 1.
using Coefficient = std::function<cd(double)>;

struct LocalFactor {
  int mode = 0;
  Matrix matrix;
};

/// c(t) * (A_{m1} x A_{m2} x ...) with identities on the remaining modes.
/// A term without factors is a c-number times the identity.
struct HamiltonianTerm {
  std::vector<LocalFactor> factors;
  Coefficient coeff;
  std::string label;

  cd coefficient(double t) const { return coeff ? coeff(t) : cd(1.0); }
};

/// Sum of time-dependent product terms on a fixed space. Static matrices
/// are stored once; only the scalar coefficients depend on time.
class TimeDependentHamiltonian {
 public:
  TimeDependentHamiltonian() = default;
  explicit TimeDependentHamiltonian(HilbertSpace space) : space_(std::move(space)) {}

  const HilbertSpace& space() const { return space_; }
  const std::vector<HamiltonianTerm>& terms() const { return terms_; }

  TimeDependentHamiltonian& add_local(int mode, Matrix local, Coefficient coeff = {},
                                      std::string label = {});
  TimeDependentHamiltonian& add_product(std::vector<LocalFactor> factors, Coefficient coeff = {},
                                        std::string label = {});
  TimeDependentHamiltonian& add_term(HamiltonianTerm term);

  bool time_independent() const;

  /// Dense H(t).
  OperatorMatrix at(double t) const;

 private:
  HilbertSpace space_;
  std::vector<HamiltonianTerm> terms_;
};

/// Matrix-free y = H(t) x on a row-major tensor whose operator modes are
/// surrounded by `leading` and `trailing` batch dimensions. A state vector
/// uses leading = trailing = 1; H rho for a column-major density matrix of
/// dimension d uses leading = d.
///
/// Holds scratch buffers, so one instance must not be shared between
/// threads. The referenced Hamiltonian must outlive it.
class HamiltonianAction {
 public:
  explicit HamiltonianAction(const TimeDependentHamiltonian& h);

  const HilbertSpace& space() const { return space_; }

  /// y = H(t) x (overwrites y).
  void apply(double t, const cd* x, cd* y, Eigen::Index leading = 1, Eigen::Index trailing = 1);

 private:
  using Sparse = Eigen::SparseMatrix<cd, Eigen::RowMajor>;

  struct Factor {
    Matrix dense;
    Sparse sparse;
    bool use_sparse = false;
  };
  struct ModeGroup {
    int mode = 0;
    bool dense = false;
    std::vector<std::size_t> term_ids;
    std::vector<Matrix> dense_parts;
    std::vector<Eigen::VectorXcd> sparse_values;  // aligned with `sparse_work`
    Matrix dense_work;
    Sparse sparse_work;
  };
  struct Product {
    std::size_t term_id = 0;
    std::vector<std::pair<int, Factor>> factors;
  };

  void apply_factor(int mode, const Factor& f, Eigen::Index leading, Eigen::Index trailing,
                    const cd* x, cd* y, cd scale, bool accumulate) const;
  void apply_dense(int mode, const Matrix& m, Eigen::Index leading, Eigen::Index trailing,
                   const cd* x, cd* y, cd scale, bool accumulate) const;
  void apply_sparse(int mode, const Sparse& m, Eigen::Index leading, Eigen::Index trailing,
                    const cd* x, cd* y, cd scale, bool accumulate) const;

  const TimeDependentHamiltonian* h_;
  HilbertSpace space_;
  std::vector<ModeGroup> groups_;
  std::vector<Product> products_;
  std::vector<std::size_t> scalars_;
  std::vector<cd> coeffs_;
  Vector buf_a_, buf_b_;
};

}  // namespace kpo
