#include "kposim/hamiltonian.hpp"

#include <algorithm>
#include <vector>
#include <set>

#include <unsupported/Eigen/KroneckerProduct>

namespace kpo {

namespace {

using RowMat = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Matrix kron_chain(const HilbertSpace& space, const std::vector<LocalFactor>& factors) {
  Matrix full = Matrix::Identity(1, 1);
  for (int m = 0; m < space.modes(); ++m) {
    auto it = std::find_if(factors.begin(), factors.end(),
                           [m](const LocalFactor& f) { return f.mode == m; });
    Matrix next;
    if (it == factors.end())
      next = Eigen::kroneckerProduct(full, Matrix::Identity(space.dim(m), space.dim(m)));
    else
      next = Eigen::kroneckerProduct(full, it->matrix);
    full = std::move(next);
  }
  return full;
}

Eigen::Index count_nonzeros(const Matrix& m) {
  Eigen::Index n = 0;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (m(i, j) != cd(0.0)) ++n;
  return n;
}

bool prefer_sparse(const Matrix& m) { return 4 * count_nonzeros(m) <= m.size(); }

}  // namespace

TimeDependentHamiltonian& TimeDependentHamiltonian::add_local(int mode, Matrix local,
                                                              Coefficient coeff,
                                                              std::string label) {
  return add_term({{LocalFactor{mode, std::move(local)}}, std::move(coeff), std::move(label)});
}

TimeDependentHamiltonian& TimeDependentHamiltonian::add_product(std::vector<LocalFactor> factors,
                                                                Coefficient coeff,
                                                                std::string label) {
  return add_term({std::move(factors), std::move(coeff), std::move(label)});
}

TimeDependentHamiltonian& TimeDependentHamiltonian::add_term(HamiltonianTerm term) {
  std::set<int> seen;
  for (const auto& f : term.factors) {
    const int d = space_.dim(f.mode);
    if (f.matrix.rows() != d || f.matrix.cols() != d)
      throw SpaceMismatch("term factor size does not match the mode cutoff");
    if (!seen.insert(f.mode).second)
      throw std::invalid_argument("term has two factors on the same mode");
  }
  terms_.push_back(std::move(term));
  return *this;
}

bool TimeDependentHamiltonian::time_independent() const {
  return std::all_of(terms_.begin(), terms_.end(),
                     [](const HamiltonianTerm& t) { return !t.coeff; });
}

OperatorMatrix TimeDependentHamiltonian::at(double t) const {
  const int d = space_.total_dim();
  Matrix h = Matrix::Zero(d, d);
  for (const auto& term : terms_) h += term.coefficient(t) * kron_chain(space_, term.factors);
  return {space_, std::move(h)};
}

// ---------------------------------------------------------------------------

HamiltonianAction::HamiltonianAction(const TimeDependentHamiltonian& h)
    : h_(&h), space_(h.space()) {
  const auto& terms = h.terms();
  coeffs_.resize(terms.size());

  for (int mode = 0; mode < space_.modes(); ++mode) {
    ModeGroup g;
    g.mode = mode;
    for (std::size_t i = 0; i < terms.size(); ++i)
      if (terms[i].factors.size() == 1 && terms[i].factors[0].mode == mode) g.term_ids.push_back(i);
    if (g.term_ids.empty()) continue;

    const int dim = space_.dim(mode);
    g.dense = std::any_of(g.term_ids.begin(), g.term_ids.end(), [&](std::size_t i) {
      return !prefer_sparse(terms[i].factors[0].matrix);
    });
    if (g.dense) {
      for (auto i : g.term_ids) g.dense_parts.push_back(terms[i].factors[0].matrix);
      g.dense_work = Matrix::Zero(dim, dim);
    } else {
      std::vector<Eigen::Triplet<cd>> pattern;
      for (auto i : g.term_ids) {
        const Matrix& m = terms[i].factors[0].matrix;
        for (int c = 0; c < dim; ++c)
          for (int r = 0; r < dim; ++r)
            if (m(r, c) != cd(0.0)) pattern.emplace_back(r, c, cd(1.0));
      }
      g.sparse_work = Sparse(dim, dim);
      g.sparse_work.setFromTriplets(pattern.begin(), pattern.end());
      g.sparse_work.makeCompressed();
      for (auto i : g.term_ids) {
        const Matrix& m = terms[i].factors[0].matrix;
        Eigen::VectorXcd vals(g.sparse_work.nonZeros());
        Eigen::Index k = 0;
        for (int r = 0; r < dim; ++r)
          for (Sparse::InnerIterator it(g.sparse_work, r); it; ++it) vals(k++) = m(r, it.col());
        g.sparse_values.push_back(std::move(vals));
      }
    }
    groups_.push_back(std::move(g));
  }

  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].factors.empty()) {
      scalars_.push_back(i);
    } else if (terms[i].factors.size() > 1) {
      Product p;
      p.term_id = i;
      for (const auto& lf : terms[i].factors) {
        Factor f;
        f.use_sparse = prefer_sparse(lf.matrix);
        if (f.use_sparse)
          f.sparse = lf.matrix.sparseView();
        else
          f.dense = lf.matrix;
        p.factors.emplace_back(lf.mode, std::move(f));
      }
      products_.push_back(std::move(p));
    }
  }
}

void HamiltonianAction::apply_dense(int mode, const Matrix& m, Eigen::Index leading,
                                    Eigen::Index trailing, const cd* x, cd* y, cd scale,
                                    bool accumulate) const {
  Eigen::Index lead = leading, trail = trailing;
  for (int j = 0; j < mode; ++j) lead *= space_.dim(j);
  for (int j = mode + 1; j < space_.modes(); ++j) trail *= space_.dim(j);
  const Eigen::Index dk = space_.dim(mode);

  if (trail == 1) {
    Eigen::Map<const RowMat> xm(x, lead, dk);
    Eigen::Map<RowMat> ym(y, lead, dk);
    if (accumulate)
      ym.noalias() += scale * xm * m.transpose();
    else
      ym.noalias() = scale * xm * m.transpose();
    return;
  }
  const Eigen::Index block = dk * trail;
  for (Eigen::Index a = 0; a < lead; ++a) {
    Eigen::Map<const RowMat> xm(x + a * block, dk, trail);
    Eigen::Map<RowMat> ym(y + a * block, dk, trail);
    if (accumulate)
      ym.noalias() += scale * m * xm;
    else
      ym.noalias() = scale * m * xm;
  }
}

void HamiltonianAction::apply_sparse(int mode, const Sparse& m, Eigen::Index leading,
                                     Eigen::Index trailing, const cd* x, cd* y, cd scale,
                                     bool accumulate) const {
  Eigen::Index lead = leading, trail = trailing;
  for (int j = 0; j < mode; ++j) lead *= space_.dim(j);
  for (int j = mode + 1; j < space_.modes(); ++j) trail *= space_.dim(j);
  const Eigen::Index dk = space_.dim(mode);
  const Eigen::Index block = dk * trail;

  const auto* cols = m.innerIndexPtr();
  const auto* outer = m.outerIndexPtr();
  const Eigen::Index nnz = m.nonZeros();
  std::vector<double> vr(nnz), vi(nnz);
  for (Eigen::Index k = 0; k < nnz; ++k) {
    const cd v = scale * m.valuePtr()[k];
    vr[k] = v.real();
    vi[k] = v.imag();
  }

  if (trail == 1) {
    for (Eigen::Index a = 0; a < lead; ++a) {
      const cd* xa = x + a * block;
      cd* ya = y + a * block;
      for (Eigen::Index r = 0; r < dk; ++r) {
        double re = 0.0, im = 0.0;
        for (auto k = outer[r]; k < outer[r + 1]; ++k) {
          const double xr = xa[cols[k]].real(), xi = xa[cols[k]].imag();
          re += vr[k] * xr - vi[k] * xi;
          im += vr[k] * xi + vi[k] * xr;
        }
        ya[r] = accumulate ? ya[r] + cd(re, im) : cd(re, im);
      }
    }
    return;
  }

  const Eigen::Index width = 2 * trail;
  for (Eigen::Index a = 0; a < lead; ++a) {
    const double* xa = reinterpret_cast<const double*>(x + a * block);
    double* ya = reinterpret_cast<double*>(y + a * block);
    for (Eigen::Index r = 0; r < dk; ++r) {
      double* __restrict yr = ya + r * width;
      auto k = outer[r];
      const auto k_end = outer[r + 1];
      if (!accumulate) {
        if (k == k_end) {
          std::fill(yr, yr + width, 0.0);
          continue;
        }
        const double* __restrict xc = xa + cols[k] * width;
        const double a_r = vr[k], a_i = vi[k];
        for (Eigen::Index b = 0; b < width; b += 2) {
          yr[b] = a_r * xc[b] - a_i * xc[b + 1];
          yr[b + 1] = a_r * xc[b + 1] + a_i * xc[b];
        }
        ++k;
      }
      for (; k < k_end; ++k) {
        const double* __restrict xc = xa + cols[k] * width;
        const double a_r = vr[k], a_i = vi[k];
        for (Eigen::Index b = 0; b < width; b += 2) {
          yr[b] += a_r * xc[b] - a_i * xc[b + 1];
          yr[b + 1] += a_r * xc[b + 1] + a_i * xc[b];
        }
      }
    }
  }
}

void HamiltonianAction::apply_factor(int mode, const Factor& f, Eigen::Index leading,
                                     Eigen::Index trailing, const cd* x, cd* y, cd scale,
                                     bool accumulate) const {
  if (f.use_sparse)
    apply_sparse(mode, f.sparse, leading, trailing, x, y, scale, accumulate);
  else
    apply_dense(mode, f.dense, leading, trailing, x, y, scale, accumulate);
}

void HamiltonianAction::apply(double t, const cd* x, cd* y, Eigen::Index leading,
                              Eigen::Index trailing) {
  const auto& terms = h_->terms();
  for (std::size_t i = 0; i < terms.size(); ++i) coeffs_[i] = terms[i].coefficient(t);

  const Eigen::Index n = leading * space_.total_dim() * trailing;
  bool written = false;

  for (auto& g : groups_) {
    if (g.dense) {
      g.dense_work.setZero();
      for (std::size_t k = 0; k < g.term_ids.size(); ++k)
        g.dense_work += coeffs_[g.term_ids[k]] * g.dense_parts[k];
      apply_dense(g.mode, g.dense_work, leading, trailing, x, y, 1.0, written);
    } else {
      Eigen::Map<Eigen::VectorXcd> vals(g.sparse_work.valuePtr(), g.sparse_work.nonZeros());
      vals.setZero();
      for (std::size_t k = 0; k < g.term_ids.size(); ++k)
        vals += coeffs_[g.term_ids[k]] * g.sparse_values[k];
      apply_sparse(g.mode, g.sparse_work, leading, trailing, x, y, 1.0, written);
    }
    written = true;
  }

  if (!products_.empty()) {
    if (buf_a_.size() != n) {
      buf_a_.resize(n);
      buf_b_.resize(n);
    }
    for (const auto& p : products_) {
      const cd c = coeffs_[p.term_id];
      const cd* src = x;
      cd* dst = buf_a_.data();
      const std::size_t nf = p.factors.size();
      for (std::size_t k = 0; k + 1 < nf; ++k) {
        apply_factor(p.factors[k].first, p.factors[k].second, leading, trailing, src, dst, 1.0,
                     false);
        src = dst;
        dst = (dst == buf_a_.data()) ? buf_b_.data() : buf_a_.data();
      }
      apply_factor(p.factors[nf - 1].first, p.factors[nf - 1].second, leading, trailing, src, y,
                   c, written);
      written = true;
    }
  }

  Eigen::Map<const Vector> xv(x, n);
  Eigen::Map<Vector> yv(y, n);
  if (!written) yv.setZero();
  for (auto i : scalars_) yv += coeffs_[i] * xv;
}

}  // namespace kpo
