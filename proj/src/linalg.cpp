#include "enkfmc/linalg.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace enkfmc {

SparseUnitLowerTriangular::SparseUnitLowerTriangular(Index dim)
    : dim_(dim), rows_(static_cast<std::size_t>(dim)) {
  if (dim < 0) throw std::invalid_argument("triangular dim must be nonnegative");
}

SparseUnitLowerTriangular::SparseUnitLowerTriangular(
    Index dim, std::vector<std::vector<TriEntry>> rows)
    : dim_(dim), rows_(std::move(rows)) {
  if (dim < 0) throw std::invalid_argument("triangular dim must be nonnegative");
  if (rows_.size() != static_cast<std::size_t>(dim))
    throw std::invalid_argument("row count does not match dim");
  for (Index i = 0; i < dim_; ++i) {
    Index prev = -1;
    for (const TriEntry& e : rows_[static_cast<std::size_t>(i)]) {
      if (e.col <= prev)
        throw std::invalid_argument("row entries must be sorted with no duplicates");
      if (e.col >= i)
        throw std::invalid_argument("entry on or above the diagonal in row " +
                                    std::to_string(i));
      if (!std::isfinite(e.value))
        throw std::invalid_argument("non-finite triangular entry");
      prev = e.col;
    }
  }
}

Index SparseUnitLowerTriangular::nnz() const {
  Index n = 0;
  for (const auto& r : rows_) n += static_cast<Index>(r.size());
  return n;
}

Vector SparseUnitLowerTriangular::solve(const Vector& b) const {
  if (b.size() != dim_) throw std::invalid_argument("solve: dimension mismatch");
  Vector x(dim_);
  for (Index i = 0; i < dim_; ++i) {
    double s = b[i];
    for (const TriEntry& e : rows_[static_cast<std::size_t>(i)]) s -= e.value * x[e.col];
    x[i] = s;  // unit diagonal
  }
  return x;
}

Vector SparseUnitLowerTriangular::transpose_solve(const Vector& b) const {
  if (b.size() != dim_)
    throw std::invalid_argument("transpose_solve: dimension mismatch");
  // Column sweep: once x[r] is final, scatter its contribution to the
  // earlier components referenced by row r.
  Vector x = b;
  for (Index r = dim_ - 1; r >= 0; --r) {
    const double xr = x[r];
    for (const TriEntry& e : rows_[static_cast<std::size_t>(r)]) x[e.col] -= e.value * xr;
  }
  return x;
}

Matrix SparseUnitLowerTriangular::dense() const {
  Matrix m = Matrix::Identity(dim_, dim_);
  for (Index i = 0; i < dim_; ++i)
    for (const TriEntry& e : rows_[static_cast<std::size_t>(i)]) m(i, e.col) = e.value;
  return m;
}

PositiveDiagonal::PositiveDiagonal(Vector values) : values_(std::move(values)) {
  for (Index i = 0; i < values_.size(); ++i)
    if (!(values_[i] > 0.0) || !std::isfinite(values_[i]))
      throw std::invalid_argument("diagonal entries must be strictly positive and finite");
}

Matrix CholeskyFactors::dense() const {
  const Matrix t = T.dense();
  return t.transpose() * D.values().cwiseInverse().asDiagonal() * t;
}

EnsembleMatrix::EnsembleMatrix(Matrix members) : members_(std::move(members)) {
  if (members_.cols() < 2)
    throw std::invalid_argument("ensemble needs at least 2 members");
  if (!members_.allFinite())
    throw std::invalid_argument("ensemble members must be finite");
}

Vector ensemble_mean(const EnsembleMatrix& ens) {
  return ens.members().rowwise().mean();
}

Matrix deviations(const EnsembleMatrix& ens) {
  return ens.members().colwise() - ensemble_mean(ens);
}

Matrix sample_covariance(const EnsembleMatrix& ens) {
  const Matrix u = deviations(ens);
  return (u * u.transpose()) / static_cast<double>(ens.nens() - 1);
}

Vector unit_lower_solve(const SparseUnitLowerTriangular& T, const Vector& b) {
  return T.solve(b);
}

Vector unit_lower_transpose_solve(const SparseUnitLowerTriangular& T, const Vector& b) {
  return T.transpose_solve(b);
}

Vector apply_precision(const CholeskyFactors& f, const Vector& v) {
  const Index n = f.dim();
  if (v.size() != n) throw std::invalid_argument("apply_precision: dimension mismatch");
  // w = T v (sparse row gather), w /= D, result = T' w (scatter)
  Vector w(n);
  for (Index i = 0; i < n; ++i) {
    double s = v[i];
    for (const TriEntry& e : f.T.row(i)) s += e.value * v[e.col];
    w[i] = s;
  }
  w.array() /= f.D.values().array();
  Vector out = w;
  for (Index r = 0; r < n; ++r)
    for (const TriEntry& e : f.T.row(r)) out[e.col] += e.value * w[r];
  return out;
}

Vector solve_precision(const CholeskyFactors& f, const Vector& v) {
  if (v.size() != f.dim())
    throw std::invalid_argument("solve_precision: dimension mismatch");
  Vector w = f.T.transpose_solve(v);
  w.array() *= f.D.values().array();
  return f.T.solve(w);
}

Matrix apply_precision(const CholeskyFactors& f, const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (Index j = 0; j < m.cols(); ++j) out.col(j) = apply_precision(f, Vector(m.col(j)));
  return out;
}

Matrix solve_precision(const CholeskyFactors& f, const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (Index j = 0; j < m.cols(); ++j) out.col(j) = solve_precision(f, Vector(m.col(j)));
  return out;
}

}  // namespace enkfmc
