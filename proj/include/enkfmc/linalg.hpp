#pragma once

#include <Eigen/Dense>

#include <vector>

namespace enkfmc {

using Matrix = Eigen::MatrixXd;  // column-major, so ensemble members are contiguous
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// One stored entry of a sparse triangular row.
struct TriEntry {
  Index col = 0;
  double value = 0.0;
};

// Unit lower triangular matrix, per-row sparse storage. The unit diagonal is
// implicit and never stored; each row keeps its strictly-lower entries sorted
// by column. Immutable once constructed.
class SparseUnitLowerTriangular {
 public:
  explicit SparseUnitLowerTriangular(Index dim);  // identity
  SparseUnitLowerTriangular(Index dim, std::vector<std::vector<TriEntry>> rows);

  Index dim() const { return dim_; }
  Index nnz() const;
  const std::vector<TriEntry>& row(Index i) const {
    return rows_[static_cast<std::size_t>(i)];
  }

  Vector solve(const Vector& b) const;            // T x = b, forward substitution
  Vector transpose_solve(const Vector& b) const;  // T' x = b, backward substitution
  Matrix dense() const;

 private:
  Index dim_ = 0;
  std::vector<std::vector<TriEntry>> rows_;
};

// Diagonal matrix with strictly positive finite entries.
class PositiveDiagonal {
 public:
  explicit PositiveDiagonal(Vector values);
  Index dim() const { return values_.size(); }
  const Vector& values() const { return values_; }

 private:
  Vector values_;
};

// Sparse factors of a precision matrix: inverse covariance = T' * inv(D) * T.
struct CholeskyFactors {
  SparseUnitLowerTriangular T;
  PositiveDiagonal D;

  Index dim() const { return T.dim(); }
  Matrix dense() const;  // assembles T' * inv(D) * T
};

// Nstate x Nens member matrix. nens >= 2 so deviations have an unbiased
// variance divisor.
class EnsembleMatrix {
 public:
  explicit EnsembleMatrix(Matrix members);
  Index nstate() const { return members_.rows(); }
  Index nens() const { return members_.cols(); }
  const Matrix& members() const { return members_; }

 private:
  Matrix members_;
};

Vector ensemble_mean(const EnsembleMatrix& ens);
Matrix deviations(const EnsembleMatrix& ens);
Matrix sample_covariance(const EnsembleMatrix& ens);

Vector unit_lower_solve(const SparseUnitLowerTriangular& T, const Vector& b);
Vector unit_lower_transpose_solve(const SparseUnitLowerTriangular& T, const Vector& b);

// (T' inv(D) T) v and its inverse action B v = inv(T) D inv(T') v.
Vector apply_precision(const CholeskyFactors& f, const Vector& v);
Vector solve_precision(const CholeskyFactors& f, const Vector& v);
Matrix apply_precision(const CholeskyFactors& f, const Matrix& m);
Matrix solve_precision(const CholeskyFactors& f, const Matrix& m);

}  // namespace enkfmc
