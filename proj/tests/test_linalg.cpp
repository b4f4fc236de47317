#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "enkfmc/linalg.hpp"
#include "enkfmc/rng.hpp"

using namespace enkfmc;

namespace {

Matrix random_matrix(Index rows, Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.gaussian();
  return m;
}

// each row keeps a random subset of the strictly-lower columns; row sums are
// bounded by 1/2 so substitution stays well conditioned at any dim
SparseUnitLowerTriangular random_sparse_t(Index dim, Rng& rng) {
  std::vector<std::vector<TriEntry>> rows(static_cast<std::size_t>(dim));
  for (Index i = 1; i < dim; ++i) {
    auto& row = rows[std::size_t(i)];
    for (Index j = 0; j < i; ++j)
      if (rng.uniform() < 0.3) row.push_back({j, rng.uniform() - 0.5});
    for (TriEntry& e : row) e.value /= double(row.size());
  }
  return SparseUnitLowerTriangular(dim, std::move(rows));
}

CholeskyFactors random_factors(Index dim, Rng& rng) {
  Vector d(dim);
  for (Index i = 0; i < dim; ++i) d(i) = 0.2 + rng.uniform();
  return {random_sparse_t(dim, rng), PositiveDiagonal(std::move(d))};
}

}  // namespace

TEST_CASE("ensemble mean") {
  SUBCASE("two identical members") {
    Matrix m(3, 2);
    m.col(0) << 1.0, -2.0, 0.5;
    m.col(1) = m.col(0);
    const Vector mean = ensemble_mean(EnsembleMatrix(m));
    CHECK(mean == m.col(0));
  }
  SUBCASE("midpoint of 0 and 2") {
    Matrix m = Matrix::Zero(4, 2);
    m.col(1).setConstant(2.0);
    CHECK(ensemble_mean(EnsembleMatrix(m)) == Vector::Constant(4, 1.0));
  }
  SUBCASE("one-pass summation oracle") {
    Rng rng(11);
    const Matrix m = random_matrix(5, 10, rng);
    const Vector mean = ensemble_mean(EnsembleMatrix(m));
    for (Index i = 0; i < 5; ++i) {
      double acc = 0.0;
      for (Index j = 0; j < 10; ++j) acc += m(i, j);
      CHECK(std::abs(mean(i) - acc / 10.0) < 1e-14);
    }
  }
}

TEST_CASE("deviations") {
  SUBCASE("identical members give zeros") {
    Matrix m(3, 4);
    m.colwise() = Vector::LinSpaced(3, 1.0, 3.0);
    CHECK(deviations(EnsembleMatrix(m)).isZero(0.0));
  }
  SUBCASE("1d pair") {
    Matrix m(1, 2);
    m << 0.0, 2.0;
    const Matrix u = deviations(EnsembleMatrix(m));
    CHECK(u(0, 0) == -1.0);
    CHECK(u(0, 1) == 1.0);
  }
  SUBCASE("reconstruction identity") {
    Rng rng(12);
    const Matrix m = random_matrix(6, 9, rng);
    const EnsembleMatrix ens(m);
    const Matrix rebuilt =
        deviations(ens) + ensemble_mean(ens) * Eigen::RowVectorXd::Ones(9);
    CHECK((rebuilt - m).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("sample covariance") {
  SUBCASE("identical members give zero matrix") {
    Matrix m(3, 5);
    m.colwise() = Vector::LinSpaced(3, -1.0, 1.0);
    CHECK(sample_covariance(EnsembleMatrix(m)).isZero(0.0));
  }
  SUBCASE("two-point sample variance") {
    Matrix m(1, 2);
    m << 0.0, 2.0;
    CHECK(sample_covariance(EnsembleMatrix(m))(0, 0) == 2.0);
  }
  SUBCASE("brute-force pairwise oracle") {
    Rng rng(13);
    const Matrix m = random_matrix(4, 50, rng);
    const Matrix cov = sample_covariance(EnsembleMatrix(m));
    for (Index a = 0; a < 4; ++a)
      for (Index b = 0; b < 4; ++b) {
        double ma = 0.0, mb = 0.0;
        for (Index j = 0; j < 50; ++j) {
          ma += m(a, j);
          mb += m(b, j);
        }
        ma /= 50.0;
        mb /= 50.0;
        double acc = 0.0;
        for (Index j = 0; j < 50; ++j) acc += (m(a, j) - ma) * (m(b, j) - mb);
        CHECK(std::abs(cov(a, b) - acc / 49.0) < 1e-12);
      }
  }
}

TEST_CASE("triangular solves") {
  SUBCASE("identity solve returns b") {
    const SparseUnitLowerTriangular t(5);
    const Vector b = Vector::LinSpaced(5, -2.0, 2.0);
    CHECK(t.solve(b) == b);
    CHECK(t.transpose_solve(b) == b);
  }
  SUBCASE("hand substitution, dim 2") {
    // single stored entry: second row depends on the first with weight -0.5
    std::vector<std::vector<TriEntry>> rows(2);
    rows[1].push_back({0, -0.5});
    const SparseUnitLowerTriangular t(2, std::move(rows));
    Vector b(2);
    b << 1.0, 1.0;
    const Vector x = t.solve(b);
    CHECK(x(0) == 1.0);
    CHECK(x(1) == 1.5);
    const Vector xt = t.transpose_solve(b);
    CHECK(xt(0) == 1.5);
    CHECK(xt(1) == 1.0);
  }
  SUBCASE("random residual check") {
    Rng rng(14);
    for (Index dim : {7, 40, 500}) {
      const SparseUnitLowerTriangular t = random_sparse_t(dim, rng);
      const Vector b = random_matrix(dim, 1, rng).col(0);
      const Matrix td = t.dense();
      CHECK((td * t.solve(b) - b).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((td.transpose() * t.transpose_solve(b) - b).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("precision application") {
  SUBCASE("identity factors") {
    const CholeskyFactors f{SparseUnitLowerTriangular(3),
                            PositiveDiagonal(Vector::Ones(3))};
    const Vector v = Vector::LinSpaced(3, 1.0, 3.0);
    CHECK(apply_precision(f, v) == v);
    CHECK(solve_precision(f, v) == v);
  }
  SUBCASE("scalar inverse variance") {
    const CholeskyFactors f{SparseUnitLowerTriangular(1),
                            PositiveDiagonal(Vector::Constant(1, 4.0))};
    Vector v(1);
    v << 2.0;
    CHECK(apply_precision(f, v)(0) == 0.5);
  }
  SUBCASE("dense triple-product oracle") {
    Rng rng(15);
    const CholeskyFactors f = random_factors(12, rng);
    const Matrix td = f.T.dense();
    const Matrix dense =
        td.transpose() * f.D.values().cwiseInverse().asDiagonal() * td;
    const Vector v = random_matrix(12, 1, rng).col(0);
    CHECK((apply_precision(f, v) - dense * v).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((f.dense() - dense).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("apply then solve is the identity") {
    Rng rng(16);
    const CholeskyFactors f = random_factors(20, rng);
    const Vector v = random_matrix(20, 1, rng).col(0);
    CHECK((solve_precision(f, apply_precision(f, v)) - v).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("dense inverse oracle for the solve") {
    Rng rng(17);
    const CholeskyFactors f = random_factors(15, rng);
    const Matrix dense = f.dense();
    const Vector v = random_matrix(15, 1, rng).col(0);
    const Vector oracle = dense.ldlt().solve(v);
    CHECK((solve_precision(f, v) - oracle).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("matrix overloads agree with columnwise application") {
    Rng rng(18);
    const CholeskyFactors f = random_factors(9, rng);
    const Matrix m = random_matrix(9, 4, rng);
    const Matrix applied = apply_precision(f, m);
    const Matrix solved = solve_precision(f, m);
    for (Index j = 0; j < 4; ++j) {
      CHECK(applied.col(j) == apply_precision(f, Vector(m.col(j))));
      CHECK(solved.col(j) == solve_precision(f, Vector(m.col(j))));
    }
  }
}

TEST_CASE("validation") {
  CHECK_THROWS(EnsembleMatrix(Matrix::Zero(3, 1)));  // one member is not an ensemble
  CHECK_THROWS(PositiveDiagonal(Vector::Zero(2)));
  Vector neg(2);
  neg << 1.0, -1.0;
  CHECK_THROWS(PositiveDiagonal(neg));
  // upper entry rejected
  std::vector<std::vector<TriEntry>> bad(2);
  bad[0].push_back({1, 0.5});
  CHECK_THROWS(SparseUnitLowerTriangular(2, std::move(bad)));
}
