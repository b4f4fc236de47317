#include "enkfmc/estimator.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <vector>

#include "enkfmc/parallel.hpp"

namespace enkfmc {

RegressionMethod RegressionMethod::tikhonov(double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("tikhonov lambda must be >= 0");
  return {Kind::Tikhonov, lambda};
}

RegressionMethod RegressionMethod::truncated_svd(double sigma_r) {
  if (!(sigma_r > 0.0 && sigma_r < 1.0))
    throw std::invalid_argument("truncated-svd cutoff must lie in (0,1)");
  return {Kind::TruncatedSVD, sigma_r};
}

namespace {

void check_regression_dims(const Matrix& Z, const Vector& x) {
  if (Z.rows() < 1) throw std::invalid_argument("regression needs at least one predictor row");
  if (Z.cols() != x.size())
    throw std::invalid_argument("predictor columns must match sample count");
  if (x.size() < 2) throw std::invalid_argument("regression needs at least two samples");
}

Vector truncated_svd_beta(const Matrix& Z, const Vector& x, double sigma_r, Vector* alpha_out) {
  Eigen::JacobiSVD<Matrix> svd(Z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& tau = svd.singularValues();
  Vector beta = Vector::Zero(Z.rows());
  Vector alpha = Vector::Zero(tau.size());
  const double tau_max = tau.size() ? tau(0) : 0.0;
  if (tau_max > 0.0) {
    for (Index j = 0; j < tau.size(); ++j) {
      if (tau(j) / tau_max < sigma_r) break;  // values sorted descending
      alpha(j) = svd.matrixV().col(j).dot(x) / tau(j);
      beta += alpha(j) * svd.matrixU().col(j);
    }
  }
  if (alpha_out) *alpha_out = alpha;
  return beta;
}

}  // namespace

Regression regress_component(const Matrix& Z, const Vector& x, const RegressionMethod& method) {
  check_regression_dims(Z, x);
  Vector beta;
  switch (method.kind) {
    case RegressionMethod::Kind::NormalEquations: {
      const Matrix gram = Z * Z.transpose();
      Eigen::FullPivLU<Matrix> lu(gram);
      if (!lu.isInvertible())
        throw SingularGramError(
            "normal-equations Gram matrix is numerically singular; "
            "switch to the tikhonov or truncated-svd regression method");
      beta = lu.solve(Z * x);
      break;
    }
    case RegressionMethod::Kind::Tikhonov: {
      Matrix gram = Z * Z.transpose();
      gram.diagonal().array() += method.param * method.param;
      beta = gram.ldlt().solve(Z * x);
      break;
    }
    case RegressionMethod::Kind::TruncatedSVD:
      beta = truncated_svd_beta(Z, x, method.param, nullptr);
      break;
  }
  return {beta, x - Z.transpose() * beta};
}

Vector svd_direction_weights(const Matrix& Z, const Vector& x, double sigma_r) {
  check_regression_dims(Z, x);
  if (!(sigma_r >= 0.0 && sigma_r < 1.0))
    throw std::invalid_argument("truncated-svd cutoff must lie in [0,1)");
  Vector alpha;
  truncated_svd_beta(Z, x, sigma_r, &alpha);
  return alpha;
}

CholeskyFactors estimate_factors(const EnsembleMatrix& ens, const GridGeometry& g,
                                 const RegressionMethod& method, int workers,
                                 const WarningSink& warn) {
  const Index n = ens.nstate();
  if (n != g.nstate())
    throw std::invalid_argument("geometry size does not match ensemble state dimension");
  const Index nens = ens.nens();
  const Matrix dev = deviations(ens);

  double max_var = 0.0;
  for (Index i = 0; i < n; ++i)
    max_var = std::max(max_var, dev.row(i).squaredNorm() / double(nens - 1));
  const double d_floor = 1e-12 * (max_var > 0.0 ? max_var : 1.0);

  std::vector<std::vector<TriEntry>> rows(n);
  Vector d(n);
  parallel_for(n, workers, [&](Index i) {
    const std::vector<Index> preds = g.predecessors(i);
    if (preds.empty()) {
      d(i) = dev.row(i).squaredNorm() / double(nens - 1);
      return;
    }
    Matrix Z(Index(preds.size()), nens);
    for (std::size_t r = 0; r < preds.size(); ++r) Z.row(Index(r)) = dev.row(preds[r]);
    const Regression fit = regress_component(Z, dev.row(i).transpose(), method);
    for (std::size_t r = 0; r < preds.size(); ++r)
      if (fit.beta(Index(r)) != 0.0) rows[i].push_back({preds[r], -fit.beta(Index(r))});
    d(i) = fit.residual.squaredNorm() / double(nens - 1);
  });

  for (Index i = 0; i < n; ++i) {
    if (d(i) < d_floor) {
      if (warn) {
        std::ostringstream msg;
        msg << "residual variance " << d(i) << " for component " << (i + 1)
            << " floored to " << d_floor;
        warn(msg.str());
      }
      d(i) = d_floor;
    }
  }

  return {SparseUnitLowerTriangular(n, std::move(rows)), PositiveDiagonal(d)};
}

double precision_error_norm(const CholeskyFactors& f, const Matrix& reference) {
  if (reference.rows() != f.dim() || reference.cols() != f.dim())
    throw std::invalid_argument("reference precision has wrong dimensions");
  return (f.dense() - reference).cwiseAbs().rowwise().sum().maxCoeff();
}

void dump_factors(const CholeskyFactors& f, std::ostream& os) {
  const auto old_precision = os.precision(17);
  os << "mcfactors " << f.dim() << "\n";
  for (Index i = 0; i < f.dim(); ++i) {
    os << (i + 1) << " " << f.D.values()(i);
    for (const TriEntry& e : f.T.row(i)) os << " " << (e.col + 1) << " " << e.value;
    os << "\n";
  }
  os.precision(old_precision);
}

CholeskyFactors load_factors(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("factor dump is empty");
  std::istringstream header(line);
  std::string tag;
  Index n = 0;
  if (!(header >> tag >> n) || tag != "mcfactors" || n < 1)
    throw std::runtime_error("bad factor dump header: " + line);

  std::vector<std::vector<TriEntry>> rows(n);
  Vector d(n);
  std::vector<bool> seen(std::size_t(n), false);
  for (Index count = 0; count < n; ++count) {
    if (!std::getline(is, line))
      throw std::runtime_error("factor dump truncated after " + std::to_string(count) + " rows");
    std::istringstream ls(line);
    Index i = 0;
    double di = 0.0;
    if (!(ls >> i >> di) || i < 1 || i > n)
      throw std::runtime_error("bad factor dump row: " + line);
    if (seen[std::size_t(i - 1)])
      throw std::runtime_error("duplicate factor dump row " + std::to_string(i));
    seen[std::size_t(i - 1)] = true;
    d(i - 1) = di;
    Index k = 0;
    double v = 0.0;
    while (ls >> k >> v) {
      if (k < 1 || k > n) throw std::runtime_error("bad column index in row: " + line);
      rows[i - 1].push_back({k - 1, v});
    }
    if (!ls.eof()) throw std::runtime_error("trailing garbage in factor dump row: " + line);
  }
  return {SparseUnitLowerTriangular(n, std::move(rows)), PositiveDiagonal(d)};
}

}  // namespace enkfmc
