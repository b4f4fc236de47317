#include "enkfmc/filters.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "enkfmc/parallel.hpp"
#include "enkfmc/rng.hpp"

namespace enkfmc {

PerturbedObservations perturb_observations(const ObservationBundle& obs, Index nens,
                                           std::uint64_t seed) {
  if (nens < 2) throw std::invalid_argument("perturbed observations need nens >= 2");
  const Vector sigma = obs.R.values().cwiseSqrt();
  Matrix ys(obs.nobs(), nens);
  Rng rng(seed);
  for (Index j = 0; j < nens; ++j)
    for (Index i = 0; i < obs.nobs(); ++i) ys(i, j) = obs.y(i) + sigma(i) * rng.gaussian();
  return {std::move(ys), seed};
}

Matrix sherman_morrison_solve(const CholeskyFactors& factors, const Matrix& R_H,
                              const Matrix& rhs, int workers) {
  const Index n = factors.dim();
  if (rhs.rows() != n || R_H.rows() != n)
    throw std::invalid_argument("sherman_morrison_solve: row count must equal the state size");
  const Index nobs = R_H.cols();
  const Index q = rhs.cols();

  // step 1: everything against the background precision alone
  Matrix Z(n, q);
  Matrix W(n, nobs);
  parallel_for(q + nobs, workers, [&](Index c) {
    if (c < q)
      Z.col(c) = solve_precision(factors, Vector(rhs.col(c)));
    else
      W.col(c - q) = solve_precision(factors, Vector(R_H.col(c - q)));
  });

  // step 2: fold in one observation column at a time (order matters)
  for (Index i = 0; i < nobs; ++i) {
    const Vector r = R_H.col(i);
    const double gamma = 1.0 / (1.0 + r.dot(W.col(i)));
    if (!std::isfinite(gamma))
      throw std::logic_error("sherman-morrison update lost positive definiteness");
    const Vector h = gamma * W.col(i);
    const Eigen::RowVectorXd rz = r.transpose() * Z;
    Z.noalias() -= h * rz;
    if (i + 1 < nobs) {
      const Eigen::RowVectorXd rw = r.transpose() * W.rightCols(nobs - i - 1);
      W.rightCols(nobs - i - 1).noalias() -= h * rw;
    }
  }
  return Z;
}

namespace {

// H' R^{-1/2} as explicit columns, one per observation
Matrix weighted_selection_columns(const ObservationBundle& obs, Index nstate) {
  Matrix r_h = Matrix::Zero(nstate, obs.nobs());
  for (Index i = 0; i < obs.nobs(); ++i)
    r_h(obs.indices[std::size_t(i)], i) = 1.0 / std::sqrt(obs.R.values()(i));
  return r_h;
}

}  // namespace

AnalysisResult analyze_enkf_mc(const EnsembleMatrix& ens, const ObservationBundle& obs,
                               const CholeskyFactors& factors, Formulation formulation,
                               const PerturbedObservations& perturbed, int workers) {
  const Index n = ens.nstate();
  const Index nens = ens.nens();
  const Index nobs = obs.nobs();
  if (factors.dim() != n)
    throw std::invalid_argument("factor dimension does not match the ensemble");
  if (perturbed.Ys.rows() != nobs || perturbed.Ys.cols() != nens)
    throw std::invalid_argument("perturbed observations have the wrong shape");

  std::map<std::string, double> diag{{"observations", double(nobs)},
                                     {"factor_nnz", double(factors.T.nnz())}};
  if (nobs == 0) return {ens, std::move(diag)};

  const Matrix& xb = ens.members();
  const Vector rinv = obs.R.values().cwiseInverse();
  const Matrix delta = perturbed.Ys - observe(obs, xb);
  const Matrix r_h = weighted_selection_columns(obs, n);

  Matrix xa;
  switch (formulation) {
    case Formulation::Incremental: {
      const Matrix rhs = scatter_rows(obs, rinv.asDiagonal() * delta, n);
      xa = xb + sherman_morrison_solve(factors, r_h, rhs, workers);
      diag["sm_rank_one_updates"] = double(nobs);
      break;
    }
    case Formulation::Primal: {
      Matrix rhs = apply_precision(factors, xb);
      rhs += scatter_rows(obs, rinv.asDiagonal() * perturbed.Ys, n);
      xa = sherman_morrison_solve(factors, r_h, rhs, workers);
      diag["sm_rank_one_updates"] = double(nobs);
      break;
    }
    case Formulation::Dual: {
      // M = D^{1/2} T^{-T} H', one transpose solve per observation
      const Vector dsqrt = factors.D.values().cwiseSqrt();
      Matrix m(n, nobs);
      parallel_for(nobs, workers, [&](Index i) {
        Vector e = Vector::Zero(n);
        e(obs.indices[std::size_t(i)]) = 1.0;
        m.col(i) = dsqrt.asDiagonal() * factors.T.transpose_solve(e);
      });
      Matrix s = m.transpose() * m;
      s.diagonal() += obs.R.values();
      const Eigen::LDLT<Matrix> ldlt(s);
      if (ldlt.info() != Eigen::Success)
        throw std::logic_error("dual inner system factorization failed");
      const Matrix w = ldlt.solve(delta);
      const Matrix mw = dsqrt.asDiagonal() * (m * w);
      xa = xb;
      for (Index j = 0; j < nens; ++j) xa.col(j) += factors.T.solve(Vector(mw.col(j)));
      diag["dual_system_dim"] = double(nobs);
      break;
    }
  }
  return {EnsembleMatrix(std::move(xa)), std::move(diag)};
}

AnalysisResult analyze_letkf(const EnsembleMatrix& ens, const ObservationBundle& obs,
                             const GridGeometry& g, double inflation, int workers) {
  const Index n = ens.nstate();
  const Index nens = ens.nens();
  if (g.nstate() != n)
    throw std::invalid_argument("geometry size does not match the ensemble");
  if (!(inflation >= 1.0)) throw std::invalid_argument("inflation must be >= 1");
  if (!obs.indices.empty() && obs.indices.back() >= n)
    throw std::invalid_argument("observed index exceeds state dimension");

  const Vector mean = ensemble_mean(ens);
  const Matrix u = inflation * deviations(ens);
  // rows with no local observations stay (inflated) background; at inflation 1
  // reuse the member matrix itself so they match the background bitwise
  Matrix xa = inflation == 1.0 ? ens.members() : Matrix(u.colwise() + mean);

  // positions in obs.indices that fall inside the local box of k
  const auto local_positions = [&](Index k) {
    std::vector<Index> pos;
    const std::vector<Index> box = g.local_box(k);
    std::size_t p = 0;
    for (Index cell : box) {
      while (p < obs.indices.size() && obs.indices[p] < cell) ++p;
      if (p < obs.indices.size() && obs.indices[p] == cell) pos.push_back(Index(p++));
    }
    return pos;
  };

  Index empty_boxes = 0;
  for (Index k = 0; k < n; ++k)
    if (local_positions(k).empty()) ++empty_boxes;

  parallel_for(n, workers, [&](Index k) {
    const std::vector<Index> pos = local_positions(k);
    if (pos.empty()) return;
    const Index m = Index(pos.size());
    Matrix q(m, nens);
    Vector d(m), rinv(m);
    for (Index t = 0; t < m; ++t) {
      const Index p = pos[std::size_t(t)];
      const Index gi = obs.indices[std::size_t(p)];
      q.row(t) = u.row(gi);
      d(t) = obs.y(p) - mean(gi);
      rinv(t) = 1.0 / obs.R.values()(p);
    }
    // ensemble-space precision (nens-1) I + Q' R^{-1} Q, spectral inverse
    Matrix gram = q.transpose() * rinv.asDiagonal() * q;
    gram.diagonal().array() += double(nens - 1);
    const Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    if (es.info() != Eigen::Success)
      throw std::logic_error("ensemble-space eigendecomposition failed");
    const Vector lam = es.eigenvalues();
    const Matrix& v = es.eigenvectors();
    const Vector b = q.transpose() * rinv.cwiseProduct(d);
    const Vector wa = v * (v.transpose() * b).cwiseQuotient(lam);
    // symmetric square root of (nens-1) * inverse(gram)
    const Matrix w_dev =
        v * (double(nens - 1) * lam.cwiseInverse()).cwiseSqrt().asDiagonal() * v.transpose();
    const double mean_k = mean(k) + u.row(k).dot(wa);
    xa.row(k) = u.row(k) * w_dev;
    xa.row(k).array() += mean_k;
  });

  std::map<std::string, double> diag{{"observations", double(obs.nobs())},
                                     {"empty_local_boxes", double(empty_boxes)}};
  return {EnsembleMatrix(std::move(xa)), std::move(diag)};
}

AnalysisResult analyze_enkf_schur(const EnsembleMatrix& ens, const ObservationBundle& obs,
                                  const GridGeometry& g,
                                  const PerturbedObservations& perturbed) {
  if (g.nstate() != ens.nstate())
    throw std::invalid_argument("geometry size does not match the ensemble");
  return analyze_enkf_schur(ens, obs, taper_matrix(g), perturbed);
}

AnalysisResult analyze_enkf_schur(const EnsembleMatrix& ens, const ObservationBundle& obs,
                                  const Matrix& taper,
                                  const PerturbedObservations& perturbed) {
  const Index n = ens.nstate();
  const Index nens = ens.nens();
  const Index nobs = obs.nobs();
  if (n > kSchurDenseLimit)
    throw std::invalid_argument("state dimension exceeds the dense baseline limit");
  if (taper.rows() != n || taper.cols() != n)
    throw std::invalid_argument("taper matrix has the wrong shape");
  if (perturbed.Ys.rows() != nobs || perturbed.Ys.cols() != nens)
    throw std::invalid_argument("perturbed observations have the wrong shape");

  std::map<std::string, double> diag{{"observations", double(nobs)}};
  if (nobs == 0) return {ens, std::move(diag)};

  const Matrix& xb = ens.members();
  const Matrix pb_tapered = taper.cwiseProduct(sample_covariance(ens));
  const Matrix hp = observe(obs, pb_tapered);  // nobs x n
  Matrix s(nobs, nobs);
  for (Index j = 0; j < nobs; ++j) s.col(j) = hp.col(obs.indices[std::size_t(j)]);
  s.diagonal() += obs.R.values();
  const Eigen::LDLT<Matrix> ldlt(s);
  if (ldlt.info() != Eigen::Success)
    throw std::logic_error("innovation system factorization failed");
  const Matrix delta = perturbed.Ys - observe(obs, xb);
  const Matrix xa = xb + hp.transpose() * ldlt.solve(delta);
  return {EnsembleMatrix(xa), std::move(diag)};
}

KalmanResult kalman_analysis(const Vector& xb, const Matrix& B, const ObservationBundle& obs) {
  const Index n = xb.size();
  if (B.rows() != n || B.cols() != n)
    throw std::invalid_argument("covariance shape does not match the state");
  const Eigen::LLT<Matrix> llt(B);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("background covariance must be symmetric positive definite");
  if (obs.nobs() == 0) return {xb, B};

  const Matrix hb = observe(obs, B);  // nobs x n
  Matrix s(obs.nobs(), obs.nobs());
  for (Index j = 0; j < obs.nobs(); ++j) s.col(j) = hb.col(obs.indices[std::size_t(j)]);
  s.diagonal() += obs.R.values();
  const Eigen::LDLT<Matrix> ldlt(s);
  const Vector innovation = obs.y - observe(obs, xb);
  const Vector xa = xb + hb.transpose() * ldlt.solve(innovation);
  Matrix a = B - hb.transpose() * ldlt.solve(hb);
  a = 0.5 * (a + a.transpose()).eval();
  return {xa, std::move(a)};
}

EnsembleMatrix inflate(const EnsembleMatrix& ens, double factor) {
  if (!(factor >= 1.0)) throw std::invalid_argument("inflation must be >= 1");
  if (factor == 1.0) return ens;
  const Vector mean = ensemble_mean(ens);
  Matrix members = factor * deviations(ens);
  members.colwise() += mean;
  return EnsembleMatrix(std::move(members));
}

}  // namespace enkfmc
