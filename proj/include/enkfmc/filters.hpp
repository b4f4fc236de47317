#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "enkfmc/geometry.hpp"
#include "enkfmc/linalg.hpp"
#include "enkfmc/observation.hpp"

namespace enkfmc {

// Per-member noisy observation copies, column j = y + eps_j with eps ~ N(0,R).
struct PerturbedObservations {
  Matrix Ys;
  std::uint64_t seed = 0;
};

PerturbedObservations perturb_observations(const ObservationBundle& obs, Index nens,
                                           std::uint64_t seed);

struct AnalysisResult {
  EnsembleMatrix ensemble;
  std::map<std::string, double> diagnostics;
};

enum class Formulation { Incremental, Primal, Dual };

// Solves (precision + R_H R_H') X = rhs with one triangular/diagonal solve
// pass followed by a rank-one update per column of R_H, in column order.
// Step 1 parallelizes over columns; step 2 is inherently sequential.
Matrix sherman_morrison_solve(const CholeskyFactors& factors, const Matrix& R_H,
                              const Matrix& rhs, int workers = 1);

// EnKF analysis with the estimated background precision. All three
// formulations compute the same update through different linear systems.
AnalysisResult analyze_enkf_mc(const EnsembleMatrix& ens, const ObservationBundle& obs,
                               const CholeskyFactors& factors, Formulation formulation,
                               const PerturbedObservations& perturbed, int workers = 1);

// Local ensemble transform Kalman filter over the geometry's boxes.
// Multiplicative inflation (>= 1) scales the background deviations first.
AnalysisResult analyze_letkf(const EnsembleMatrix& ens, const ObservationBundle& obs,
                             const GridGeometry& g, double inflation, int workers = 1);

// Stochastic EnKF with the background covariance tapered entrywise. Dense;
// guarded by kSchurDenseLimit — this baseline exists for oracle comparisons.
inline constexpr Index kSchurDenseLimit = 2000;

AnalysisResult analyze_enkf_schur(const EnsembleMatrix& ens, const ObservationBundle& obs,
                                  const GridGeometry& g,
                                  const PerturbedObservations& perturbed);
AnalysisResult analyze_enkf_schur(const EnsembleMatrix& ens, const ObservationBundle& obs,
                                  const Matrix& taper,
                                  const PerturbedObservations& perturbed);

// Exact mean/covariance update by dense algebra; the oracle the ensemble
// filters are tested against.
struct KalmanResult {
  Vector xa;
  Matrix A;
};

KalmanResult kalman_analysis(const Vector& xb, const Matrix& B, const ObservationBundle& obs);

// mean + factor * deviations
EnsembleMatrix inflate(const EnsembleMatrix& ens, double factor);

}  // namespace enkfmc
