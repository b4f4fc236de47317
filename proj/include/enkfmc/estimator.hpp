#pragma once

#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "enkfmc/geometry.hpp"
#include "enkfmc/linalg.hpp"

namespace enkfmc {

// Per-component regression solver choice. param carries lambda for Tikhonov
// and the relative singular-value cutoff sigma_r for TruncatedSVD.
struct RegressionMethod {
  enum class Kind { NormalEquations, Tikhonov, TruncatedSVD };

  Kind kind = Kind::NormalEquations;
  double param = 0.0;

  static RegressionMethod normal_equations() { return {Kind::NormalEquations, 0.0}; }
  static RegressionMethod tikhonov(double lambda);
  static RegressionMethod truncated_svd(double sigma_r);
};

// Thrown when the plain normal equations hit a numerically singular Gram
// matrix; callers should switch to tikhonov() or truncated_svd().
struct SingularGramError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Regression {
  Vector beta;      // one coefficient per row of Z
  Vector residual;  // x - Z^T beta
};

// Least-squares fit of x (length Nens) on the rows of Z (p x Nens).
Regression regress_component(const Matrix& Z, const Vector& x, const RegressionMethod& method);

// Per-direction weights alpha_j of the truncated-SVD solution
// beta = sum_j alpha_j u_j; truncated directions report 0. sigma_r = 0
// keeps every direction (the full diagnostic spectrum).
Vector svd_direction_weights(const Matrix& Z, const Vector& x, double sigma_r);

using WarningSink = std::function<void(const std::string&)>;

// Estimate the precision factors T, D from ensemble deviations: component i
// is regressed on its in-radius predecessors, T picks up -beta and D the
// unbiased residual variance. Deterministic for any worker count.
CholeskyFactors estimate_factors(const EnsembleMatrix& ens, const GridGeometry& g,
                                 const RegressionMethod& method, int workers = 1,
                                 const WarningSink& warn = {});

// || dense(f) - reference ||_inf (max absolute row sum).
double precision_error_norm(const CholeskyFactors& f, const Matrix& reference);

// Text round-trip: header "mcfactors <Nstate>", then per row
// "i d_i k_1 v_1 k_2 v_2 ..." with 1-based i and k.
void dump_factors(const CholeskyFactors& f, std::ostream& os);
CholeskyFactors load_factors(std::istream& is);

}  // namespace enkfmc
