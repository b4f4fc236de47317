#include "enkfmc/observation.hpp"

#include <stdexcept>
#include <string>
#include <utility>

namespace enkfmc {

ObservationBundle::ObservationBundle(Vector y_in, std::vector<Index> indices_in,
                                     PositiveDiagonal R_in)
    : y(std::move(y_in)), indices(std::move(indices_in)), R(std::move(R_in)) {
  if (y.size() != Index(indices.size()) || y.size() != R.dim())
    throw std::invalid_argument("observation vector, index list and R must agree in size");
  Index prev = -1;
  for (Index k : indices) {
    if (k < 0) throw std::invalid_argument("observed index must be nonnegative");
    if (k <= prev)
      throw std::invalid_argument("observed indices must be sorted and distinct");
    prev = k;
  }
  if (!y.allFinite()) throw std::invalid_argument("observation values must be finite");
}

namespace {
void check_range(const ObservationBundle& obs, Index nstate) {
  if (!obs.indices.empty() && obs.indices.back() >= nstate)
    throw std::invalid_argument("observed index " + std::to_string(obs.indices.back() + 1) +
                                " exceeds state dimension " + std::to_string(nstate));
}
}  // namespace

Vector observe(const ObservationBundle& obs, const Vector& x) {
  check_range(obs, x.size());
  Vector out(obs.nobs());
  for (Index i = 0; i < obs.nobs(); ++i) out(i) = x(obs.indices[std::size_t(i)]);
  return out;
}

Matrix observe(const ObservationBundle& obs, const Matrix& X) {
  check_range(obs, X.rows());
  Matrix out(obs.nobs(), X.cols());
  for (Index i = 0; i < obs.nobs(); ++i) out.row(i) = X.row(obs.indices[std::size_t(i)]);
  return out;
}

Matrix scatter_rows(const ObservationBundle& obs, const Matrix& rows, Index nstate) {
  check_range(obs, nstate);
  if (rows.rows() != obs.nobs())
    throw std::invalid_argument("scatter_rows: row count does not match observation count");
  Matrix out = Matrix::Zero(nstate, rows.cols());
  for (Index i = 0; i < obs.nobs(); ++i) out.row(obs.indices[std::size_t(i)]) = rows.row(i);
  return out;
}

}  // namespace enkfmc
