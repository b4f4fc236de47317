#pragma once

#include <vector>

#include "enkfmc/linalg.hpp"

namespace enkfmc {

// A single observation of selected state components: values y, the sorted
// observed-component indices (the row-selection operator H), and the
// diagonal observation-error covariance R. Nobs = 0 is a valid empty bundle.
struct ObservationBundle {
  Vector y;
  std::vector<Index> indices;
  PositiveDiagonal R;

  ObservationBundle(Vector y_in, std::vector<Index> indices_in, PositiveDiagonal R_in);
  Index nobs() const { return y.size(); }
};

// H x and H X: pick the observed rows.
Vector observe(const ObservationBundle& obs, const Vector& x);
Matrix observe(const ObservationBundle& obs, const Matrix& X);

// H' rows: scatter Nobs rows back into an Nstate-row zero matrix.
Matrix scatter_rows(const ObservationBundle& obs, const Matrix& rows, Index nstate);

}  // namespace enkfmc
