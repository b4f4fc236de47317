#pragma once

#include "enkfmc/linalg.hpp"

#include <vector>

namespace enkfmc {

enum class Ordering { RowMajor, ColumnMajor };

// Grid coordinate, 0-based internally. For Rect, i runs over the first
// extent (rows) and j over the second (cols); docs and file formats speak
// 1-based.
struct Coord {
  Index i = 0;
  Index j = 0;
};

// Model-component geometry: a periodic 1-D ring or a non-periodic 2-D
// rectangle, an index ordering, and the radius of influence zeta. Box
// membership (predecessors, local boxes) uses Chebyshev distance; taper
// weights use Euclidean distance (arc distance on the ring).
class GridGeometry {
 public:
  static GridGeometry ring(Index n, Index zeta);
  static GridGeometry rect(Index rows, Index cols, Ordering ordering, Index zeta);

  bool is_ring() const { return is_ring_; }
  Index nstate() const { return is_ring_ ? n_ : rows_ * cols_; }
  Index zeta() const { return zeta_; }
  Ordering ordering() const { return ordering_; }
  Index rows() const { return rows_; }
  Index cols() const { return cols_; }

  Index index_of(Coord c) const;
  Coord coord_of(Index k) const;

  // Indices j < k within the zeta-box of k, sorted ascending.
  std::vector<Index> predecessors(Index k) const;
  // All indices within the zeta-box of k (including k), sorted ascending.
  std::vector<Index> local_box(Index k) const;

  // Euclidean grid distance (ring: arc distance).
  double distance(Index a, Index b) const;

 private:
  GridGeometry() = default;
  void check_index(Index k) const;

  bool is_ring_ = true;
  Index n_ = 0;     // ring length
  Index rows_ = 0;  // rect extents
  Index cols_ = 0;
  Ordering ordering_ = Ordering::RowMajor;
  Index zeta_ = 0;
};

// exp(-d^2 / (2 zeta^2)) with d the Euclidean grid distance. zeta = 0 rejected.
double taper_weight(const GridGeometry& g, Index k, Index l, double zeta);

// Full taper matrix over the geometry using its own radius.
Matrix taper_matrix(const GridGeometry& g);

}  // namespace enkfmc
