#include "enkfmc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace enkfmc {

GridGeometry GridGeometry::ring(Index n, Index zeta) {
  if (n < 1) throw std::invalid_argument("ring needs n >= 1");
  if (zeta < 0 || zeta > n)
    throw std::invalid_argument("zeta out of range for ring of " + std::to_string(n));
  GridGeometry g;
  g.is_ring_ = true;
  g.n_ = n;
  g.zeta_ = zeta;
  return g;
}

GridGeometry GridGeometry::rect(Index rows, Index cols, Ordering ordering, Index zeta) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("rect extents must be >= 1");
  if (zeta < 0 || zeta > std::max(rows, cols))
    throw std::invalid_argument("zeta exceeds grid extent");
  GridGeometry g;
  g.is_ring_ = false;
  g.rows_ = rows;
  g.cols_ = cols;
  g.ordering_ = ordering;
  g.zeta_ = zeta;
  return g;
}

void GridGeometry::check_index(Index k) const {
  if (k < 0 || k >= nstate())
    throw std::invalid_argument("component index out of range: " + std::to_string(k));
}

Index GridGeometry::index_of(Coord c) const {
  if (is_ring_) {
    if (c.i < 0 || c.i >= n_ || c.j != 0)
      throw std::invalid_argument("coordinate outside ring");
    return c.i;
  }
  if (c.i < 0 || c.i >= rows_ || c.j < 0 || c.j >= cols_)
    throw std::invalid_argument("coordinate outside grid");
  // RowMajor is the mapping written out in the source material:
  // 1-based k = (j-1)*rows + i, i.e. the first coordinate varies fastest.
  return ordering_ == Ordering::RowMajor ? c.j * rows_ + c.i : c.i * cols_ + c.j;
}

Coord GridGeometry::coord_of(Index k) const {
  check_index(k);
  if (is_ring_) return {k, 0};
  if (ordering_ == Ordering::RowMajor) return {k % rows_, k / rows_};
  return {k / cols_, k % cols_};
}

std::vector<Index> GridGeometry::predecessors(Index k) const {
  check_index(k);
  std::vector<Index> out;
  for (Index idx : local_box(k))
    if (idx < k) out.push_back(idx);
  return out;  // local_box is already sorted
}

std::vector<Index> GridGeometry::local_box(Index k) const {
  check_index(k);
  std::vector<Index> out;
  if (is_ring_) {
    for (Index off = -zeta_; off <= zeta_; ++off) {
      Index a = ((k + off) % n_ + n_) % n_;
      out.push_back(a);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
  const Coord c = coord_of(k);
  const Index i_lo = std::max<Index>(0, c.i - zeta_);
  const Index i_hi = std::min(rows_ - 1, c.i + zeta_);
  const Index j_lo = std::max<Index>(0, c.j - zeta_);
  const Index j_hi = std::min(cols_ - 1, c.j + zeta_);
  for (Index i = i_lo; i <= i_hi; ++i)
    for (Index j = j_lo; j <= j_hi; ++j) out.push_back(index_of({i, j}));
  std::sort(out.begin(), out.end());
  return out;
}

double GridGeometry::distance(Index a, Index b) const {
  check_index(a);
  check_index(b);
  if (is_ring_) {
    const Index d = std::abs(a - b);
    return static_cast<double>(std::min(d, n_ - d));
  }
  const Coord ca = coord_of(a);
  const Coord cb = coord_of(b);
  return std::hypot(static_cast<double>(ca.i - cb.i), static_cast<double>(ca.j - cb.j));
}

double taper_weight(const GridGeometry& g, Index k, Index l, double zeta) {
  if (!(zeta > 0.0)) throw std::invalid_argument("taper radius must be positive");
  const double d = g.distance(k, l);
  return std::exp(-d * d / (2.0 * zeta * zeta));
}

Matrix taper_matrix(const GridGeometry& g) {
  const Index n = g.nstate();
  Matrix pi(n, n);
  const double zeta = static_cast<double>(g.zeta());
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b <= a; ++b) {
      const double w = taper_weight(g, a, b, zeta);
      pi(a, b) = w;
      pi(b, a) = w;
    }
  return pi;
}

}  // namespace enkfmc
