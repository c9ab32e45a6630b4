#pragma once

#include <algorithm>
#include <array>
#include <span>
#include <utility>
#include <vector>

#include "gibbs/point.hpp"

namespace gibbs {

/// Static uniform-grid neighbour index over a fixed point set.
///
/// Cells have side >= `cell_size`, so every point within `cell_size` of a
/// query lies in the query's cell or one of its 3^d - 1 neighbours.
class CellList {
 public:
  CellList(std::span<const Point> points, int dim, double cell_size);

  /// Calls f(index) for every point p with |p - x| <= radius, radius <= cell size.
  template <class F>
  void for_each_near(const Point& x, double radius, F&& f) const;

  /// All index pairs (i, j), i < j, with |p_i - p_j| <= radius, in
  /// lexicographic order.
  std::vector<std::pair<int, int>> pairs_within(double radius) const;

  /// Indices j != i with |p_i - p_j| <= radius, ascending.
  std::vector<std::vector<int>> neighbour_lists(double radius) const;

 private:
  int cell_coord(const Point& x, int axis) const;

  std::span<const Point> points_;
  int dim_;
  double cell_;
  std::array<double, kMaxDim> origin_{};
  std::array<int, kMaxDim> shape_{1, 1, 1};
  std::vector<int> start_;  // CSR offsets into order_
  std::vector<int> order_;
};

template <class F>
void CellList::for_each_near(const Point& x, double radius, F&& f) const {
  const double r2 = radius * radius;
  std::array<int, kMaxDim> lo{0, 0, 0}, hi{0, 0, 0};
  for (int a = 0; a < dim_; ++a) {
    const int c = cell_coord(x, a);
    lo[a] = std::max(c - 1, 0);
    hi[a] = std::min(c + 1, shape_[a] - 1);
    if (lo[a] > hi[a]) return;
  }
  for (int i2 = lo[2]; i2 <= hi[2]; ++i2) {
    for (int i1 = lo[1]; i1 <= hi[1]; ++i1) {
      for (int i0 = lo[0]; i0 <= hi[0]; ++i0) {
        const int cell = (i2 * shape_[1] + i1) * shape_[0] + i0;
        for (int k = start_[cell]; k < start_[cell + 1]; ++k) {
          const int idx = order_[k];
          if (squared_distance(points_[idx], x) <= r2) f(idx);
        }
      }
    }
  }
}

}  // namespace gibbs
