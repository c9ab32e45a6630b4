#include "gibbs/cell_list.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gibbs {

CellList::CellList(std::span<const Point> points, int dim, double cell_size)
    : points_(points), dim_(dim), cell_(cell_size) {
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
    throw std::invalid_argument("CellList: cell size must be positive");
  }
  std::array<double, kMaxDim> hi{};
  for (int a = 0; a < kMaxDim; ++a) {
    origin_[a] = std::numeric_limits<double>::infinity();
    hi[a] = -std::numeric_limits<double>::infinity();
  }
  for (const auto& p : points_) {
    for (int a = 0; a < dim_; ++a) {
      origin_[a] = std::min(origin_[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  if (points_.empty()) {
    for (int a = 0; a < dim_; ++a) origin_[a] = hi[a] = 0.0;
  }
  // Keep the grid no larger than ~4 cells per point.
  const double max_cells = 4.0 * static_cast<double>(points_.size()) + 8.0;
  while (true) {
    double total = 1.0;
    for (int a = 0; a < dim_; ++a) {
      total *= std::floor((hi[a] - origin_[a]) / cell_) + 1.0;
    }
    if (total <= max_cells) break;
    cell_ *= 1.5;
  }
  for (int a = 0; a < dim_; ++a) {
    shape_[a] = static_cast<int>(std::floor((hi[a] - origin_[a]) / cell_)) + 1;
  }
  const int ncells = shape_[0] * shape_[1] * shape_[2];
  std::vector<int> cell_of(points_.size());
  start_.assign(static_cast<std::size_t>(ncells) + 1, 0);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    int c = 0;
    for (int a = dim_ - 1; a >= 0; --a) c = c * shape_[a] + cell_coord(points_[i], a);
    cell_of[i] = c;
    ++start_[c + 1];
  }
  for (int c = 0; c < ncells; ++c) start_[c + 1] += start_[c];
  order_.resize(points_.size());
  std::vector<int> fill(start_.begin(), start_.end() - 1);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    order_[fill[cell_of[i]]++] = static_cast<int>(i);
  }
}

int CellList::cell_coord(const Point& x, int axis) const {
  const double f = std::floor((x[axis] - origin_[axis]) / cell_);
  if (f < -1.0) return -2;
  if (f > shape_[axis]) return shape_[axis] + 1;
  return static_cast<int>(f);
}

std::vector<std::pair<int, int>> CellList::pairs_within(double radius) const {
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const int ii = static_cast<int>(i);
    for_each_near(points_[i], radius, [&](int j) {
      if (j > ii) pairs.emplace_back(ii, j);
    });
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

std::vector<std::vector<int>> CellList::neighbour_lists(double radius) const {
  std::vector<std::vector<int>> out(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const int ii = static_cast<int>(i);
    for_each_near(points_[i], radius, [&](int j) {
      if (j != ii) out[i].push_back(j);
    });
    std::sort(out[i].begin(), out[i].end());
  }
  return out;
}

}  // namespace gibbs
