#pragma once

#include <string>

#include "gibbs/point.hpp"

namespace gibbs {

/// Axis-aligned box [lower, upper) in R^d.
///
/// Membership is lower-inclusive and upper-exclusive on every axis, so the
/// unit cubes of an integer grid partition space: every point belongs to
/// exactly one cube. `contains_closed` is the closed-box test used for halos.
class Window {
 public:
  Window(int dim, const Point& lower, const Point& upper);

  /// The centred cube [-n, n]^d.
  static Window cube(double n, int dim);

  int dim() const { return dim_; }
  const Point& lower() const { return lower_; }
  const Point& upper() const { return upper_; }

  double side(int axis) const { return upper_[axis] - lower_[axis]; }
  double volume() const;
  double min_side() const;

  bool contains(const Point& p) const;
  bool contains_closed(const Point& p) const;

  /// Grow every face outward by rho >= 0.
  Window dilate(double rho) const;
  /// Shrink every face inward by rho; throws if the box would degenerate.
  Window erode(double rho) const;
  Window translated(const Point& u) const;

  bool operator==(const Window&) const = default;

  std::string to_string() const;

 private:
  int dim_;
  Point lower_;
  Point upper_;
};

}  // namespace gibbs
