#pragma once

#include <array>
#include <cmath>
#include <compare>

namespace gibbs {

/// Spatial dimensions supported by the library. Quermass models require 2.
inline constexpr int kMaxDim = 3;

/// A point in R^d, d <= 3. Unused trailing coordinates are zero so that
/// lexicographic comparison over the full array is the canonical order.
struct Point {
  std::array<double, kMaxDim> x{};

  Point() = default;
  explicit Point(double a) : x{a, 0.0, 0.0} {}
  Point(double a, double b) : x{a, b, 0.0} {}
  Point(double a, double b, double c) : x{a, b, c} {}

  double& operator[](int i) { return x[i]; }
  double operator[](int i) const { return x[i]; }

  auto operator<=>(const Point&) const = default;

  bool finite() const {
    return std::isfinite(x[0]) && std::isfinite(x[1]) && std::isfinite(x[2]);
  }
};

inline Point operator+(const Point& a, const Point& b) {
  return Point(a[0] + b[0], a[1] + b[1], a[2] + b[2]);
}

inline Point operator-(const Point& a, const Point& b) {
  return Point(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
}

inline double squared_distance(const Point& a, const Point& b) {
  const double d0 = a[0] - b[0];
  const double d1 = a[1] - b[1];
  const double d2 = a[2] - b[2];
  return d0 * d0 + d1 * d1 + d2 * d2;
}

inline double distance(const Point& a, const Point& b) {
  return std::sqrt(squared_distance(a, b));
}

}  // namespace gibbs
