#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gibbs/point.hpp"
#include "gibbs/window.hpp"

namespace gibbs {

/// A finite set of distinct points in R^d, stored in canonical
/// (lexicographic) order. Immutable after construction.
class Configuration {
 public:
  explicit Configuration(int dim = 2);
  /// Sorts the points; throws std::invalid_argument on duplicates or
  /// non-finite coordinates.
  Configuration(int dim, std::vector<Point> points);

  int dim() const { return dim_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  std::span<const Point> points() const { return points_; }
  const Point& operator[](std::size_t i) const { return points_[i]; }
  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }

  bool contains(const Point& p) const;
  std::size_t count_in(const Window& w) const;

  /// omega union {x}; throws if x is already present.
  Configuration with(const Point& x) const;
  /// omega minus {x}; throws if x is absent.
  Configuration without(const Point& x) const;
  Configuration translated(const Point& u) const;
  /// Union with a disjoint configuration; throws on shared points.
  Configuration merged(const Configuration& other) const;

  bool operator==(const Configuration&) const = default;

 private:
  int dim_;
  std::vector<Point> points_;
};

/// Points of omega inside the half-open window.
Configuration restrict(const Configuration& omega, const Window& window);
/// Points of omega inside the closed window.
Configuration restrict_closed(const Configuration& omega, const Window& window);

/// Plain-text serialization: a `d N` header line followed by N lines of d
/// coordinates printed with 17 significant digits.
void write_configuration(std::ostream& out, const Configuration& omega);
Configuration read_configuration(std::istream& in);
void save_configuration(const std::string& path, const Configuration& omega);
Configuration load_configuration(const std::string& path);

/// `%.17g` rendering; round-trips every finite double exactly.
std::string format_double(double v);

}  // namespace gibbs
