#include "gibbs/configuration.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace gibbs {

Configuration::Configuration(int dim) : dim_(dim) {
  if (dim < 1 || dim > kMaxDim) {
    throw std::invalid_argument("Configuration: dimension must be 1, 2 or 3");
  }
}

Configuration::Configuration(int dim, std::vector<Point> points)
    : Configuration(dim) {
  for (auto& p : points) {
    if (!p.finite()) {
      throw std::invalid_argument("Configuration: non-finite coordinate");
    }
    for (int i = dim; i < kMaxDim; ++i) p[i] = 0.0;
  }
  std::sort(points.begin(), points.end());
  if (std::adjacent_find(points.begin(), points.end()) != points.end()) {
    throw std::invalid_argument("Configuration: duplicate point");
  }
  points_ = std::move(points);
}

bool Configuration::contains(const Point& p) const {
  return std::binary_search(points_.begin(), points_.end(), p);
}

std::size_t Configuration::count_in(const Window& w) const {
  return static_cast<std::size_t>(
      std::count_if(points_.begin(), points_.end(),
                    [&](const Point& p) { return w.contains(p); }));
}

Configuration Configuration::with(const Point& x) const {
  if (!x.finite()) throw std::invalid_argument("Configuration::with: non-finite");
  Point q = x;
  for (int i = dim_; i < kMaxDim; ++i) q[i] = 0.0;
  auto it = std::lower_bound(points_.begin(), points_.end(), q);
  if (it != points_.end() && *it == q) {
    throw std::invalid_argument("Configuration::with: duplicate point");
  }
  Configuration out(dim_);
  out.points_.reserve(points_.size() + 1);
  out.points_.insert(out.points_.end(), points_.begin(), it);
  out.points_.push_back(q);
  out.points_.insert(out.points_.end(), it, points_.end());
  return out;
}

Configuration Configuration::without(const Point& x) const {
  auto it = std::lower_bound(points_.begin(), points_.end(), x);
  if (it == points_.end() || !(*it == x)) {
    throw std::invalid_argument("Configuration::without: point not present");
  }
  Configuration out(dim_);
  out.points_.reserve(points_.size() - 1);
  out.points_.insert(out.points_.end(), points_.begin(), it);
  out.points_.insert(out.points_.end(), it + 1, points_.end());
  return out;
}

Configuration Configuration::translated(const Point& u) const {
  std::vector<Point> pts;
  pts.reserve(points_.size());
  for (const auto& p : points_) pts.push_back(p + u);
  return Configuration(dim_, std::move(pts));
}

Configuration Configuration::merged(const Configuration& other) const {
  if (other.dim_ != dim_) {
    throw std::invalid_argument("Configuration::merged: dimension mismatch");
  }
  std::vector<Point> pts;
  pts.reserve(points_.size() + other.points_.size());
  std::merge(points_.begin(), points_.end(), other.points_.begin(),
             other.points_.end(), std::back_inserter(pts));
  return Configuration(dim_, std::move(pts));
}

Configuration restrict(const Configuration& omega, const Window& window) {
  std::vector<Point> pts;
  for (const auto& p : omega) {
    if (window.contains(p)) pts.push_back(p);
  }
  Configuration out(omega.dim(), std::move(pts));
  return out;
}

Configuration restrict_closed(const Configuration& omega, const Window& window) {
  std::vector<Point> pts;
  for (const auto& p : omega) {
    if (window.contains_closed(p)) pts.push_back(p);
  }
  return Configuration(omega.dim(), std::move(pts));
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_configuration(std::ostream& out, const Configuration& omega) {
  out << omega.dim() << ' ' << omega.size() << '\n';
  for (const auto& p : omega) {
    for (int i = 0; i < omega.dim(); ++i) {
      if (i) out << ' ';
      out << format_double(p[i]);
    }
    out << '\n';
  }
}

Configuration read_configuration(std::istream& in) {
  int dim = 0;
  long long n = -1;
  if (!(in >> dim >> n) || dim < 1 || dim > kMaxDim || n < 0) {
    throw std::runtime_error("configuration file: bad `d N` header");
  }
  std::vector<Point> pts(static_cast<std::size_t>(n));
  for (long long k = 0; k < n; ++k) {
    for (int i = 0; i < dim; ++i) {
      if (!(in >> pts[k][i])) {
        throw std::runtime_error("configuration file: truncated at point " +
                                 std::to_string(k));
      }
    }
  }
  return Configuration(dim, std::move(pts));
}

void save_configuration(const std::string& path, const Configuration& omega) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_configuration(out, omega);
}

Configuration load_configuration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return read_configuration(in);
}

}  // namespace gibbs
