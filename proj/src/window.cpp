#include "gibbs/window.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace gibbs {

Window::Window(int dim, const Point& lower, const Point& upper)
    : dim_(dim), lower_(lower), upper_(upper) {
  if (dim < 1 || dim > kMaxDim) {
    throw std::invalid_argument("Window: dimension must be 1, 2 or 3");
  }
  for (int i = 0; i < dim_; ++i) {
    if (!std::isfinite(lower_[i]) || !std::isfinite(upper_[i]) ||
        !(lower_[i] < upper_[i])) {
      throw std::invalid_argument("Window: degenerate or inverted box " +
                                  to_string());
    }
  }
  for (int i = dim_; i < kMaxDim; ++i) {
    lower_[i] = 0.0;
    upper_[i] = 0.0;
  }
}

Window Window::cube(double n, int dim) {
  Point lo, hi;
  for (int i = 0; i < dim; ++i) {
    lo[i] = -n;
    hi[i] = n;
  }
  return Window(dim, lo, hi);
}

double Window::volume() const {
  double v = 1.0;
  for (int i = 0; i < dim_; ++i) v *= side(i);
  return v;
}

double Window::min_side() const {
  double m = side(0);
  for (int i = 1; i < dim_; ++i) m = std::min(m, side(i));
  return m;
}

bool Window::contains(const Point& p) const {
  for (int i = 0; i < dim_; ++i) {
    if (!(p[i] >= lower_[i] && p[i] < upper_[i])) return false;
  }
  return true;
}

bool Window::contains_closed(const Point& p) const {
  for (int i = 0; i < dim_; ++i) {
    if (!(p[i] >= lower_[i] && p[i] <= upper_[i])) return false;
  }
  return true;
}

Window Window::dilate(double rho) const {
  if (!(rho >= 0.0)) throw std::invalid_argument("Window::dilate: rho < 0");
  Point lo = lower_, hi = upper_;
  for (int i = 0; i < dim_; ++i) {
    lo[i] -= rho;
    hi[i] += rho;
  }
  return Window(dim_, lo, hi);
}

Window Window::erode(double rho) const {
  if (!(rho >= 0.0)) throw std::invalid_argument("Window::erode: rho < 0");
  if (!(2.0 * rho < min_side())) {
    throw std::invalid_argument("Window::erode: erosion empties the window");
  }
  Point lo = lower_, hi = upper_;
  for (int i = 0; i < dim_; ++i) {
    lo[i] += rho;
    hi[i] -= rho;
  }
  return Window(dim_, lo, hi);
}

Window Window::translated(const Point& u) const {
  Point lo = lower_, hi = upper_;
  for (int i = 0; i < dim_; ++i) {
    lo[i] += u[i];
    hi[i] += u[i];
  }
  return Window(dim_, lo, hi);
}

std::string Window::to_string() const {
  std::ostringstream os;
  for (int i = 0; i < dim_; ++i) {
    if (i) os << " x ";
    os << "[" << lower_[i] << ", " << upper_[i] << ")";
  }
  return os.str();
}

}  // namespace gibbs
