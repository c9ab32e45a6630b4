#include "gibbs/minkowski.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "gibbs/cell_list.hpp"

namespace gibbs {
namespace {

constexpr double kTwoPi = 2.0 * M_PI;
// Relative width of the band in which predicates count as ties.
constexpr double kTieTol = 1e-10;

struct Vec {
  double x = 0.0, y = 0.0;
};

Vec operator-(Vec a, Vec b) { return {a.x - b.x, a.y - b.y}; }
Vec operator+(Vec a, Vec b) { return {a.x + b.x, a.y + b.y}; }
Vec operator*(double s, Vec a) { return {s * a.x, s * a.y}; }
double dot(Vec a, Vec b) { return a.x * b.x + a.y * b.y; }
double cross(Vec a, Vec b) { return a.x * b.y - a.y * b.x; }
double norm2(Vec a) { return dot(a, a); }

struct Box {
  double x0, y0, x1, y1;
  bool contains(Vec p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
};

// Centres shifted to a local origin plus the strict-overlap graph (d < 2r).
struct Geometry {
  std::vector<Vec> c;
  Vec origin;
  double r = 0.0;
  std::vector<std::vector<int>> nbrs;
};

Geometry build_geometry(std::span<const Point> centers, double r) {
  Geometry g;
  g.r = r;
  const std::size_t n = centers.size();
  if (n > 0) {
    double sx = 0.0, sy = 0.0;
    for (const auto& p : centers) {
      sx += p[0];
      sy += p[1];
    }
    g.origin = {sx / static_cast<double>(n), sy / static_cast<double>(n)};
  }
  g.c.reserve(n);
  for (const auto& p : centers) g.c.push_back(Vec{p[0], p[1]} - g.origin);
  g.nbrs.assign(n, {});
  const double four_r2 = 4.0 * r * r;
  if (n <= 48) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (norm2(g.c[j] - g.c[i]) < four_r2) {
          g.nbrs[i].push_back(static_cast<int>(j));
          g.nbrs[j].push_back(static_cast<int>(i));
        }
      }
    }
    for (auto& v : g.nbrs) std::sort(v.begin(), v.end());
  } else {
    CellList cells(centers, 2, 2.0 * r);
    auto lists = cells.neighbour_lists(2.0 * r);
    for (std::size_t i = 0; i < n; ++i) {
      for (int j : lists[i]) {
        if (norm2(g.c[j] - g.c[i]) < four_r2) g.nbrs[i].push_back(j);
      }
    }
  }
  return g;
}

// A boundary arc of the union on circle `disc`, angles a < b (radians,
// absolute, possibly beyond 2 pi). `to` is the disc whose covering interval
// starts at b, or -1 for a full free circle.
struct Arc {
  int disc;
  double a, b;
  int to;
};

struct Cover {
  double lo, len;
  int owner;
};

void free_arcs(const Geometry& g, int i, std::vector<Arc>& out) {
  const double r = g.r;
  std::vector<Cover> cov;
  cov.reserve(g.nbrs[i].size());
  for (int j : g.nbrs[i]) {
    const Vec v = g.c[j] - g.c[i];
    const double d = std::sqrt(norm2(v));
    const double phi = std::atan2(v.y, v.x);
    const double alpha = std::acos(std::min(1.0, d / (2.0 * r)));
    double lo = std::fmod(phi - alpha, kTwoPi);
    if (lo < 0.0) lo += kTwoPi;
    cov.push_back({lo, 2.0 * alpha, j});
  }
  if (cov.empty()) {
    out.push_back({i, 0.0, kTwoPi, -1});
    return;
  }
  // Find an angle not covered by any interval: the end of some interval.
  auto covered = [&](double theta, const Cover* self) {
    for (const auto& cv : cov) {
      if (&cv == self) continue;
      double delta = std::fmod(theta - cv.lo, kTwoPi);
      if (delta < 0.0) delta += kTwoPi;
      if (delta < cv.len) return true;
    }
    return false;
  };
  double ref = 0.0;
  bool found = false;
  for (const auto& cv : cov) {
    const double end = std::fmod(cv.lo + cv.len, kTwoPi);
    if (!covered(end, &cv)) {
      ref = end;
      found = true;
      break;
    }
  }
  if (!found) return;
  // Rotate so that `ref` sits at angle 0; no interval then wraps.
  for (auto& cv : cov) {
    double lo = std::fmod(cv.lo - ref, kTwoPi);
    if (lo < 0.0) lo += kTwoPi;
    cv.lo = lo;
  }
  std::sort(cov.begin(), cov.end(), [](const Cover& a, const Cover& b) {
    return a.lo < b.lo || (a.lo == b.lo && a.owner < b.owner);
  });
  double end = cov[0].lo + cov[0].len;
  for (std::size_t k = 1; k < cov.size(); ++k) {
    if (cov[k].lo > end) {
      out.push_back({i, end + ref, cov[k].lo + ref, cov[k].owner});
      end = cov[k].lo + cov[k].len;
    } else {
      end = std::max(end, cov[k].lo + cov[k].len);
    }
  }
  const double wrap_end = cov[0].lo + kTwoPi;
  if (end < wrap_end) out.push_back({i, end + ref, wrap_end + ref, cov[0].owner});
}

double arc_area(Vec c, double r, double a, double b) {
  return 0.5 * (r * r * (b - a) +
                r * (c.x * (std::sin(b) - std::sin(a)) - c.y * (std::cos(b) - std::cos(a))));
}

// Union of closed intervals; returns total length and merged list.
std::vector<std::pair<double, double>> merge_intervals(std::vector<std::pair<double, double>> iv) {
  std::sort(iv.begin(), iv.end());
  std::vector<std::pair<double, double>> out;
  for (const auto& s : iv) {
    if (!out.empty() && s.first <= out.back().second) {
      out.back().second = std::max(out.back().second, s.second);
    } else {
      out.push_back(s);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Euler characteristic through the nerve of the Voronoi-restricted cover
// {V_i n B_i n C}: chi = V - E + T.

// Clip a convex polygon by the half-plane {q : dot(q, n) <= k}.
std::vector<Vec> clip_polygon(const std::vector<Vec>& poly, Vec n, double k) {
  std::vector<Vec> out;
  const std::size_t m = poly.size();
  for (std::size_t s = 0; s < m; ++s) {
    const Vec p = poly[s];
    const Vec q = poly[(s + 1) % m];
    const double fp = dot(p, n) - k;
    const double fq = dot(q, n) - k;
    if (fp <= 0.0) out.push_back(p);
    if ((fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0)) {
      const double t = fp / (fp - fq);
      out.push_back(p + t * (q - p));
    }
  }
  return out;
}

double distance_to_segment2(Vec p, Vec a, Vec b) {
  const Vec ab = b - a;
  const double len2 = norm2(ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return norm2(p - (a + t * ab));
}

bool vertex_present(const Geometry& g, int i, const Box& box) {
  const double r = g.r;
  const Vec ci = g.c[i];
  std::vector<Vec> poly{{box.x0 - ci.x, box.y0 - ci.y},
                        {box.x1 - ci.x, box.y0 - ci.y},
                        {box.x1 - ci.x, box.y1 - ci.y},
                        {box.x0 - ci.x, box.y1 - ci.y}};
  for (int j : g.nbrs[i]) {
    const Vec v = g.c[j] - ci;
    poly = clip_polygon(poly, v, 0.5 * norm2(v));
    if (poly.empty()) return false;
  }
  // Origin (the centre) inside the polygon?
  bool inside = true;
  for (std::size_t s = 0; s < poly.size() && inside; ++s) {
    const Vec a = poly[s];
    const Vec b = poly[(s + 1) % poly.size()];
    if (cross(b - a, Vec{0.0, 0.0} - a) < 0.0) inside = false;
  }
  if (inside) return true;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < poly.size(); ++s) {
    best = std::min(best, distance_to_segment2({0.0, 0.0}, poly[s], poly[(s + 1) % poly.size()]));
  }
  return best < r * r;
}

// Does the Voronoi edge between i and j meet B_i (and the box)?
bool edge_present(const Geometry& g, int i, int j, const Box* box, int& degenerate) {
  const double r = g.r;
  const Vec ci = g.c[i];
  const Vec v = g.c[j] - ci;
  const double d2 = norm2(v);
  const double d = std::sqrt(d2);
  const Vec m = 0.5 * v;
  const Vec u{-v.y / d, v.x / d};
  const double h = std::sqrt(std::max(0.0, r * r - 0.25 * d2));
  double lo = -h, hi = h;
  for (int k : g.nbrs[i]) {
    if (k == j) continue;
    const Vec w = g.c[k] - ci;
    const double a = 2.0 * dot(u, w);
    const double b = norm2(w) - 2.0 * dot(m, w);
    if (a > 0.0) {
      hi = std::min(hi, b / a);
    } else if (a < 0.0) {
      lo = std::max(lo, b / a);
    } else if (b < 0.0) {
      return false;
    }
    if (lo > hi) return false;
  }
  if (box != nullptr) {
    // p(t) = ci + m + t u within [x0, x1] x [y0, y1].
    const Vec base = ci + m;
    auto constrain = [&](double pos, double dir, double low, double high) {
      if (dir > 0.0) {
        lo = std::max(lo, (low - pos) / dir);
        hi = std::min(hi, (high - pos) / dir);
      } else if (dir < 0.0) {
        lo = std::max(lo, (high - pos) / dir);
        hi = std::min(hi, (low - pos) / dir);
      } else if (pos < low || pos > high) {
        lo = 1.0;
        hi = -1.0;
      }
    };
    constrain(base.x, u.x, box->x0, box->x1);
    constrain(base.y, u.y, box->y0, box->y1);
  }
  const double width = hi - lo;
  if (std::fabs(width) <= kTieTol * r) {
    ++degenerate;
    return false;
  }
  return width > 0.0;
}

bool triangle_present(const Geometry& g, int i, int j, int k, const Box* box, int& degenerate) {
  const double r = g.r;
  const Vec ci = g.c[i];
  const Vec a = g.c[j] - ci;
  const Vec b = g.c[k] - ci;
  const double den = 2.0 * cross(a, b);
  const double scale = norm2(a) + norm2(b);
  if (std::fabs(den) <= kTieTol * scale) return false;  // collinear
  const double a2 = norm2(a), b2 = norm2(b);
  const Vec cc{(b.y * a2 - a.y * b2) / den, (a.x * b2 - b.x * a2) / den};
  const double rc2 = norm2(cc);
  if (std::fabs(rc2 - r * r) <= kTieTol * r * r) ++degenerate;
  if (!(rc2 < r * r)) return false;
  if (box != nullptr && !box->contains(ci + cc)) return false;
  for (int l : g.nbrs[i]) {
    if (l == j || l == k) continue;
    const double dl2 = norm2(g.c[l] - ci - cc);
    if (dl2 < rc2 * (1.0 - kTieTol)) return false;
    if (dl2 <= rc2 * (1.0 + kTieTol)) {
      // Cocircular: only the three smallest indices represent the vertex.
      ++degenerate;
      if (l < k) return false;
    }
  }
  return true;
}

long nerve_euler(const Geometry& g, const Box* box, int& degenerate) {
  const int n = static_cast<int>(g.c.size());
  long vertices = 0, edges = 0, triangles = 0;
  for (int i = 0; i < n; ++i) {
    if (box == nullptr || vertex_present(g, i, *box)) ++vertices;
  }
  for (int i = 0; i < n; ++i) {
    const auto& ni = g.nbrs[i];
    for (std::size_t p = 0; p < ni.size(); ++p) {
      const int j = ni[p];
      if (j <= i) continue;
      if (edge_present(g, i, j, box, degenerate)) ++edges;
      for (std::size_t q = p + 1; q < ni.size(); ++q) {
        const int k = ni[q];
        if (!std::binary_search(g.nbrs[j].begin(), g.nbrs[j].end(), k)) continue;
        if (triangle_present(g, i, j, k, box, degenerate)) ++triangles;
      }
    }
  }
  return vertices - edges + triangles;
}

long count_components(const Geometry& g) {
  const std::size_t n = g.c.size();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  long comps = static_cast<long>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int j : g.nbrs[i]) {
      const int a = find(static_cast<int>(i)), b = find(j);
      if (a != b) {
        parent[a] = b;
        --comps;
      }
    }
  }
  return comps;
}

void require_planar(std::span<const Point> centers, double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw std::invalid_argument("disc union: radius must be finite and > 0");
  }
  (void)centers;
}

}  // namespace

DiscUnion::DiscUnion(Configuration c, double r) : centers(std::move(c)), radius(r) {
  if (centers.dim() != 2) throw std::invalid_argument("DiscUnion: centres must be planar");
  require_planar(centers.points(), radius);
}

MinkowskiSummary minkowski_functionals(std::span<const Point> centers, double radius) {
  require_planar(centers, radius);
  MinkowskiSummary out;
  if (centers.empty()) return out;
  const Geometry g = build_geometry(centers, radius);
  std::vector<Arc> arcs;
  for (int i = 0; i < static_cast<int>(g.c.size()); ++i) {
    arcs.clear();
    free_arcs(g, i, arcs);
    for (const auto& arc : arcs) {
      out.area += arc_area(g.c[i], radius, arc.a, arc.b);
      out.perimeter += radius * (arc.b - arc.a);
    }
  }
  out.euler = nerve_euler(g, nullptr, out.degeneracies);
  out.n_components = count_components(g);
  out.n_holes = out.n_components - out.euler;
  if (out.n_holes < 0) ++out.degeneracies;
  return out;
}

MinkowskiSummary minkowski_functionals(const DiscUnion& du) {
  MinkowskiSummary s = minkowski_functionals(du.centers.points(), du.radius);
#ifndef NDEBUG
  if (s.degeneracies == 0 && topological_margin(du) > 1e-6 * du.radius) {
    assert(euler_gauss_bonnet(du) == s.euler);
  }
#endif
  return s;
}

ClippedFunctionals clipped_functionals(std::span<const Point> centers, double radius,
                                       const Window& box) {
  require_planar(centers, radius);
  if (box.dim() != 2) throw std::invalid_argument("clipped_functionals: box must be planar");
  ClippedFunctionals out;
  // Only discs meeting the box matter.
  std::vector<Point> local;
  const double r2 = radius * radius;
  for (const auto& p : centers) {
    const double dx = std::max({box.lower()[0] - p[0], 0.0, p[0] - box.upper()[0]});
    const double dy = std::max({box.lower()[1] - p[1], 0.0, p[1] - box.upper()[1]});
    if (dx * dx + dy * dy < r2) local.push_back(p);
  }
  if (local.empty()) return out;
  const Geometry g = build_geometry(local, radius);
  const Box bx{box.lower()[0] - g.origin.x, box.lower()[1] - g.origin.y,
               box.upper()[0] - g.origin.x, box.upper()[1] - g.origin.y};

  // Circular part of the boundary inside the box.
  std::vector<Arc> arcs;
  std::vector<double> cuts;
  for (int i = 0; i < static_cast<int>(g.c.size()); ++i) {
    const Vec c = g.c[i];
    arcs.clear();
    free_arcs(g, i, arcs);
    for (const auto& arc : arcs) {
      cuts.assign({arc.a, arc.b});
      auto add_cut = [&](double theta) {
        double t = theta;
        while (t <= arc.a) t += kTwoPi;
        while (t - kTwoPi > arc.a) t -= kTwoPi;
        if (t < arc.b) cuts.push_back(t);
      };
      for (double xl : {bx.x0, bx.x1}) {
        const double cs = (xl - c.x) / radius;
        if (std::fabs(cs) < 1.0) {
          const double t = std::acos(cs);
          add_cut(t);
          add_cut(-t);
        }
      }
      for (double yl : {bx.y0, bx.y1}) {
        const double sn = (yl - c.y) / radius;
        if (std::fabs(sn) < 1.0) {
          const double t = std::asin(sn);
          add_cut(t);
          add_cut(M_PI - t);
        }
      }
      std::sort(cuts.begin(), cuts.end());
      for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const double a = cuts[s], b = cuts[s + 1];
        if (!(b > a)) continue;
        const double mid = 0.5 * (a + b);
        const Vec p{c.x + radius * std::cos(mid), c.y + radius * std::sin(mid)};
        if (!bx.contains(p)) continue;
        out.area += arc_area(c, radius, a, b);
        out.arc_length += radius * (b - a);
      }
    }
  }

  // Straight part: the box edges covered by L, traversed counter-clockwise.
  auto covered = [&](bool horizontal, double level, double from, double to) {
    std::vector<std::pair<double, double>> iv;
    for (const auto& c : g.c) {
      const double off = horizontal ? c.y - level : c.x - level;
      if (std::fabs(off) >= radius) continue;
      const double w = std::sqrt(r2 - off * off);
      const double mid = horizontal ? c.x : c.y;
      const double lo = std::max(from, mid - w), hi = std::min(to, mid + w);
      if (hi > lo) iv.emplace_back(lo, hi);
    }
    return merge_intervals(std::move(iv));
  };
  auto total = [](const std::vector<std::pair<double, double>>& iv) {
    double s = 0.0;
    for (const auto& p : iv) s += p.second - p.first;
    return s;
  };
  const auto bottom = covered(true, bx.y0, bx.x0, bx.x1);
  const auto top = covered(true, bx.y1, bx.x0, bx.x1);
  const auto left = covered(false, bx.x0, bx.y0, bx.y1);
  const auto right = covered(false, bx.x1, bx.y0, bx.y1);
  const double lb = total(bottom), lt = total(top), ll = total(left), lr = total(right);
  out.edge_length = lb + lt + ll + lr;
  out.area += 0.5 * (-bx.y0 * lb + bx.x1 * lr + bx.y1 * lt - bx.x0 * ll);

  out.euler = nerve_euler(g, &bx, out.degeneracies);

  // Components on the double edge {x0} x [y0, y1] u [x0, x1] x {y0}, walked
  // from the top-left corner down and then right.
  const double height = bx.y1 - bx.y0;
  std::vector<std::pair<double, double>> walk;
  for (const auto& s : left) walk.emplace_back(bx.y1 - s.second, bx.y1 - s.first);
  for (const auto& s : bottom) walk.emplace_back(height + s.first - bx.x0, height + s.second - bx.x0);
  // Left and bottom pieces meet only through the shared corner.
  out.n_cc_double_edge = static_cast<long>(merge_intervals(std::move(walk)).size());
  return out;
}

ClippedFunctionals clipped_functionals(const DiscUnion& du, const Window& box) {
  return clipped_functionals(du.centers.points(), du.radius, box);
}

long euler_gauss_bonnet(const DiscUnion& du) {
  if (du.centers.empty()) return 0;
  const Geometry g = build_geometry(du.centers.points(), du.radius);
  const double r = du.radius;
  double total = 0.0;
  std::vector<Arc> arcs;
  for (int i = 0; i < static_cast<int>(g.c.size()); ++i) {
    arcs.clear();
    free_arcs(g, i, arcs);
    for (const auto& arc : arcs) {
      total += arc.b - arc.a;
      if (arc.to < 0) continue;
      const Vec p{g.c[i].x + r * std::cos(arc.b), g.c[i].y + r * std::sin(arc.b)};
      const Vec a = p - g.c[i];
      const Vec b = p - g.c[arc.to];
      const double cosang = dot(a, b) / std::sqrt(norm2(a) * norm2(b));
      total -= std::acos(std::clamp(cosang, -1.0, 1.0));
    }
  }
  return std::lround(total / kTwoPi);
}

double topological_margin(const DiscUnion& du) {
  const auto pts = du.centers.points();
  const double r = du.radius;
  double margin = std::numeric_limits<double>::infinity();
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dij = distance(pts[i], pts[j]);
      margin = std::min(margin, std::fabs(dij - 2.0 * r));
      if (dij >= 2.0 * r) continue;
      for (std::size_t k = j + 1; k < n; ++k) {
        if (distance(pts[i], pts[k]) >= 2.0 * r || distance(pts[j], pts[k]) >= 2.0 * r) continue;
        const Vec a{pts[j][0] - pts[i][0], pts[j][1] - pts[i][1]};
        const Vec b{pts[k][0] - pts[i][0], pts[k][1] - pts[i][1]};
        const double den = 2.0 * cross(a, b);
        if (den == 0.0) continue;
        const Vec cc{(b.y * norm2(a) - a.y * norm2(b)) / den, (a.x * norm2(b) - b.x * norm2(a)) / den};
        margin = std::min(margin, std::fabs(std::sqrt(norm2(cc)) - r));
      }
    }
  }
  return margin;
}

MinkowskiSummary raster_oracle(const DiscUnion& du, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("raster_oracle: h must be > 0");
  MinkowskiSummary out;
  const auto pts = du.centers.points();
  if (pts.empty()) return out;
  const double r = du.radius;
  double xmin = pts[0][0], xmax = xmin, ymin = pts[0][1], ymax = ymin;
  for (const auto& p : pts) {
    xmin = std::min(xmin, p[0]);
    xmax = std::max(xmax, p[0]);
    ymin = std::min(ymin, p[1]);
    ymax = std::max(ymax, p[1]);
  }
  const double pad = r + 3.0 * h;
  const double x0 = xmin - pad, y0 = ymin - pad;
  const int nx = static_cast<int>(std::ceil((xmax - xmin + 2.0 * pad) / h));
  const int ny = static_cast<int>(std::ceil((ymax - ymin + 2.0 * pad) / h));
  const double far = -std::numeric_limits<double>::max();
  std::vector<double> field(static_cast<std::size_t>(nx) * ny, far);
  auto at = [&](int ix, int iy) -> double& { return field[static_cast<std::size_t>(iy) * nx + ix]; };
  for (const auto& p : pts) {
    const int ix0 = std::max(0, static_cast<int>(std::floor((p[0] - r - 2.0 * h - x0) / h)));
    const int ix1 = std::min(nx - 1, static_cast<int>(std::ceil((p[0] + r + 2.0 * h - x0) / h)));
    const int iy0 = std::max(0, static_cast<int>(std::floor((p[1] - r - 2.0 * h - y0) / h)));
    const int iy1 = std::min(ny - 1, static_cast<int>(std::ceil((p[1] + r + 2.0 * h - y0) / h)));
    for (int iy = iy0; iy <= iy1; ++iy) {
      const double dy = y0 + (iy + 0.5) * h - p[1];
      for (int ix = ix0; ix <= ix1; ++ix) {
        const double dx = x0 + (ix + 0.5) * h - p[0];
        double& f = at(ix, iy);
        f = std::max(f, r - std::sqrt(dx * dx + dy * dy));
      }
    }
  }
  std::vector<char> inside(field.size());
  long count = 0;
  for (std::size_t k = 0; k < field.size(); ++k) {
    inside[k] = field[k] >= 0.0;
    count += inside[k];
  }
  out.area = static_cast<double>(count) * h * h;

  // Flood fill labelling; `diag` selects 8-connectivity. A background
  // component counts as a hole only if it reaches farther than one pixel
  // diagonal from L: thinner pockets are sampling artefacts at the cusps
  // where two circles cross.
  const double min_depth = std::sqrt(2.0) * h;
  auto label = [&](bool fg, bool diag) {
    std::vector<char> seen(field.size(), 0);
    std::vector<int> stack;
    long comps = 0;
    for (int iy = 0; iy < ny; ++iy) {
      for (int ix = 0; ix < nx; ++ix) {
        const std::size_t k = static_cast<std::size_t>(iy) * nx + ix;
        if (seen[k] || static_cast<bool>(inside[k]) != fg) continue;
        bool touches_border = false;
        double depth = 0.0;
        stack.assign(1, static_cast<int>(k));
        seen[k] = 1;
        while (!stack.empty()) {
          const int cur = stack.back();
          stack.pop_back();
          const int cx = cur % nx, cy = cur / nx;
          if (cx == 0 || cy == 0 || cx == nx - 1 || cy == ny - 1) touches_border = true;
          depth = std::max(depth, -field[static_cast<std::size_t>(cur)]);
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              if ((dx == 0 && dy == 0) || (!diag && dx != 0 && dy != 0)) continue;
              const int qx = cx + dx, qy = cy + dy;
              if (qx < 0 || qy < 0 || qx >= nx || qy >= ny) continue;
              const std::size_t q = static_cast<std::size_t>(qy) * nx + qx;
              if (seen[q] || static_cast<bool>(inside[q]) != fg) continue;
              seen[q] = 1;
              stack.push_back(static_cast<int>(q));
            }
          }
        }
        if (!fg && (touches_border || depth <= min_depth)) continue;
        ++comps;
      }
    }
    return comps;
  };
  out.n_components = label(true, true);
  out.n_holes = label(false, false);
  out.euler = out.n_components - out.n_holes;

  // Marching squares on the zero level set of the field.
  double perim = 0.0;
  for (int iy = 0; iy + 1 < ny; ++iy) {
    for (int ix = 0; ix + 1 < nx; ++ix) {
      const double f00 = at(ix, iy), f10 = at(ix + 1, iy);
      const double f01 = at(ix, iy + 1), f11 = at(ix + 1, iy + 1);
      const bool b00 = f00 >= 0.0, b10 = f10 >= 0.0, b01 = f01 >= 0.0, b11 = f11 >= 0.0;
      if (b00 == b10 && b00 == b01 && b00 == b11) continue;
      // Crossing points on the four cell edges, in cell-local units.
      std::vector<Vec> pts4;
      auto cross_at = [](double fa, double fb) { return fa / (fa - fb); };
      if (b00 != b10) pts4.push_back({cross_at(f00, f10), 0.0});
      if (b10 != b11) pts4.push_back({1.0, cross_at(f10, f11)});
      if (b01 != b11) pts4.push_back({cross_at(f01, f11), 1.0});
      if (b00 != b01) pts4.push_back({0.0, cross_at(f00, f01)});
      if (pts4.size() == 2) {
        perim += std::sqrt(norm2(pts4[0] - pts4[1]));
      } else if (pts4.size() == 4) {
        // Saddle: the centre value decides which corners connect.
        const bool centre_in = 0.25 * (f00 + f10 + f01 + f11) >= 0.0;
        if (centre_in == b00) {
          perim += std::sqrt(norm2(pts4[0] - pts4[1])) + std::sqrt(norm2(pts4[2] - pts4[3]));
        } else {
          perim += std::sqrt(norm2(pts4[0] - pts4[3])) + std::sqrt(norm2(pts4[1] - pts4[2]));
        }
      }
    }
  }
  out.perimeter = perim * h;
  return out;
}

namespace {

struct Run {
  double a, b;
  int label;
};

ScanlineTopology scanline_impl(const DiscUnion& du, double h, const Window* box) {
  if (!(h > 0.0)) throw std::invalid_argument("scanline_topology: h must be > 0");
  const double r = du.radius;
  std::vector<Point> c(du.centers.begin(), du.centers.end());
  ScanlineTopology out;
  if (c.empty() && !box) return out;
  std::sort(c.begin(), c.end(), [](const Point& p, const Point& q) { return p[1] < q[1]; });
  std::vector<double> cy;
  for (const auto& p : c) cy.push_back(p[1]);

  const double inf = std::numeric_limits<double>::infinity();
  double y_lo, y_hi, x_lo = -inf, x_hi = inf;
  if (box) {
    x_lo = box->lower()[0];
    x_hi = box->upper()[0];
    y_lo = box->lower()[1];
    y_hi = box->upper()[1];
  } else {
    y_lo = cy.front() - r - h;
    y_hi = cy.back() + r + h;
  }
  const long rows = std::max(2L, static_cast<long>(std::ceil((y_hi - y_lo) / h)));
  const double step = (y_hi - y_lo) / static_cast<double>(rows);

  std::vector<int> parent;
  std::vector<char> fg, exterior;
  std::vector<double> depth;
  auto find = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  auto make = [&](bool is_fg) {
    parent.push_back(static_cast<int>(parent.size()));
    fg.push_back(is_fg);
    exterior.push_back(0);
    depth.push_back(0.0);
    return static_cast<int>(parent.size()) - 1;
  };
  auto unite = [&](int i, int j) {
    i = find(i);
    j = find(j);
    if (i == j) return i;
    if (j < i) std::swap(i, j);
    parent[j] = i;
    exterior[i] |= exterior[j];
    depth[i] = std::max(depth[i], depth[j]);
    return i;
  };
  // Runs of the same kind on adjacent lines connect when they overlap.
  auto link = [&](std::vector<Run>& cur, const std::vector<Run>& prev, bool is_fg) {
    std::size_t j = 0;
    for (auto& run : cur) {
      run.label = -1;
      while (j < prev.size() && prev[j].b <= run.a) ++j;
      for (std::size_t k = j; k < prev.size() && prev[k].a < run.b; ++k) {
        if (std::max(prev[k].a, run.a) < std::min(prev[k].b, run.b)) {
          run.label = run.label < 0 ? find(prev[k].label) : unite(run.label, prev[k].label);
        }
      }
      if (run.label < 0) run.label = make(is_fg);
    }
  };
  auto dist_to_union = [&](double x, double y, double reach) {
    const auto lo = std::lower_bound(cy.begin(), cy.end(), y - reach) - cy.begin();
    const auto hi = std::upper_bound(cy.begin(), cy.end(), y + reach) - cy.begin();
    double d = inf;
    for (auto i = lo; i < hi; ++i) d = std::min(d, std::hypot(x - c[i][0], y - c[i][1]) - r);
    return d;
  };

  std::vector<Run> prev_fg, prev_bg, cur_fg, cur_bg;
  std::vector<std::pair<double, double>> chords;
  for (long k = 0; k < rows; ++k) {
    const double y = y_lo + (static_cast<double>(k) + 0.5) * step;
    chords.clear();
    const auto lo = std::upper_bound(cy.begin(), cy.end(), y - r) - cy.begin();
    const auto hi = std::lower_bound(cy.begin(), cy.end(), y + r) - cy.begin();
    for (auto i = lo; i < hi; ++i) {
      const double dy = y - c[i][1];
      const double w = std::sqrt(std::max(0.0, r * r - dy * dy));
      const double a = std::max(c[i][0] - w, x_lo), b = std::min(c[i][0] + w, x_hi);
      if (a < b) chords.emplace_back(a, b);
    }
    std::sort(chords.begin(), chords.end());
    cur_fg.clear();
    for (const auto& [a, b] : chords) {
      if (!cur_fg.empty() && a <= cur_fg.back().b) {
        cur_fg.back().b = std::max(cur_fg.back().b, b);
      } else {
        cur_fg.push_back(Run{a, b, -1});
      }
    }
    cur_bg.clear();
    double start = x_lo;
    for (const auto& f : cur_fg) {
      if (f.a > start) cur_bg.push_back(Run{start, f.a, -1});
      start = f.b;
    }
    if (start < x_hi) cur_bg.push_back(Run{start, x_hi, -1});

    link(cur_fg, prev_fg, true);
    link(cur_bg, prev_bg, false);
    for (const auto& run : cur_bg) {
      const int root = find(run.label);
      if (k == 0 || k == rows - 1 || run.a == x_lo || run.b == x_hi) exterior[root] = 1;
      if (exterior[root] || depth[root] > h) continue;
      const double reach = r + 0.5 * (run.b - run.a) + step;
      for (int j = 1; j < 8; ++j) {
        const double x = run.a + (run.b - run.a) * j / 8.0;
        depth[root] = std::max(depth[root], dist_to_union(x, y, reach));
      }
    }
    std::swap(prev_fg, cur_fg);
    std::swap(prev_bg, cur_bg);
  }
  for (int i = 0; i < static_cast<int>(parent.size()); ++i) {
    if (find(i) != i) continue;
    if (fg[i]) {
      ++out.n_components;
    } else if (!exterior[i] && depth[i] > h) {
      ++out.n_holes;
    }
  }
  out.euler = out.n_components - out.n_holes;
  return out;
}

}  // namespace

ScanlineTopology scanline_topology(const DiscUnion& du, double h) { return scanline_impl(du, h, nullptr); }

ScanlineTopology scanline_topology(const DiscUnion& du, double h, const Window& box) {
  if (box.dim() != 2) throw std::invalid_argument("scanline_topology: box must be planar");
  return scanline_impl(du, h, &box);
}

}  // namespace gibbs
