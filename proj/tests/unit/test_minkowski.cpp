#include <cmath>
#include <stdexcept>
#include <cstdio>

#include "doctest.h"
#include "gibbs/minkowski.hpp"
#include "gibbs/random.hpp"

using namespace gibbs;

namespace {

// Area of the intersection of two radius-r discs at centre distance d.
double lens(double d, double r) {
  if (d >= 2.0 * r) return 0.0;
  return 2.0 * r * r * std::acos(d / (2.0 * r)) - 0.5 * d * std::sqrt(4.0 * r * r - d * d);
}

DiscUnion random_union(std::uint64_t seed, int n, double side, double r) {
  Rng rng(Seed{seed, 1});
  std::vector<Point> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(rng.uniform(0, side), rng.uniform(0, side));
  return DiscUnion(Configuration(2, pts), r);
}

}  // namespace

TEST_CASE("single and double disc closed forms") {
  const auto one = minkowski_functionals(DiscUnion(Configuration(2, {Point(0.3, -0.2)}), 1.0));
  CHECK(std::fabs(one.area - M_PI) < 1e-12);
  CHECK(std::fabs(one.perimeter - 2 * M_PI) < 1e-12);
  CHECK(one.euler == 1);

  const auto two = minkowski_functionals(DiscUnion(Configuration(2, {Point(0, 0), Point(1, 0)}), 1.0));
  CHECK(std::fabs(two.area - (2 * M_PI - lens(1.0, 1.0))) < 1e-12);
  CHECK(std::fabs(two.area - 5.0548) < 1e-4);
  CHECK(std::fabs(two.perimeter - 8 * M_PI / 3) < 1e-12);
  CHECK(two.euler == 1);
  CHECK(two.n_components == 1);

  const auto apart = minkowski_functionals(DiscUnion(Configuration(2, {Point(0, 0), Point(2.5, 0)}), 1.0));
  CHECK(std::fabs(apart.area - 2 * M_PI) < 1e-12);
  CHECK(std::fabs(apart.perimeter - 4 * M_PI) < 1e-12);
  CHECK(apart.euler == 2);

  const auto empty = minkowski_functionals(DiscUnion(Configuration(2), 1.0));
  CHECK(empty.area == 0.0);
  CHECK(empty.euler == 0);
}

TEST_CASE("equilateral triangle with a hole") {
  const double s = 1.9;
  const DiscUnion du(Configuration(2, {Point(0, 0), Point(s, 0), Point(s / 2, s * std::sqrt(3.0) / 2)}), 1.0);
  const auto m = minkowski_functionals(du);
  CHECK(m.n_components == 1);
  CHECK(m.n_holes == 1);
  CHECK(m.euler == 0);
  CHECK(euler_gauss_bonnet(du) == 0);
  const auto ras = raster_oracle(du, 2e-3);
  CHECK(ras.euler == 0);
  CHECK(ras.n_holes == 1);
  // Shrinking the side closes the hole.
  const double t = 1.6;
  const DiscUnion closed(Configuration(2, {Point(0, 0), Point(t, 0), Point(t / 2, t * std::sqrt(3.0) / 2)}), 1.0);
  CHECK(minkowski_functionals(closed).euler == 1);
}

TEST_CASE("ring of discs has one hole") {
  std::vector<Point> ring;
  for (int k = 0; k < 12; ++k) {
    const double a = 2 * M_PI * k / 12;
    ring.emplace_back(3 * std::cos(a), 3 * std::sin(a));
  }
  const DiscUnion du(Configuration(2, ring), 1.0);
  const auto m = minkowski_functionals(du);
  CHECK(m.euler == 0);
  CHECK(m.n_holes == 1);
  CHECK(euler_gauss_bonnet(du) == 0);
}

TEST_CASE("degenerate configurations follow the shrunk-radius convention") {
  // Tangent discs are disjoint.
  const auto tangent = minkowski_functionals(DiscUnion(Configuration(2, {Point(0, 0), Point(2, 0)}), 1.0));
  CHECK(tangent.euler == 2);
  CHECK(tangent.n_components == 2);
  // Four cocircular centres on a square of half-diagonal below r: a single
  // filled component.
  const double h = 0.6;
  const DiscUnion sq(Configuration(2, {Point(-h, -h), Point(h, -h), Point(h, h), Point(-h, h)}), 1.0);
  const auto m = minkowski_functionals(sq);
  CHECK(m.euler == 1);
  CHECK(m.degeneracies > 0);
  // Square whose circumradius exceeds r: a hole.
  const double g = 0.75;
  const DiscUnion holed(Configuration(2, {Point(-g, -g), Point(g, -g), Point(g, g), Point(-g, g)}), 1.0);
  CHECK(minkowski_functionals(holed).euler == 0);
  CHECK(raster_oracle(holed, 2e-3).euler == 0);
}

TEST_CASE("raster oracle single disc") {
  const DiscUnion du(Configuration(2, {Point(0, 0)}), 1.0);
  const auto r = raster_oracle(du, 1e-3);
  CHECK(std::fabs(r.area - M_PI) < 1e-2);
  CHECK(std::fabs(r.perimeter - 2 * M_PI) < 1e-2);
  CHECK(r.euler == 1);
  const auto e = raster_oracle(DiscUnion(Configuration(2), 1.0), 1e-2);
  CHECK(e.area == 0.0);
  CHECK(e.euler == 0);
}

TEST_CASE("area and perimeter agree with the pixel raster") {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const auto du = random_union(trial, 10, 4.0, 0.6);
    const auto exact = minkowski_functionals(du);
    const auto ras = raster_oracle(du, 4e-3);
    CHECK(exact.euler == euler_gauss_bonnet(du));
    CHECK(std::fabs(exact.area - ras.area) < 0.02);
    CHECK(std::fabs(exact.perimeter - ras.perimeter) < 0.01 * exact.perimeter);
  }
}

TEST_CASE("topology agrees with the scanline oracle on random unions") {
  const double h = 1e-5;
  int mismatches = 0;
  for (std::uint64_t trial = 0; trial < 200; ++trial) {
    const auto du = random_union(trial, 10, 4.0, 0.5);
    const auto exact = minkowski_functionals(du);
    const auto scan = scanline_topology(du, h);
    if (exact.euler != scan.euler || exact.n_components != scan.n_components) {
      ++mismatches;
      MESSAGE("mismatch at trial " << trial << " margin " << topological_margin(du));
      CHECK(topological_margin(du) < 10 * h);
    }
  }
  CHECK(mismatches <= 2);
}

TEST_CASE("scanline oracle on fixed shapes") {
  const DiscUnion one(Configuration(2, {Point(0, 0)}), 1.0);
  CHECK(scanline_topology(one, 1e-3).euler == 1);
  const double s = 1.9 / std::sqrt(3.0);
  const DiscUnion tri(Configuration(2, {Point(s, 0), Point(-0.5 * s, 0.95), Point(-0.5 * s, -0.95)}), 1.0);
  const auto t = scanline_topology(tri, 1e-4);
  CHECK(t.n_components == 1);
  CHECK(t.n_holes == 1);
  CHECK(scanline_topology(DiscUnion(Configuration(2), 1.0), 1e-3).euler == 0);
  // Clipping the annulus-like triangle through its hole opens it.
  const auto half = scanline_topology(tri, 1e-4, Window(2, Point(-3, -3), Point(0, 3)));
  CHECK(half.n_holes == 0);
  CHECK_THROWS_AS(scanline_topology(one, 0.0), std::invalid_argument);
}

TEST_CASE("functional bounds, monotonicity and translation invariance") {
  for (std::uint64_t trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(trial % 25);
    const auto du = random_union(1000 + trial, n, 3.0, 0.5);
    const auto m = minkowski_functionals(du);
    CHECK(std::labs(m.euler) <= 3 * n);
    CHECK(m.euler == m.n_components - m.n_holes);
    CHECK(m.n_holes >= 0);
    CHECK(m.area <= n * M_PI * 0.25 + 1e-12);
    CHECK(m.perimeter <= n * M_PI + 1e-12);
    Rng rng(Seed{trial, 99});
    const Point u(rng.uniform(-50, 50), rng.uniform(-50, 50));
    const auto t = minkowski_functionals(DiscUnion(du.centers.translated(u), du.radius));
    CHECK(std::fabs(t.area - m.area) < 1e-10);
    CHECK(std::fabs(t.perimeter - m.perimeter) < 1e-10);
    CHECK(t.euler == m.euler);
    const Point x(rng.uniform(0, 3), rng.uniform(0, 3));
    if (!du.centers.contains(x)) {
      const auto grown = minkowski_functionals(DiscUnion(du.centers.with(x), du.radius));
      CHECK(grown.area >= m.area - 1e-12);
    }
  }
}

TEST_CASE("clipped functionals closed forms") {
  const Window box(2, Point(0, 0), Point(1, 1));
  const auto inside = clipped_functionals(DiscUnion(Configuration(2, {Point(0.5, 0.5)}), 0.2), box);
  CHECK(std::fabs(inside.area - M_PI * 0.04) < 1e-12);
  CHECK(std::fabs(inside.arc_length - 2 * M_PI * 0.2) < 1e-12);
  CHECK(inside.edge_length == 0.0);
  CHECK(inside.euler == 1);
  CHECK(inside.n_cc_double_edge == 0);

  const auto none = clipped_functionals(DiscUnion(Configuration(2, {Point(3, 3)}), 0.2), box);
  CHECK(none.area == 0.0);
  CHECK(none.euler == 0);

  const auto half = clipped_functionals(DiscUnion(Configuration(2, {Point(0.5, 0.0)}), 0.1), box);
  CHECK(std::fabs(half.area - M_PI * 0.01 / 2) < 1e-12);
  CHECK(std::fabs(half.edge_length - 0.2) < 1e-12);
  CHECK(std::fabs(half.arc_length - M_PI * 0.1) < 1e-12);
  CHECK(half.euler == 1);
  CHECK(half.n_cc_double_edge == 1);

  // A disc covering the lower-left corner touches both double edges once.
  const auto corner = clipped_functionals(DiscUnion(Configuration(2, {Point(0.0, 0.0)}), 0.3), box);
  CHECK(std::fabs(corner.area - M_PI * 0.09 / 4) < 1e-12);
  CHECK(corner.n_cc_double_edge == 1);
  // Top-right corner disc does not touch the double edge.
  const auto far = clipped_functionals(DiscUnion(Configuration(2, {Point(1.0, 1.0)}), 0.3), box);
  CHECK(far.n_cc_double_edge == 0);
  CHECK(far.euler == 1);
}

TEST_CASE("grid decomposition reproduces area and perimeter") {
  for (std::uint64_t trial = 0; trial < 30; ++trial) {
    const auto du = random_union(500 + trial, 15, 4.0, 0.45);
    const auto m = minkowski_functionals(du);
    double area = 0, arcs = 0;
    long chi = 0;
    for (int i = -1; i < 6; ++i) {
      for (int j = -1; j < 6; ++j) {
        const auto c = clipped_functionals(du, Window(2, Point(i, j), Point(i + 1, j + 1)));
        area += c.area;
        arcs += c.arc_length;
        chi += c.euler - c.n_cc_double_edge;
      }
    }
    CHECK(std::fabs(area - m.area) < 1e-9);
    CHECK(std::fabs(arcs - m.perimeter) < 1e-9);
    CHECK(chi == m.euler);
  }
}

TEST_CASE("clipped euler matches the scanline oracle of the clipped set") {
  int mismatches = 0;
  for (std::uint64_t trial = 0; trial < 60; ++trial) {
    const auto du = random_union(900 + trial, 12, 3.0, 0.5);
    const Window box(2, Point(0.7, 0.4), Point(2.2, 2.5));
    const auto c = clipped_functionals(du, box);
    const long ras = scanline_topology(du, 1e-5, box).euler;
    if (c.euler != ras) {
      ++mismatches;
      MESSAGE("clipped mismatch at trial " << trial);
    }
    const Window all(2, Point(-2, -2), Point(6, 6));
    const auto whole = clipped_functionals(du, all);
    CHECK(whole.euler == minkowski_functionals(du).euler);
    CHECK(whole.edge_length == 0.0);
    CHECK(c.area <= whole.area + 1e-12);
  }
  CHECK(mismatches == 0);
}

TEST_CASE("insertion consistency of area") {
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    const auto du = random_union(3000 + trial, 8, 2.0, 0.5);
    Rng rng(Seed{trial, 5});
    const Point x(rng.uniform(0, 2), rng.uniform(0, 2));
    const double before = minkowski_functionals(du).area;
    const double after = minkowski_functionals(DiscUnion(du.centers.with(x), du.radius)).area;
    // New area = disc area minus the part already covered, computed on a
    // fine raster restricted to the new disc.
    const double h = 2e-3;
    long fresh = 0;
    for (double px = x[0] - 0.5 + h / 2; px < x[0] + 0.5; px += h) {
      for (double py = x[1] - 0.5 + h / 2; py < x[1] + 0.5; py += h) {
        if ((px - x[0]) * (px - x[0]) + (py - x[1]) * (py - x[1]) > 0.25) continue;
        bool covered = false;
        for (const auto& c : du.centers) {
          if ((px - c[0]) * (px - c[0]) + (py - c[1]) * (py - c[1]) <= 0.25) {
            covered = true;
            break;
          }
        }
        fresh += !covered;
      }
    }
    CHECK(std::fabs((after - before) - fresh * h * h) < 5e-3);
  }
}
