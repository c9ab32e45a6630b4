#pragma once

#include <span>

#include "gibbs/configuration.hpp"
#include "gibbs/window.hpp"

namespace gibbs {

/// The union L = U_{x in centers} B(x, r) of equal closed discs in the plane.
struct DiscUnion {
  DiscUnion(Configuration centers, double radius);

  Configuration centers;
  double radius;
};

/// Area, perimeter and Euler characteristic of a disc union.
struct MinkowskiSummary {
  double area = 0.0;
  double perimeter = 0.0;
  long euler = 0;
  long n_components = 0;
  long n_holes = 0;
  /// Near-ties (tangencies, cocircular centres, ...) resolved by the
  /// perturbation convention. Zero for generic input.
  int degeneracies = 0;
};

/// Functionals of L intersected with an axis-aligned box C.
struct ClippedFunctionals {
  double area = 0.0;         ///< area of L n C
  double arc_length = 0.0;   ///< length of the boundary of L lying inside C
  double edge_length = 0.0;  ///< length of L n dC
  long euler = 0;            ///< Euler characteristic of L n C
  long n_cc_double_edge = 0; ///< components of L on the lower-left edges of C
  int degeneracies = 0;

  /// Perimeter of the set L n C (circular arcs plus straight cuts).
  double perimeter() const { return arc_length + edge_length; }
};

// Degenerate configurations are resolved as if every radius were shrunk by
// an infinitesimal amount: discs at distance exactly 2r are disjoint, and a
// Voronoi vertex at distance exactly r from its sites is uncovered. Four or
// more cocircular centres contribute one 2-cell, as any triangulation of
// their convex polygon would.

MinkowskiSummary minkowski_functionals(const DiscUnion& du);
MinkowskiSummary minkowski_functionals(std::span<const Point> centers, double radius);

ClippedFunctionals clipped_functionals(const DiscUnion& du, const Window& box);
ClippedFunctionals clipped_functionals(std::span<const Point> centers, double radius,
                                       const Window& box);

/// Euler characteristic by the Gauss-Bonnet formula over boundary arcs:
/// 2 pi chi = (total arc angle) - (turning at the arc junctions). Independent
/// of the nerve computation used by minkowski_functionals.
long euler_gauss_bonnet(const DiscUnion& du);

/// Pixel-grid approximation with spacing h. Area by pixel counting,
/// components and holes by flood fill (8-connected foreground, 4-connected
/// background), perimeter by marching squares on the distance-to-union field.
MinkowskiSummary raster_oracle(const DiscUnion& du, double h);

/// Components, holes and Euler characteristic from exact disc chords on
/// horizontal lines spaced h apart: runs on adjacent lines connect when their
/// x-intervals overlap. Only the y direction is discretised, so a fine h is
/// cheap. With a box, the set is L intersected with the closed box and
/// background touching the box border is exterior. Background components
/// whose sampled distance to L never exceeds h are treated as artefacts.
struct ScanlineTopology {
  long n_components = 0;
  long n_holes = 0;
  long euler = 0;
};
ScanlineTopology scanline_topology(const DiscUnion& du, double h);
ScanlineTopology scanline_topology(const DiscUnion& du, double h, const Window& box);

/// Smallest slack of any topological predicate: |d_ij - 2r| over pairs and
/// |R_ijk - r| over triples of pairwise-overlapping discs. Small values mark
/// unions whose topology a finite raster may not resolve.
double topological_margin(const DiscUnion& du);

}  // namespace gibbs
