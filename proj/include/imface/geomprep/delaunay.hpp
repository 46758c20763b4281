#pragma once

#include "imface/geomprep/mesh.hpp"

#include <vector>

namespace imface::geom {

/// Delaunay triangulation of planar points; triangles are CCW. Duplicate
/// points must be removed beforehand (Error(data) otherwise). Cocircular
/// configurations take the diagonal whose lower endpoint index is smallest.
/// Throws Error(data) when all points are collinear.
std::vector<Face> delaunay_2d(const std::vector<Vec2>& points);

/// Re-triangulates a mesh from the Delaunay triangulation of its vertices'
/// (x, y) projections. Vertices sharing an (x, y) projection collapse to the
/// one with the largest z (the visible one); unused vertices are dropped.
TriangleMesh delaunay_xy(const TriangleMesh& mesh);

/// Number of points on the convex hull boundary, including points lying on
/// hull edges (counts used by the Euler check).
std::size_t hull_boundary_count(const std::vector<Vec2>& points, const std::vector<Face>& triangles);

}  // namespace imface::geom
