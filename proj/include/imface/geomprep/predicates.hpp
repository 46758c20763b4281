#pragma once

#include "imface/geomprep/mesh.hpp"

namespace imface::geom {

// Exact-sign planar predicates: a floating-point filter with a certified
// error bound, falling back to rational arithmetic when the filter is unsure.

/// > 0 if a, b, c turn counter-clockwise, < 0 clockwise, 0 collinear.
int orient2d(const Vec2& a, const Vec2& b, const Vec2& c);
/// > 0 if d lies inside the circle through CCW a, b, c; 0 on it; < 0 outside.
int incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);

/// Same predicates evaluated only in rational arithmetic (tests use these).
int orient2d_exact(const Vec2& a, const Vec2& b, const Vec2& c);
int incircle_exact(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);

}  // namespace imface::geom
