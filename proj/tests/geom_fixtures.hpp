#pragma once

#include "imface/geomprep/mesh.hpp"

#include <functional>

namespace imface::testing {

// Regular grid heightfield z = h(x, y) over [-half, half]^2, CCW from +z.
inline geom::TriangleMesh grid_heightfield(int n, double half, const std::function<double(double, double)>& h) {
  geom::TriangleMesh m;
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      const double x = -half + 2.0 * half * i / n;
      const double y = -half + 2.0 * half * j / n;
      m.vertices.emplace_back(x, y, h(x, y));
    }
  }
  auto id = [n](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      m.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return m;
}

}  // namespace imface::testing
