#pragma once

#include "imface/geomprep/mesh.hpp"

#include <array>
#include <functional>
#include <vector>

namespace imface::recon {

using geom::Vec3;

/// Scalar samples on the nodes of a regular grid, x fastest.
struct VoxelGrid {
  std::array<std::size_t, 3> resolution{64, 64, 64};  // nodes per axis
  Vec3 lo = Vec3::Constant(-100.0);
  Vec3 hi = Vec3::Constant(100.0);
  std::vector<double> values;

  /// Throws Error(config) for fewer than 8 nodes on an axis or an empty box.
  void validate_layout() const;
  std::size_t size() const { return resolution[0] * resolution[1] * resolution[2]; }
  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return i + resolution[0] * (j + resolution[1] * k);
  }
  double spacing(int axis) const { return (hi[axis] - lo[axis]) / double(resolution[axis] - 1); }
  double cell_diagonal() const;
  Vec3 node(std::size_t i, std::size_t j, std::size_t k) const;
};

/// Cube [-half, half]^3 with `resolution` nodes per axis.
VoxelGrid make_grid(std::size_t resolution, double half_extent_mm = 100.0);

/// Batched field: xyz triples in, one value per point out.
using BatchField = std::function<std::vector<double>(const std::vector<double>& xyz)>;

/// Fills grid.values slab by slab. Non-finite samples raise Error(numeric).
void sample_field(VoxelGrid& grid, const BatchField& field);

/// Triangles per cube configuration as local edge triples. Bit c of the case
/// index is set when corner c lies below the iso value; corner c sits at
/// (c & 1, c >> 1 & 1, c >> 2 & 1).
const std::vector<std::array<int, 3>>& mc_case(int config);
/// Corner pair of local edge e, lower corner first.
std::array<int, 2> mc_edge_corners(int edge);

/// Iso-surface with linear edge interpolation. Triangles face increasing
/// values and vertices are shared between neighbouring cells. A grid without
/// a crossing gives an empty mesh and a warning.
geom::TriangleMesh marching_cubes(const VoxelGrid& grid, double iso = 0.0);

/// sample_field followed by marching_cubes.
geom::TriangleMesh extract_surface(const BatchField& field, VoxelGrid grid, double iso = 0.0);

}  // namespace imface::recon
