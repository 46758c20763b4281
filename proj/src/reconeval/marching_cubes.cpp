#include "imface/reconeval/marching_cubes.hpp"

#include "imface/error.hpp"
#include "imface/log.hpp"

#include <cmath>
#include <unordered_map>

namespace imface::recon {

void VoxelGrid::validate_layout() const {
  for (int a = 0; a < 3; ++a) {
    if (resolution[a] < 8) throw Error(ErrorKind::config, "voxel grid needs at least 8 nodes per axis");
    if (!(hi[a] > lo[a])) throw Error(ErrorKind::config, "voxel grid bounds are empty");
  }
}

double VoxelGrid::cell_diagonal() const {
  return std::sqrt(spacing(0) * spacing(0) + spacing(1) * spacing(1) + spacing(2) * spacing(2));
}

Vec3 VoxelGrid::node(std::size_t i, std::size_t j, std::size_t k) const {
  // Last node lands exactly on hi.
  auto at = [&](int a, std::size_t n) {
    return n + 1 == resolution[a] ? hi[a] : lo[a] + double(n) * spacing(a);
  };
  return {at(0, i), at(1, j), at(2, k)};
}

VoxelGrid make_grid(std::size_t resolution, double half_extent_mm) {
  VoxelGrid g;
  g.resolution = {resolution, resolution, resolution};
  g.lo = Vec3::Constant(-half_extent_mm);
  g.hi = Vec3::Constant(half_extent_mm);
  g.validate_layout();
  return g;
}

void sample_field(VoxelGrid& grid, const BatchField& field) {
  grid.validate_layout();
  const auto [nx, ny, nz] = grid.resolution;
  grid.values.assign(grid.size(), 0.0);
  const std::size_t slab = nx * ny;
  const std::size_t slabs_per_batch = std::max<std::size_t>(1, (1u << 16) / slab);
  std::vector<double> xyz;
  for (std::size_t k0 = 0; k0 < nz; k0 += slabs_per_batch) {
    const std::size_t k1 = std::min(nz, k0 + slabs_per_batch);
    xyz.clear();
    for (std::size_t k = k0; k < k1; ++k)
      for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
          const Vec3 p = grid.node(i, j, k);
          xyz.insert(xyz.end(), {p.x(), p.y(), p.z()});
        }
    const std::vector<double> v = field(xyz);
    if (v.size() * 3 != xyz.size()) throw Error(ErrorKind::dimension, "field returned the wrong number of values");
    for (std::size_t n = 0; n < v.size(); ++n) {
      if (!std::isfinite(v[n])) throw Error(ErrorKind::numeric, "non-finite field sample on the voxel grid");
      grid.values[k0 * slab + n] = v[n];
    }
  }
}

namespace {

// The case table is derived rather than transcribed. On every cube face the
// crossings are walked counter-clockwise around the outward normal; each run
// of below-iso corners yields one segment from the crossing that opens the run
// to the one that closes it. A crossing edge opens a run on one of its two
// faces and closes it on the other, so the segments chain into closed loops.
// Ambiguous faces always keep the below-iso corners apart, which only depends
// on the face itself and therefore agrees between neighbouring cells.
struct Tables {
  std::array<std::array<int, 2>, 12> edges{};
  std::array<std::vector<std::array<int, 3>>, 256> cases;

  // Faces touching each edge, as a bit mask over the six cube faces.
  std::array<int, 12> edge_faces{};

  // A diagonal joining two vertices on the same cube face would lie in that
  // face, where the neighbouring cell puts its own edges; such diagonals are
  // avoided. Plain recursive search, loops have at most 12 vertices.
  bool triangulate(const std::vector<int>& loop, std::vector<std::array<int, 3>>& out) const {
    const std::size_t n = loop.size();
    if (n == 3) {
      out.push_back({loop[0], loop[1], loop[2]});
      return true;
    }
    auto allowed = [&](int a, int b) { return (edge_faces[a] & edge_faces[b]) == 0; };
    for (std::size_t k = 1; k + 1 < n; ++k) {
      if (k != 1 && !allowed(loop[0], loop[k])) continue;
      if (k != n - 2 && !allowed(loop[k], loop[n - 1])) continue;
      std::vector<std::array<int, 3>> tris{{loop[0], loop[k], loop[n - 1]}};
      const std::vector<int> left(loop.begin(), loop.begin() + long(k) + 1);
      std::vector<int> right(loop.begin() + long(k), loop.end());
      if (left.size() >= 3 && !triangulate(left, tris)) continue;
      if (right.size() >= 3 && !triangulate(right, tris)) continue;
      out.insert(out.end(), tris.begin(), tris.end());
      return true;
    }
    return false;
  }

  Tables() {
    int edge_of[8][8];
    for (auto& row : edge_of)
      for (int& e : row) e = -1;
    int e = 0;
    for (int a = 0; a < 3; ++a)
      for (int c = 0; c < 8; ++c) {
        if (c >> a & 1) continue;
        edges[e] = {c, c | 1 << a};
        edge_of[c][c | 1 << a] = edge_of[c | 1 << a][c] = e;
        ++e;
      }

    std::array<std::array<int, 4>, 6> faces{};
    int f = 0;
    for (int a = 0; a < 3; ++a)
      for (int s = 0; s < 2; ++s) {
        const int u = (a + 1) % 3, v = (a + 2) % 3;
        auto corner = [&](int bu, int bv) { return s << a | bu << u | bv << v; };
        // CCW about +e_a; reversed for the face whose outward normal is -e_a.
        std::array<int, 4> q{corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)};
        if (s == 0) q = {q[0], q[3], q[2], q[1]};
        for (int k = 0; k < 4; ++k) edge_faces[edge_of[q[k]][q[(k + 1) % 4]]] |= 1 << f;
        faces[f++] = q;
      }

    for (int config = 0; config < 256; ++config) {
      auto below = [&](int c) { return (config >> c & 1) != 0; };
      std::array<int, 12> next;
      next.fill(-1);
      for (const auto& q : faces) {
        std::vector<std::pair<int, bool>> crossings;  // (edge, opens a below run)
        for (int k = 0; k < 4; ++k) {
          const int c0 = q[k], c1 = q[(k + 1) % 4];
          if (below(c0) != below(c1)) crossings.push_back({edge_of[c0][c1], below(c1)});
        }
        for (std::size_t i = 0; i < crossings.size(); ++i) {
          if (!crossings[i].second) continue;
          const int to = crossings[(i + 1) % crossings.size()].first;
          if (next[crossings[i].first] != -1) throw Error(ErrorKind::internal, "marching cubes table: edge opens twice");
          next[crossings[i].first] = to;
        }
      }
      std::array<bool, 12> seen{};
      for (int start = 0; start < 12; ++start) {
        const bool crossing = below(edges[start][0]) != below(edges[start][1]);
        if (crossing != (next[start] != -1)) throw Error(ErrorKind::internal, "marching cubes table: open loop");
        if (!crossing || seen[start]) continue;
        std::vector<int> loop;
        for (int at = start; !seen[at]; at = next[at]) {
          seen[at] = true;
          loop.push_back(at);
        }
        if (loop.size() < 3 || next[loop.back()] != start)
          throw Error(ErrorKind::internal, "marching cubes table: broken loop");
        if (!triangulate(loop, cases[config])) throw Error(ErrorKind::internal, "marching cubes table: loop has no triangulation");
      }
    }
  }
};

const Tables& tables() {
  static const Tables t;
  return t;
}

}  // namespace

const std::vector<std::array<int, 3>>& mc_case(int config) {
  if (config < 0 || config > 255) throw Error(ErrorKind::config, "marching cubes case out of range");
  return tables().cases[config];
}

std::array<int, 2> mc_edge_corners(int edge) {
  if (edge < 0 || edge > 11) throw Error(ErrorKind::config, "marching cubes edge out of range");
  return tables().edges[edge];
}

geom::TriangleMesh marching_cubes(const VoxelGrid& grid, double iso) {
  grid.validate_layout();
  if (grid.values.size() != grid.size()) throw Error(ErrorKind::dimension, "voxel grid has no samples");
  const Tables& t = tables();
  const auto [nx, ny, nz] = grid.resolution;

  geom::TriangleMesh mesh;
  std::unordered_map<std::uint64_t, int> vertex_of;  // (node index, axis) -> vertex
  auto corner_node = [](std::size_t i, std::size_t j, std::size_t k, int c) {
    return std::array<std::size_t, 3>{i + (c & 1), j + (c >> 1 & 1), k + (c >> 2 & 1)};
  };

  for (std::size_t k = 0; k + 1 < nz; ++k)
    for (std::size_t j = 0; j + 1 < ny; ++j)
      for (std::size_t i = 0; i + 1 < nx; ++i) {
        double vals[8];
        int config = 0;
        for (int c = 0; c < 8; ++c) {
          const auto n = corner_node(i, j, k, c);
          vals[c] = grid.values[grid.index(n[0], n[1], n[2])];
          if (vals[c] < iso) config |= 1 << c;
        }
        const auto& tris = t.cases[config];
        if (tris.empty()) continue;
        auto vertex = [&](int e) {
          const auto [c0, c1] = t.edges[e];
          const auto n0 = corner_node(i, j, k, c0);
          const int axis = (c0 ^ c1) == 1 ? 0 : (c0 ^ c1) == 2 ? 1 : 2;
          const std::uint64_t key = std::uint64_t(grid.index(n0[0], n0[1], n0[2])) * 3 + axis;
          auto [it, fresh] = vertex_of.try_emplace(key, int(mesh.vertices.size()));
          if (fresh) {
            const auto n1 = corner_node(i, j, k, c1);
            const Vec3 p0 = grid.node(n0[0], n0[1], n0[2]);
            const Vec3 p1 = grid.node(n1[0], n1[1], n1[2]);
            const double s = (iso - vals[c0]) / (vals[c1] - vals[c0]);
            mesh.vertices.push_back(p0 + s * (p1 - p0));
          }
          return it->second;
        };
        for (const auto& tri : tris) mesh.faces.push_back({vertex(tri[0]), vertex(tri[1]), vertex(tri[2])});
      }

  if (mesh.faces.empty()) log_warn("marching cubes: the field has no crossing inside the grid, mesh is empty");
  return mesh;
}

geom::TriangleMesh extract_surface(const BatchField& field, VoxelGrid grid, double iso) {
  sample_field(grid, field);
  return marching_cubes(grid, iso);
}

}  // namespace imface::recon
