#include "imface/geomprep/bvh.hpp"

#include "imface/error.hpp"

#include <algorithm>
#include <numeric>

namespace imface::geom {

std::optional<RayHit> ray_triangle_intersect(const Vec3& origin, const Vec3& dir, const Vec3& v0, const Vec3& v1,
                                             const Vec3& v2, double eps) {
  const Vec3 e1 = v1 - v0;
  const Vec3 e2 = v2 - v0;
  const Vec3 pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (det == 0.0) return std::nullopt;  // parallel to the plane
  const double inv = 1.0 / det;
  const Vec3 tvec = origin - v0;
  const double u = tvec.dot(pvec) * inv;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 qvec = tvec.cross(e1);
  const double v = dir.dot(qvec) * inv;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = e2.dot(qvec) * inv;
  if (!(t > eps)) return std::nullopt;
  return RayHit{t, u, v};
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Voronoi-region walk over vertices, edges, then the face interior.
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);

  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

double AABB::squared_distance(const Vec3& p) const {
  double d = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double below = lo[i] - p[i];
    const double above = p[i] - hi[i];
    const double e = std::max({below, above, 0.0});
    d += e * e;
  }
  return d;
}

bool AABB::ray_overlaps(const Vec3& origin, const Vec3& inv_dir, double t_max) const {
  double t0 = 0.0, t1 = t_max;
  for (int i = 0; i < 3; ++i) {
    double ta = (lo[i] - origin[i]) * inv_dir[i];
    double tb = (hi[i] - origin[i]) * inv_dir[i];
    if (std::isnan(ta) || std::isnan(tb)) {
      // axis-parallel ray starting exactly on a slab plane
      if (origin[i] < lo[i] || origin[i] > hi[i]) return false;
      continue;
    }
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

BVH::BVH(const TriangleMesh& mesh, int leaf_size) : mesh_(mesh) {
  if (mesh.faces.empty()) throw Error(ErrorKind::data, "bvh: mesh has no faces");
  mesh_.validate();
  const int n = static_cast<int>(mesh.faces.size());
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0);
  std::vector<Vec3> centroids(n);
  for (int f = 0; f < n; ++f) centroids[f] = face_centroid(mesh_, f);
  nodes_.reserve(2 * n);
  build(0, n, std::max(1, leaf_size), centroids);
}

int BVH::build(int first, int count, int leaf_size, const std::vector<Vec3>& centroids) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  AABB box, cbox;
  for (int i = first; i < first + count; ++i) {
    for (int v : mesh_.faces[order_[i]]) box.grow(mesh_.vertices[v]);
    cbox.grow(centroids[order_[i]]);
  }
  nodes_[id].box = box;
  if (count <= leaf_size) {
    nodes_[id].first = first;
    nodes_[id].count = count;
    return id;
  }
  // median split on the widest centroid axis
  int axis = 0;
  const Vec3 ext = cbox.hi - cbox.lo;
  if (ext[1] > ext[axis]) axis = 1;
  if (ext[2] > ext[axis]) axis = 2;
  const int mid = first + count / 2;
  std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count, [&](int a, int b) {
    if (centroids[a][axis] != centroids[b][axis]) return centroids[a][axis] < centroids[b][axis];
    return a < b;
  });
  const int left = build(first, mid - first, leaf_size, centroids);
  const int right = build(mid, first + count - mid, leaf_size, centroids);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

ClosestHit BVH::closest_point(const Vec3& p) const {
  ClosestHit best{Vec3::Zero(), std::numeric_limits<double>::infinity(), -1};
  double best_d2 = std::numeric_limits<double>::infinity();
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (node.box.squared_distance(p) > best_d2) continue;
    if (node.left < 0) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const int f = order_[i];
        const auto& tri = mesh_.faces[f];
        const Vec3 q = closest_point_on_triangle(p, mesh_.vertices[tri[0]], mesh_.vertices[tri[1]], mesh_.vertices[tri[2]]);
        const double d2 = (q - p).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && f < best.face)) {
          best_d2 = d2;
          best.point = q;
          best.face = f;
        }
      }
      continue;
    }
    // visit the nearer child first
    const double dl = nodes_[node.left].box.squared_distance(p);
    const double dr = nodes_[node.right].box.squared_distance(p);
    if (top + 2 > 128) throw Error(ErrorKind::internal, "bvh: traversal stack overflow");
    if (dl <= dr) {
      stack[top++] = node.right;
      stack[top++] = node.left;
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  best.distance = std::sqrt(best_d2);
  return best;
}

bool BVH::ray_hits_any(const Vec3& origin, const Vec3& dir, int skip_face, double eps) const {
  const Vec3 inv(1.0 / dir.x(), 1.0 / dir.y(), 1.0 / dir.z());
  const double t_max = std::numeric_limits<double>::infinity();
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (!node.box.ray_overlaps(origin, inv, t_max)) continue;
    if (node.left < 0) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const int f = order_[i];
        if (f == skip_face) continue;
        const auto& tri = mesh_.faces[f];
        if (ray_triangle_intersect(origin, dir, mesh_.vertices[tri[0]], mesh_.vertices[tri[1]], mesh_.vertices[tri[2]], eps)) {
          return true;
        }
      }
      continue;
    }
    if (top + 2 > 128) throw Error(ErrorKind::internal, "bvh: traversal stack overflow");
    stack[top++] = node.left;
    stack[top++] = node.right;
  }
  return false;
}

ClosestHit closest_point_brute_force(const Vec3& p, const TriangleMesh& mesh) {
  ClosestHit best{Vec3::Zero(), std::numeric_limits<double>::infinity(), -1};
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& tri = mesh.faces[f];
    const Vec3 q = closest_point_on_triangle(p, mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]);
    const double d2 = (q - p).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best.point = q;
      best.face = static_cast<int>(f);
    }
  }
  best.distance = std::sqrt(best_d2);
  return best;
}

}  // namespace imface::geom
