#pragma once

#include "imface/geomprep/mesh.hpp"

#include <limits>
#include <optional>
#include <vector>

namespace imface::geom {

struct RayHit {
  double t;
  double u;
  double v;
};

/// Moller-Trumbore. A hit requires t > eps and barycentrics inside the
/// closed triangle.
std::optional<RayHit> ray_triangle_intersect(const Vec3& origin, const Vec3& dir, const Vec3& v0, const Vec3& v1,
                                             const Vec3& v2, double eps = 1e-12);

/// Closest point on triangle (a, b, c) to p, covering vertex, edge and
/// interior regions.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

struct ClosestHit {
  Vec3 point;
  double distance;
  int face;
};

struct AABB {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
  void grow(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void grow(const AABB& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  bool contains(const AABB& b) const {
    return (lo.array() <= b.lo.array()).all() && (hi.array() >= b.hi.array()).all();
  }
  double squared_distance(const Vec3& p) const;
  bool ray_overlaps(const Vec3& origin, const Vec3& inv_dir, double t_max) const;
};

class BVH {
 public:
  struct Node {
    AABB box;
    int left = -1;  // child indices, -1 for leaves
    int right = -1;
    int first = 0;  // leaf range into face_order()
    int count = 0;
  };

  BVH() = default;
  explicit BVH(const TriangleMesh& mesh, int leaf_size = 4);

  /// Exact nearest surface point. Ties go to the lowest face index, so the
  /// result matches closest_point_brute_force exactly.
  ClosestHit closest_point(const Vec3& p) const;
  /// True if the ray hits any face other than `skip_face` at t > eps.
  bool ray_hits_any(const Vec3& origin, const Vec3& dir, int skip_face, double eps) const;

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<int>& face_order() const { return order_; }
  const TriangleMesh& mesh() const { return mesh_; }

 private:
  int build(int first, int count, int leaf_size, const std::vector<Vec3>& centroids);

  TriangleMesh mesh_;  // owned copy, so the tree never dangles
  std::vector<Node> nodes_;
  std::vector<int> order_;
};

ClosestHit closest_point_brute_force(const Vec3& p, const TriangleMesh& mesh);

}  // namespace imface::geom
