#pragma once

#include "imface/geomprep/mesh.hpp"

#include <vector>

namespace imface::recon {

using geom::Vec3;

struct Neighbor {
  int index = -1;
  double squared_distance = 0.0;
};

/// Exact nearest-neighbour queries over a point set. Ties go to the lowest
/// index, so results equal a brute-force scan bit for bit.
class KDTree {
 public:
  KDTree() = default;
  explicit KDTree(std::vector<Vec3> points, int leaf_size = 8);

  Neighbor nearest(const Vec3& q) const;
  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }

 private:
  struct Node {
    int axis = -1;  // -1 for leaves
    double split = 0.0;
    int left = -1, right = -1;
    int first = 0, count = 0;
  };
  int build(int first, int count, int leaf_size);
  void search(int node, const Vec3& q, Neighbor& best) const;

  std::vector<Vec3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

Neighbor nearest_brute_force(const Vec3& q, const std::vector<Vec3>& points);

/// Distance from every query to its nearest point in `tree`, in parallel.
std::vector<double> nearest_distances(const std::vector<Vec3>& queries, const KDTree& tree);

}  // namespace imface::recon
