#include "imface/reconeval/kdtree.hpp"

#include "imface/error.hpp"
#include "imface/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace imface::recon {

namespace {

void consider(int index, double d2, Neighbor& best) {
  if (d2 < best.squared_distance || (d2 == best.squared_distance && index < best.index)) {
    best.index = index;
    best.squared_distance = d2;
  }
}

}  // namespace

KDTree::KDTree(std::vector<Vec3> points, int leaf_size) : points_(std::move(points)) {
  if (points_.empty()) throw Error(ErrorKind::data, "KD-tree over an empty point set");
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * points_.size() / std::max(1, leaf_size) + 1);
  build(0, int(points_.size()), std::max(1, leaf_size));
}

int KDTree::build(int first, int count, int leaf_size) {
  const int id = int(nodes_.size());
  nodes_.push_back({});
  if (count <= leaf_size) {
    nodes_[id].first = first;
    nodes_[id].count = count;
    return id;
  }
  Vec3 lo = points_[order_[first]], hi = lo;
  for (int n = first; n < first + count; ++n) {
    lo = lo.cwiseMin(points_[order_[n]]);
    hi = hi.cwiseMax(points_[order_[n]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const int mid = first + count / 2;
  std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count,
                   [&](int a, int b) { return points_[a][axis] < points_[b][axis]; });
  const double split = points_[order_[mid]][axis];
  const int left = build(first, mid - first, leaf_size);
  const int right = build(mid, first + count - mid, leaf_size);
  Node& node = nodes_[id];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

void KDTree::search(int id, const Vec3& q, Neighbor& best) const {
  const Node& node = nodes_[id];
  if (node.axis < 0) {
    for (int n = node.first; n < node.first + node.count; ++n)
      consider(order_[n], (points_[order_[n]] - q).squaredNorm(), best);
    return;
  }
  // Left holds coordinates <= split, right >= split.
  const double diff = q[node.axis] - node.split;
  const int near = diff <= 0.0 ? node.left : node.right;
  const int far = diff <= 0.0 ? node.right : node.left;
  search(near, q, best);
  // <= keeps equal-distance candidates reachable for the index tie-break.
  if (diff * diff <= best.squared_distance) search(far, q, best);
}

Neighbor KDTree::nearest(const Vec3& q) const {
  Neighbor best{-1, std::numeric_limits<double>::infinity()};
  search(0, q, best);
  return best;
}

Neighbor nearest_brute_force(const Vec3& q, const std::vector<Vec3>& points) {
  if (points.empty()) throw Error(ErrorKind::data, "nearest neighbour in an empty point set");
  Neighbor best{-1, std::numeric_limits<double>::infinity()};
  for (std::size_t n = 0; n < points.size(); ++n) consider(int(n), (points[n] - q).squaredNorm(), best);
  return best;
}

std::vector<double> nearest_distances(const std::vector<Vec3>& queries, const KDTree& tree) {
  std::vector<double> out(queries.size());
  parallel_for(queries.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t n = b; n < e; ++n) out[n] = std::sqrt(tree.nearest(queries[n]).squared_distance);
  });
  return out;
}

}  // namespace imface::recon
