#include "imface/geomprep/delaunay.hpp"

#include "imface/error.hpp"
#include "imface/geomprep/predicates.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

namespace imface::geom {

namespace {

// Triangulation over points in sweep order, with a directed-edge map for
// adjacency. Vertex ids here are positions in `pts` (sorted order).
class Sweep {
 public:
  Sweep(const std::vector<Vec2>& pts, const std::vector<int>& original)
      : pts_(pts), original_(original), next_(pts.size(), -1), prev_(pts.size(), -1) {}

  std::vector<Face> run() {
    const int n = static_cast<int>(pts_.size());
    // leading collinear run
    int m = 2;
    while (m < n && orient2d(pts_[0], pts_[1], pts_[m]) == 0) ++m;
    if (m == n) throw Error(ErrorKind::data, "delaunay: all points are collinear");
    const bool left = orient2d(pts_[0], pts_[1], pts_[m]) > 0;
    for (int i = 0; i + 1 < m; ++i) {
      if (left) {
        add_triangle(i, i + 1, m);
      } else {
        add_triangle(i + 1, i, m);
      }
    }
    // hull, CCW: the chain 0..m-1 on one side and m as the apex
    if (left) {
      for (int i = 0; i + 1 < m; ++i) link(i, i + 1);
      link(m - 1, m);
      link(m, 0);
    } else {
      for (int i = m - 1; i > 0; --i) link(i, i - 1);
      link(0, m);
      link(m, m - 1);
    }
    legalize_all();
    int last = m;
    for (int p = m + 1; p < n; ++p) {
      insert(p, last);
      last = p;
    }
    std::vector<Face> out;
    out.reserve(tris_.size());
    for (const auto& t : tris_) {
      if (t[0] >= 0) out.push_back({original_[t[0]], original_[t[1]], original_[t[2]]});
    }
    return out;
  }

 private:
  static std::uint64_t key(int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
  }

  void link(int a, int b) {
    next_[a] = b;
    prev_[b] = a;
  }

  int add_triangle(int a, int b, int c) {
    const int id = static_cast<int>(tris_.size());
    tris_.push_back({a, b, c});
    edges_[key(a, b)] = id;
    edges_[key(b, c)] = id;
    edges_[key(c, a)] = id;
    pending_.push_back(key(a, b));
    pending_.push_back(key(b, c));
    pending_.push_back(key(c, a));
    return id;
  }

  void remove_triangle(int id) {
    auto& t = tris_[id];
    edges_.erase(key(t[0], t[1]));
    edges_.erase(key(t[1], t[2]));
    edges_.erase(key(t[2], t[0]));
    t = {-1, -1, -1};
  }

  static int apex(const Face& t, int a, int b) {
    for (int i = 0; i < 3; ++i) {
      if (t[i] != a && t[i] != b) return t[i];
    }
    return -1;
  }

  bool visible(int a, int b, int p) const { return orient2d(pts_[a], pts_[b], pts_[p]) < 0; }

  void insert(int p, int last) {
    // `last` is the previous rightmost point, always on the hull and adjacent
    // to the visible chain; walk outward from it in both directions.
    int start = last, end = last;
    while (visible(prev_[start], start, p)) start = prev_[start];
    while (visible(end, next_[end], p)) end = next_[end];
    if (start == end) throw Error(ErrorKind::internal, "delaunay: no visible hull edge");
    for (int a = start; a != end;) {
      const int b = next_[a];
      add_triangle(a, p, b);
      a = b;
    }
    // hull: start -> p -> end, dropping the interior chain
    link(start, p);
    link(p, end);
    legalize_all();
  }

  // Lawson flips until every edge in the queue is locally Delaunay.
  void legalize_all() {
    std::size_t guard = 0;
    const std::size_t limit = 64 * (pts_.size() + 16) * (pts_.size() + 16);
    while (!pending_.empty()) {
      if (++guard > limit) throw Error(ErrorKind::internal, "delaunay: flip loop did not terminate");
      const std::uint64_t k = pending_.back();
      pending_.pop_back();
      const int a = static_cast<int>(k >> 32);
      const int b = static_cast<int>(k & 0xffffffffu);
      const auto it1 = edges_.find(key(a, b));
      const auto it2 = edges_.find(key(b, a));
      if (it1 == edges_.end() || it2 == edges_.end()) continue;
      const int t1 = it1->second, t2 = it2->second;
      const int c = apex(tris_[t1], a, b);
      const int d = apex(tris_[t2], b, a);
      if (!should_flip(a, b, c, d)) continue;
      remove_triangle(t1);
      remove_triangle(t2);
      add_triangle(a, d, c);
      add_triangle(d, b, c);
    }
  }

  // Edge a-b with CCW triangles (a, b, c) and (b, a, d).
  bool should_flip(int a, int b, int c, int d) const {
    const int s = incircle(pts_[a], pts_[b], pts_[c], pts_[d]);
    if (s > 0) return true;
    if (s < 0) return false;
    // cocircular: both diagonals are Delaunay; keep the one touching the
    // smallest original index. The flipped quad must stay convex.
    if (std::min(original_[c], original_[d]) >= std::min(original_[a], original_[b])) return false;
    return orient2d(pts_[c], pts_[a], pts_[d]) < 0 && orient2d(pts_[c], pts_[b], pts_[d]) > 0;
  }

  const std::vector<Vec2>& pts_;
  const std::vector<int>& original_;
  std::vector<int> next_, prev_;
  std::vector<Face> tris_;
  std::unordered_map<std::uint64_t, int> edges_;
  std::vector<std::uint64_t> pending_;
};

}  // namespace

std::vector<Face> delaunay_2d(const std::vector<Vec2>& points) {
  if (points.size() < 3) throw Error(ErrorKind::data, "delaunay: need at least 3 points");
  std::vector<int> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) {
    if (points[i].x() != points[j].x()) return points[i].x() < points[j].x();
    if (points[i].y() != points[j].y()) return points[i].y() < points[j].y();
    return i < j;
  });
  std::vector<Vec2> sorted;
  sorted.reserve(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    sorted.push_back(points[order[i]]);
    if (i > 0 && sorted[i] == sorted[i - 1]) {
      throw Error(ErrorKind::data, "delaunay: duplicate point " + std::to_string(order[i]));
    }
  }
  return Sweep(sorted, order).run();
}

TriangleMesh delaunay_xy(const TriangleMesh& mesh) {
  // collapse shared projections onto the topmost vertex
  std::vector<int> order(mesh.vertices.size());
  std::iota(order.begin(), order.end(), 0);
  const auto& v = mesh.vertices;
  std::sort(order.begin(), order.end(), [&](int i, int j) {
    if (v[i].x() != v[j].x()) return v[i].x() < v[j].x();
    if (v[i].y() != v[j].y()) return v[i].y() < v[j].y();
    if (v[i].z() != v[j].z()) return v[i].z() > v[j].z();
    return i < j;
  });
  std::vector<bool> keep(v.size(), false);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const bool dup = i > 0 && v[order[i]].x() == v[order[i - 1]].x() && v[order[i]].y() == v[order[i - 1]].y();
    keep[order[i]] = !dup;
  }
  TriangleMesh out;
  std::vector<int> remap(v.size(), -1);
  std::vector<Vec2> xy;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!keep[i]) continue;
    remap[i] = static_cast<int>(out.vertices.size());
    out.vertices.push_back(v[i]);
    xy.emplace_back(v[i].x(), v[i].y());
  }
  out.faces = delaunay_2d(xy);
  for (int lm : mesh.landmark_indices) {
    if (remap[lm] < 0) throw Error(ErrorKind::data, "landmark vertex " + std::to_string(lm) + " hidden by another vertex");
    out.landmark_indices.push_back(remap[lm]);
  }
  return out;
}

std::size_t hull_boundary_count(const std::vector<Vec2>& points, const std::vector<Face>& triangles) {
  // boundary edges appear in exactly one triangle
  std::unordered_map<std::uint64_t, int> count;
  auto undirected = [](int a, int b) {
    return (static_cast<std::uint64_t>(std::min(a, b)) << 32) | static_cast<std::uint32_t>(std::max(a, b));
  };
  for (const auto& t : triangles) {
    for (int i = 0; i < 3; ++i) ++count[undirected(t[i], t[(i + 1) % 3])];
  }
  std::vector<bool> on_boundary(points.size(), false);
  for (const auto& [k, c] : count) {
    if (c != 1) continue;
    on_boundary[k >> 32] = true;
    on_boundary[k & 0xffffffffu] = true;
  }
  return static_cast<std::size_t>(std::count(on_boundary.begin(), on_boundary.end(), true));
}

}  // namespace imface::geom
