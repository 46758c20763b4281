#include "imface/error.hpp"
#include "imface/reconeval/kdtree.hpp"
#include "imface/reconeval/latent_ops.hpp"
#include "imface/reconeval/marching_cubes.hpp"
#include "imface/reconeval/metrics.hpp"

#include "geom_fixtures.hpp"
#include "model_fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <random>

using namespace imface;
using namespace imface::recon;
using geom::TriangleMesh;

namespace {

BatchField analytic(std::function<double(const Vec3&)> f) {
  return [f](const std::vector<double>& xyz) {
    std::vector<double> out(xyz.size() / 3);
    for (std::size_t n = 0; n < out.size(); ++n) out[n] = f(Vec3(xyz[3 * n], xyz[3 * n + 1], xyz[3 * n + 2]));
    return out;
  };
}

TriangleMesh sphere_mesh(std::size_t res, double r) {
  return extract_surface(analytic([r](const Vec3& p) { return p.norm() - r; }), make_grid(res));
}

// Every directed edge must be matched by its reverse exactly once.
bool closed_and_consistent(const TriangleMesh& m) {
  std::map<std::pair<int, int>, int> count;
  for (const auto& f : m.faces)
    for (int e = 0; e < 3; ++e) ++count[{f[e], f[(e + 1) % 3]}];
  for (const auto& [edge, n] : count) {
    if (n != 1) return false;
    auto it = count.find({edge.second, edge.first});
    if (it == count.end() || it->second != 1) return false;
  }
  return true;
}

// Signed volume of each face-connected component.
std::vector<double> component_volumes(const TriangleMesh& m) {
  std::vector<int> parent(m.vertices.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  for (const auto& f : m.faces) {
    parent[find(f[1])] = find(f[0]);
    parent[find(f[2])] = find(f[0]);
  }
  std::map<int, double> vol;
  for (const auto& f : m.faces) {
    const Vec3 &a = m.vertices[f[0]], &b = m.vertices[f[1]], &c = m.vertices[f[2]];
    vol[find(f[0])] += a.dot(b.cross(c)) / 6.0;
  }
  std::vector<double> out;
  for (const auto& [root, v] : vol) out.push_back(v);
  return out;
}

std::vector<Vec3> random_points(std::size_t n, std::uint64_t seed, double half = 50.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-half, half);
  std::vector<Vec3> p(n);
  for (auto& x : p) x = Vec3(u(rng), u(rng), u(rng));
  return p;
}

double brute_chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  auto one = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
    double s = 0.0;
    for (const Vec3& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& q : to) best = std::min(best, (p - q).squaredNorm());
      s += std::sqrt(best);
    }
    return s / double(from.size());
  };
  return 0.5 * (one(a, b) + one(b, a));
}

TriangleMesh square(double half, double z, bool flipped) {
  auto m = testing::grid_heightfield(8, half, [z](double, double) { return z; });
  if (flipped)
    for (auto& f : m.faces) std::swap(f[1], f[2]);
  return m;
}

model::ImFaceModel rigid_model() {
  auto c = testing::tiny_model_config();
  c.deform_init_scale = 0.0;  // E and I start as identity maps
  const auto l = testing::canonical_model_landmarks();
  return model::make_model(c, l, l, l, 3);
}

}  // namespace

TEST_CASE("case table: loops close for every configuration and only crossing edges carry vertices") {
  for (int config = 0; config < 256; ++config) {
    std::array<int, 12> uses{};
    for (const auto& t : mc_case(config))
      for (int e : t) ++uses[e];
    for (int e = 0; e < 12; ++e) {
      const auto [c0, c1] = mc_edge_corners(e);
      const bool crossing = ((config >> c0) & 1) != ((config >> c1) & 1);
      CHECK(crossing == (uses[e] > 0));
    }
  }
  CHECK(mc_case(0).empty());
  CHECK(mc_case(255).empty());
  CHECK(mc_case(1).size() == 1);
}

TEST_CASE("random fields with a positive border give closed, outward surfaces") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    VoxelGrid g = make_grid(8, 1.0);
    g.values.resize(g.size());
    for (std::size_t k = 0; k < 8; ++k)
      for (std::size_t j = 0; j < 8; ++j)
        for (std::size_t i = 0; i < 8; ++i) {
          const bool border = i == 0 || j == 0 || k == 0 || i == 7 || j == 7 || k == 7;
          g.values[g.index(i, j, k)] = border ? 1.0 : u(rng);
        }
    const auto m = marching_cubes(g);
    REQUIRE(closed_and_consistent(m));
    for (double v : component_volumes(m)) CHECK(v > 0.0);
  }
}

TEST_CASE("analytic sphere at 64^3: radii within half a cell diagonal, normals outward") {
  const double r = 50.0;
  const VoxelGrid g = make_grid(64);
  const auto m = sphere_mesh(64, r);
  REQUIRE(!m.empty());
  double worst = 0.0;
  for (const Vec3& v : m.vertices) worst = std::max(worst, std::fabs(v.norm() - r));
  CHECK(worst < 0.5 * g.cell_diagonal());
  CHECK(worst < g.cell_diagonal());  // |f| at every vertex
  CHECK(closed_and_consistent(m));
  for (std::size_t f = 0; f < m.faces.size(); ++f)
    CHECK(geom::face_normal_unnormalized(m, f).dot(geom::face_centroid(m, f)) > 0.0);
}

TEST_CASE("linear fields are reproduced exactly") {
  const Vec3 n = Vec3(0.3, -0.5, 0.8).normalized();
  const auto m = extract_surface(analytic([&](const Vec3& p) { return n.dot(p) - 7.0; }), make_grid(24));
  REQUIRE(!m.empty());
  for (const Vec3& v : m.vertices) CHECK(std::fabs(n.dot(v) - 7.0) < 1e-9);
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    const Vec3 fn = geom::face_normal_unnormalized(m, f);
    if (fn.norm() > 1e-9) CHECK(fn.normalized().dot(n) > 0.999);
  }
}

TEST_CASE("no crossing gives an empty mesh; bad grids are rejected") {
  CHECK(extract_surface(analytic([](const Vec3&) { return 1.0; }), make_grid(16)).empty());
  CHECK_THROWS_AS(make_grid(7), Error);
  VoxelGrid g = make_grid(8);
  CHECK_THROWS_AS(marching_cubes(g), Error);  // no samples
  CHECK_THROWS_AS(sample_field(g, analytic([](const Vec3&) { return std::nan(""); })), Error);
}

TEST_CASE("KD-tree nearest neighbours equal brute force, ties included") {
  const auto pts = random_points(500, 1);
  const KDTree tree(pts);
  for (const Vec3& q : random_points(500, 2, 60.0)) {
    const auto a = tree.nearest(q);
    const auto b = nearest_brute_force(q, pts);
    CHECK(a.index == b.index);
    CHECK(a.squared_distance == b.squared_distance);
  }
  // Integer lattice with duplicates: many exact ties.
  std::vector<Vec3> lattice;
  for (int rep = 0; rep < 2; ++rep)
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j)
        for (int k = 0; k < 5; ++k) lattice.emplace_back(i, j, k);
  const KDTree lt(lattice);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) {
      const Vec3 q(0.5 * i, 0.5 * j, 2.5);
      CHECK(lt.nearest(q).index == nearest_brute_force(q, lattice).index);
    }
}

TEST_CASE("chamfer: KD-tree route equals brute force; hand cases; symmetry") {
  const auto a = random_points(500, 3), b = random_points(500, 4);
  CHECK(std::fabs(chamfer(a, b) - brute_chamfer(a, b)) < 1e-12);
  CHECK(chamfer(a, b) == chamfer(b, a));
  CHECK(chamfer(a, a) == 0.0);
  CHECK(chamfer({Vec3(0, 0, 0)}, {Vec3(3, 0, 0)}) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK_THROWS_AS(chamfer({}, b), Error);
}

TEST_CASE("fscore: identical, disjoint and the half-precision hand case") {
  const auto a = random_points(200, 5);
  CHECK(fscore(a, a) == 100.0);
  std::vector<Vec3> far = a;
  for (auto& p : far) p.x() += 1000.0;
  CHECK(fscore(a, far) == 0.0);
  const std::vector<Vec3> gt{Vec3(0, 0, 0), Vec3(10, 0, 0)};
  const std::vector<Vec3> pred{Vec3(0, 0, 0.5), Vec3(10, 0, 0), Vec3(0, 50, 0), Vec3(0, -50, 0)};
  CHECK(fscore(pred, gt, 1.0) == doctest::Approx(200.0 / 3.0).epsilon(1e-12));
  CHECK(fscore(pred, gt) == fscore(gt, pred));
  CHECK_THROWS_AS(fscore(pred, {}), Error);
}

TEST_CASE("normal consistency: self, flipped plane, coarser sphere, degenerate faces") {
  const auto plane = square(20.0, 0.0, false);
  CHECK(normal_consistency(plane, plane, 2000, 1).value == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(normal_consistency(plane, square(20.0, 0.0, true), 2000, 1).value == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(normal_consistency(plane, square(20.0, 0.0, true), 2000, 1, true).value ==
        doctest::Approx(1.0).epsilon(1e-12));

  const auto fine = sphere_mesh(64, 50.0), coarse = sphere_mesh(32, 50.0);
  const auto nc = normal_consistency(fine, coarse, 5000, 2);
  CHECK(nc.value > 0.99);
  CHECK(nc.value <= 1.0);

  TriangleMesh with_sliver = plane;
  with_sliver.vertices.push_back(Vec3(0, 0, 5));
  const int s = int(with_sliver.vertices.size()) - 1;
  with_sliver.faces.push_back({s, s, s});
  std::vector<Vec3> pts{Vec3(0, 0, 5), Vec3(1, 1, 0)};
  std::vector<int> faces{int(with_sliver.faces.size()) - 1, 0};
  const auto d = normal_consistency_directed(with_sliver, pts, faces, plane);
  CHECK(d.skipped == 1);
  CHECK(d.value == doctest::Approx(1.0));
}

TEST_CASE("evaluate_meshes crops to the footprint and reports a valid range") {
  const auto gt = square(20.0, 0.0, false);
  const auto pred = square(40.0, 0.2, false);
  const auto cropped = crop_to_footprint(pred, gt);
  CHECK(geom::total_area(cropped) == doctest::Approx(40.0 * 40.0).epsilon(0.05));
  EvalOptions o;
  o.samples = 4000;
  const auto r = evaluate_meshes(pred, gt, o);
  CHECK(r.chamfer_mm < 0.6);
  CHECK(r.chamfer_mm > 0.1);
  CHECK(r.fscore_pct > 99.0);  // sample spacing, not geometry, limits this
  CHECK(r.normal_consistency == doctest::Approx(1.0).epsilon(1e-9));
  o.crop = false;
  CHECK(evaluate_meshes(pred, gt, o).chamfer_mm > r.chamfer_mm);
  nlohmann::json j = r;
  CHECK(j.contains("chamfer_mm"));
  CHECK(!j.contains("ede_mm"));
}

TEST_CASE("vertex distances against a plane") {
  const auto gt = square(20.0, 0.0, false);
  const auto d = vertex_distances(square(10.0, 3.0, false), gt);
  for (double x : d) CHECK(x == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("interpolate_codes: exact endpoints, symmetric midpoint, subsets, size checks") {
  const auto c = testing::tiny_model_config();
  const auto a = testing::random_codes(c, 1), b = testing::random_codes(c, 2);
  auto same = [](const diff::Var& x, const diff::Var& y) { return x.value().values() == y.value().values(); };
  const auto t0 = interpolate_codes(a, b, 0.0), t1 = interpolate_codes(a, b, 1.0);
  CHECK((same(t0.exp, a.exp) && same(t0.id, a.id) && same(t0.detail, a.detail)));
  CHECK((same(t1.exp, b.exp) && same(t1.id, b.id) && same(t1.detail, b.detail)));

  model::LatentCodes neg{diff::scale(a.exp, -1.0), diff::scale(a.id, -1.0), diff::scale(a.detail, -1.0)};
  const auto mid = interpolate_codes(a, neg, 0.5);
  for (double v : mid.exp.value().values()) CHECK(v == 0.0);
  for (double v : mid.detail.value().values()) CHECK(v == 0.0);

  const auto e = swap_codes(a, b, CodeSubset::exp);
  CHECK((same(e.exp, b.exp) && same(e.id, a.id) && same(e.detail, a.detail)));
  const auto d = swap_codes(a, b, parse_subset("detail"));
  CHECK((same(d.exp, a.exp) && same(d.detail, b.detail)));

  auto wrong = b;
  wrong.id = diff::constant(diff::Tensor(1, 7));
  CHECK_THROWS_AS(interpolate_codes(a, wrong, 0.3), Error);
  CHECK_THROWS_AS(interpolate_codes(a, b, 1.5), Error);
  CHECK_THROWS_AS(parse_subset("pose"), Error);
}

TEST_CASE("interpolated codes give finite fields on the whole grid") {
  auto m = testing::tiny_model(4);
  testing::randomize_detail_head(m, 5);
  const auto a = testing::random_codes(m.config, 6), b = testing::random_codes(m.config, 7);
  for (double t : {0.0, 0.25, 0.5, 1.0}) {
    VoxelGrid g = make_grid(12);
    CHECK_NOTHROW(sample_field(g, model_field(m, interpolate_codes(a, b, t), true)));
    CHECK(g.values.size() == g.size());
  }
}

TEST_CASE("correspondence_map: self match, determinism") {
  auto m = testing::tiny_model(8);
  const auto codes = testing::random_codes(m.config, 9);
  const auto pts = random_points(300, 10, 60.0);
  const auto self = correspondence_map(m, codes, pts, codes, pts);
  REQUIRE(self.size() == pts.size());
  for (std::size_t n = 0; n < pts.size(); ++n) {
    CHECK(self[n].target_index == int(n));
    CHECK(self[n].distance == 0.0);
  }
  const auto other = testing::random_codes(m.config, 11);
  const auto x = correspondence_map(m, codes, pts, other, random_points(400, 12, 60.0));
  const auto y = correspondence_map(m, codes, pts, other, random_points(400, 12, 60.0));
  for (std::size_t n = 0; n < x.size(); ++n) {
    CHECK(x[n].target_index == y[n].target_index);
    CHECK(x[n].distance == y[n].distance);
    CHECK(x[n].distance >= 0.0);
  }
}

TEST_CASE("ede_tde: identity deformations, 3 mm hand case, missing ground truth") {
  const auto m = rigid_model();
  const auto codes = testing::random_codes(m.config, 13);
  const auto pts = random_points(50, 14, 60.0);
  const auto zero = ede_tde(m, codes, pts, pts, pts);
  CHECK(zero.ede_mm < 1e-12);
  CHECK(zero.tde_mm < 1e-12);
  CHECK(mean_expression_displacement(m, codes, pts) < 1e-12);

  const std::vector<Vec3> p{Vec3(10, 20, 30)};
  const auto e = ede_tde(m, codes, p, {Vec3(13, 20, 30)}, p);
  CHECK(e.ede_mm == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(e.tde_mm < 1e-12);
  CHECK_THROWS_AS(ede_tde(m, codes, pts, {}, pts), Error);
}

TEST_CASE("PCA: line data, orthonormal components, full reconstruction") {
  std::mt19937_64 rng(15);
  std::normal_distribution<double> g(0.0, 1.0);
  const Eigen::RowVector3d dir = Eigen::RowVector3d(1, 2, -2) / 3.0, base(0.5, -1, 2);
  Eigen::MatrixXd line(40, 3);
  for (int i = 0; i < 40; ++i) line.row(i) = base + g(rng) * dir;
  const auto pl = pca_embeddings(line);
  CHECK(std::fabs(std::fabs(pl.components.row(0).dot(dir)) - 1.0) < 1e-10);
  CHECK(pl.singular_values(1) < 1e-10);
  CHECK(pl.singular_values(2) < 1e-10);

  Eigen::MatrixXd data(30, 8);
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 8; ++j) data(i, j) = g(rng) * (j + 1);
  const auto p = pca_embeddings(data);
  CHECK((p.components * p.components.transpose() - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-10);
  for (int c = 1; c < p.explained_variance.size(); ++c) CHECK(p.explained_variance(c) <= p.explained_variance(c - 1));
  CHECK((p.reconstruct(p.project(data)) - data).cwiseAbs().maxCoeff() < 1e-9);

  CHECK(pca_embeddings(data, 3).components.rows() == 3);
  CHECK_THROWS_AS(pca_embeddings(data.topRows(2), 3), Error);
}
