#include "imface/reconeval/metrics.hpp"

#include "imface/error.hpp"
#include "imface/geomprep/bvh.hpp"
#include "imface/geomprep/preprocess.hpp"
#include "imface/parallel.hpp"
#include "imface/reconeval/kdtree.hpp"

#include <cmath>
#include <fstream>

namespace imface::recon {

namespace {

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

void require_points(const std::vector<Vec3>& a, const std::vector<Vec3>& b, const char* what) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::data, std::string(what) + " needs two non-empty point sets");
}

double fraction_within(const std::vector<double>& d, double tau) {
  std::size_t n = 0;
  for (double x : d) n += x <= tau;
  return double(n) / double(d.size());
}

}  // namespace

double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  require_points(a, b, "chamfer");
  const KDTree ta(a), tb(b);
  return 0.5 * (mean(nearest_distances(a, tb)) + mean(nearest_distances(b, ta)));
}

double fscore(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt, double tau_mm) {
  require_points(pred, gt, "fscore");
  if (!(tau_mm > 0.0)) throw Error(ErrorKind::config, "fscore threshold must be positive");
  const double precision = fraction_within(nearest_distances(pred, KDTree(gt)), tau_mm);
  const double recall = fraction_within(nearest_distances(gt, KDTree(pred)), tau_mm);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall) * 100.0;
}

NormalConsistency normal_consistency_directed(const geom::TriangleMesh& from, const std::vector<Vec3>& samples,
                                              const std::vector<int>& faces, const geom::TriangleMesh& to,
                                              bool absolute) {
  if (samples.size() != faces.size()) throw Error(ErrorKind::dimension, "one face index per sample expected");
  if (samples.empty() || to.empty()) throw Error(ErrorKind::data, "normal consistency needs two non-empty meshes");
  const geom::BVH bvh(to);
  std::vector<double> dot(samples.size(), 0.0);
  std::vector<char> ok(samples.size(), 0);
  parallel_for(samples.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t n = b; n < e; ++n) {
      const Vec3 na = geom::face_normal_unnormalized(from, std::size_t(faces[n]));
      const geom::ClosestHit hit = bvh.closest_point(samples[n]);
      const Vec3 nb = geom::face_normal_unnormalized(to, std::size_t(hit.face));
      if (na.norm() == 0.0 || nb.norm() == 0.0) continue;
      const double d = na.normalized().dot(nb.normalized());
      dot[n] = absolute ? std::fabs(d) : d;
      ok[n] = 1;
    }
  });
  NormalConsistency r;
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t n = 0; n < samples.size(); ++n) {
    if (!ok[n]) {
      ++r.skipped;
      continue;
    }
    sum += dot[n];
    ++used;
  }
  if (used == 0) throw Error(ErrorKind::data, "every normal-consistency sample was degenerate");
  r.value = std::clamp(sum / double(used), -1.0, 1.0);
  return r;
}

NormalConsistency normal_consistency(const geom::TriangleMesh& pred, const geom::TriangleMesh& gt,
                                     std::size_t n_samples, std::uint64_t seed, bool absolute) {
  std::vector<int> fp, fg;
  const auto sp = geom::sample_surface(pred, n_samples, mix_seed(seed, 0), &fp);
  const auto sg = geom::sample_surface(gt, n_samples, mix_seed(seed, 1), &fg);
  const auto a = normal_consistency_directed(pred, sp, fp, gt, absolute);
  const auto b = normal_consistency_directed(gt, sg, fg, pred, absolute);
  return {0.5 * (a.value + b.value), a.skipped + b.skipped};
}

void to_json(nlohmann::json& j, const MetricReport& r) {
  j = {{"chamfer_mm", r.chamfer_mm},
       {"fscore_pct", r.fscore_pct},
       {"tau_mm", r.tau_mm},
       {"normal_consistency", r.normal_consistency},
       {"nc_skipped", r.nc_skipped},
       {"samples", r.samples}};
  if (r.ede_mm) j["ede_mm"] = *r.ede_mm;
  if (r.tde_mm) j["tde_mm"] = *r.tde_mm;
}

geom::TriangleMesh crop_to_footprint(const geom::TriangleMesh& pred, const geom::TriangleMesh& gt, double radius_mm) {
  if (gt.empty()) throw Error(ErrorKind::data, "footprint crop needs a non-empty ground truth");
  const geom::BVH bvh(gt);
  std::vector<char> keep(pred.faces.size(), 0);
  parallel_for(pred.faces.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t f = b; f < e; ++f) {
      const Vec3 c = geom::face_centroid(pred, f);
      if (c.norm() > radius_mm) continue;
      const Vec3 origin(c.x(), c.y(), 10.0 * radius_mm);
      keep[f] = bvh.ray_hits_any(origin, Vec3(0, 0, -1), -1, 0.0);
    }
  });
  return geom::filter_faces(pred, std::vector<bool>(keep.begin(), keep.end()));
}

MetricReport evaluate_meshes(const geom::TriangleMesh& pred_in, const geom::TriangleMesh& gt, const EvalOptions& o) {
  if (pred_in.empty() || gt.empty()) throw Error(ErrorKind::data, "metrics need non-empty meshes");
  const geom::TriangleMesh pred = o.crop ? crop_to_footprint(pred_in, gt, o.radius_mm) : pred_in;
  if (pred.empty()) throw Error(ErrorKind::data, "the prediction has no faces inside the ground-truth footprint");

  std::vector<int> fp, fg;
  const auto sp = geom::sample_surface(pred, o.samples, mix_seed(o.seed, 0), &fp);
  const auto sg = geom::sample_surface(gt, o.samples, mix_seed(o.seed, 1), &fg);
  const KDTree tp(sp), tg(sg);
  const auto dp = nearest_distances(sp, tg);
  const auto dg = nearest_distances(sg, tp);

  MetricReport r;
  r.samples = o.samples;
  r.tau_mm = o.tau_mm;
  r.chamfer_mm = 0.5 * (mean(dp) + mean(dg));
  const double precision = fraction_within(dp, o.tau_mm), recall = fraction_within(dg, o.tau_mm);
  r.fscore_pct = precision + recall == 0.0 ? 0.0 : 200.0 * precision * recall / (precision + recall);
  const auto a = normal_consistency_directed(pred, sp, fp, gt, o.abs_normals);
  const auto b = normal_consistency_directed(gt, sg, fg, pred, o.abs_normals);
  r.normal_consistency = 0.5 * (a.value + b.value);
  r.nc_skipped = a.skipped + b.skipped;
  return r;
}

std::vector<double> vertex_distances(const geom::TriangleMesh& mesh, const geom::TriangleMesh& reference) {
  const geom::BVH bvh(reference);
  std::vector<double> d(mesh.vertices.size());
  parallel_for(d.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t n = b; n < e; ++n) d[n] = bvh.closest_point(mesh.vertices[n]).distance;
  });
  return d;
}

void write_scalar_sidecar(const std::filesystem::path& path, const std::vector<double>& values) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out.precision(9);
  for (double v : values) out << v << '\n';
  if (!out) throw Error(ErrorKind::io, "failed writing " + path.string());
}

}  // namespace imface::recon
