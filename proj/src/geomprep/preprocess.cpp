#include "imface/geomprep/preprocess.hpp"

#include "imface/error.hpp"
#include "imface/geomprep/delaunay.hpp"
#include "imface/log.hpp"
#include "imface/parallel.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>

namespace imface::geom {

LandmarkMatrix canonical_landmarks() {
  LandmarkMatrix l(5, 3);
  l << -35.0, 25.0, 20.0,  //
      35.0, 25.0, 20.0,    //
      0.0, 0.0, 40.0,      //
      -20.0, -30.0, 22.0,  //
      20.0, -30.0, 22.0;
  return l;
}

namespace {

LandmarkMatrix reference_for(std::size_t k) {
  const LandmarkMatrix canon = canonical_landmarks();
  if (k != static_cast<std::size_t>(canon.rows())) {
    throw Error(ErrorKind::data, "normalize: expected " + std::to_string(canon.rows()) + " landmarks, got " +
                                     std::to_string(k));
  }
  return canon;
}

// Rotation R minimizing sum |R (src_i - c_src) - (dst_i - c_dst)|^2.
Eigen::Matrix3d kabsch(const LandmarkMatrix& src, const LandmarkMatrix& dst) {
  const Eigen::RowVector3d cs = src.colwise().mean();
  const Eigen::RowVector3d cd = dst.colwise().mean();
  const Eigen::MatrixX3d a = src.rowwise() - cs;
  const Eigen::MatrixX3d b = dst.rowwise() - cd;
  Eigen::JacobiSVD<Eigen::MatrixX3d> spread(a);
  const auto sv = spread.singularValues();
  if (sv[0] <= 0.0 || sv[1] <= 1e-9 * sv[0]) throw Error(ErrorKind::data, "normalize: landmarks are collinear");
  const Eigen::Matrix3d h = a.transpose() * b;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  return svd.matrixV() * d * svd.matrixU().transpose();
}

}  // namespace

NormalizedMesh normalize_and_crop(const TriangleMesh& mesh, const LandmarkMatrix& landmarks,
                                  const NormalizeOptions& options) {
  mesh.validate();
  if (landmarks.rows() < 3) throw Error(ErrorKind::data, "normalize: need at least 3 landmarks");
  const LandmarkMatrix reference = reference_for(static_cast<std::size_t>(landmarks.rows()));
  const LandmarkMatrix scaled = landmarks * options.unit_to_mm;
  const Eigen::Matrix3d r = kabsch(scaled, reference);

  const Eigen::RowVector3d cs = scaled.colwise().mean();
  const Eigen::RowVector3d cd = reference.colwise().mean();
  Vec3 t = cd.transpose() - r * cs.transpose();
  const Vec3 nose = r * scaled.row(kNoseTip).transpose() + t;
  t += Vec3(0.0, 0.0, options.nose_depth_mm) - nose;

  NormalizedMesh out;
  out.rotation = r;
  out.translation = t;
  out.mesh = mesh;
  for (auto& v : out.mesh.vertices) v = r * (options.unit_to_mm * v) + t;
  out.landmarks = LandmarkMatrix(landmarks.rows(), 3);
  for (Eigen::Index i = 0; i < landmarks.rows(); ++i) out.landmarks.row(i) = (r * scaled.row(i).transpose() + t).transpose();

  std::vector<bool> keep(mesh.faces.size(), true);
  const double r2 = options.radius_mm * options.radius_mm;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    for (int v : mesh.faces[f]) {
      if (out.mesh.vertices[v].squaredNorm() > r2) keep[f] = false;
    }
  }
  out.mesh = filter_faces(out.mesh, keep);
  return out;
}

TriangleMesh remove_hidden_surfaces(const TriangleMesh& mesh) {
  if (mesh.faces.empty()) return mesh;
  const BVH bvh(mesh);
  const double eps = 1e-6 * std::max(1.0, bbox_diagonal(mesh));
  const Vec3 up(0.0, 0.0, 1.0);
  std::vector<char> keep(mesh.faces.size(), 1);
  parallel_for(mesh.faces.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t f = begin; f < end; ++f) {
      const Vec3 origin = face_centroid(mesh, f) + eps * up;
      keep[f] = bvh.ray_hits_any(origin, up, static_cast<int>(f), 0.0) ? 0 : 1;
    }
  });
  return filter_faces(mesh, std::vector<bool>(keep.begin(), keep.end()));
}

SampleTriplet signed_distance_sample(const Vec3& p, const SurfaceQuery& surface) {
  constexpr double kOnSurface = 1e-9;
  constexpr double kSignTol = 1e-12;
  const ClosestHit hit = surface.bvh->closest_point(p);
  SampleTriplet s;
  s.point = p;
  if (hit.distance < kOnSurface) {
    const auto& f = surface.mesh->faces[hit.face];
    const auto& v = surface.mesh->vertices;
    // barycentric blend of the area-weighted vertex normals
    const Vec3 n_face = face_normal_unnormalized(*surface.mesh, hit.face);
    const double area2 = n_face.squaredNorm();
    Vec3 n = Vec3::Zero();
    if (area2 > 0.0) {
      const double w0 = (v[f[1]] - hit.point).cross(v[f[2]] - hit.point).dot(n_face) / area2;
      const double w1 = (v[f[2]] - hit.point).cross(v[f[0]] - hit.point).dot(n_face) / area2;
      const double w2 = 1.0 - w0 - w1;
      const auto& vn = *surface.normals;
      n = w0 * vn[f[0]] + w1 * vn[f[1]] + w2 * vn[f[2]];
    }
    if (n.norm() == 0.0) n = n_face;
    n.normalize();
    if (n.z() < 0.0) n = -n;
    s.sdf = 0.0;
    s.gradient = n;
    return s;
  }
  const Vec3 u = (hit.point - p) / hit.distance;  // query -> surface
  double sign = 1.0;
  if (u.z() > kSignTol) {
    sign = -1.0;
  } else if (std::fabs(u.z()) <= kSignTol) {
    log_debug("sdf sign ambiguous at (" + std::to_string(p.x()) + ", " + std::to_string(p.y()) + ", " +
              std::to_string(p.z()) + "); using positive");
  }
  s.sdf = sign * hit.distance;
  s.gradient = sign * (p - hit.point) / hit.distance;
  return s;
}

namespace {

struct AreaSampler {
  explicit AreaSampler(const TriangleMesh& mesh) : mesh_(mesh) {
    cumulative_.reserve(mesh.faces.size());
    double acc = 0.0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
      acc += face_area(mesh, f);
      cumulative_.push_back(acc);
    }
    if (mesh.faces.empty() || acc <= 0.0) throw Error(ErrorKind::data, "surface sampling: mesh has zero area");
  }

  Vec3 sample(std::mt19937_64& rng, int* face_out) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double target = unit(rng) * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
    if (it == cumulative_.end()) --it;
    const int f = static_cast<int>(it - cumulative_.begin());
    const double r1 = std::sqrt(unit(rng));
    const double r2 = unit(rng);
    const auto& tri = mesh_.faces[f];
    if (face_out) *face_out = f;
    return (1.0 - r1) * mesh_.vertices[tri[0]] + r1 * (1.0 - r2) * mesh_.vertices[tri[1]] +
           r1 * r2 * mesh_.vertices[tri[2]];
  }

 private:
  const TriangleMesh& mesh_;
  std::vector<double> cumulative_;
};

Vec3 random_direction(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (;;) {
    Vec3 d(g(rng), g(rng), g(rng));
    const double n = d.norm();
    if (n > 1e-12) return d / n;
  }
}

}  // namespace

std::vector<Vec3> sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed, std::vector<int>* faces) {
  const AreaSampler sampler(mesh);
  std::vector<Vec3> out(n);
  if (faces) faces->assign(n, -1);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      std::mt19937_64 rng(mix_seed(seed, i));
      out[i] = sampler.sample(rng, faces ? &(*faces)[i] : nullptr);
    }
  });
  return out;
}

std::vector<SampleTriplet> sample_training_points(const TriangleMesh& mesh, const SamplingOptions& options) {
  const AreaSampler sampler(mesh);
  const BVH bvh(mesh);
  const std::vector<Vec3> normals = vertex_normals(mesh);
  const SurfaceQuery surface{&mesh, &bvh, &normals};
  const double r2 = options.radius_mm * options.radius_mm;
  const std::size_t total = options.n_near + options.n_uniform;
  std::vector<SampleTriplet> out(total);
  parallel_for(total, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      std::mt19937_64 rng(mix_seed(options.seed, i));
      Vec3 p;
      if (i < options.n_near) {
        std::normal_distribution<double> offset(0.0, options.sigma_near_mm);
        do {
          p = sampler.sample(rng, nullptr) + offset(rng) * random_direction(rng);
        } while (p.squaredNorm() > r2);
      } else {
        std::uniform_real_distribution<double> box(-options.radius_mm, options.radius_mm);
        do {
          p = Vec3(box(rng), box(rng), box(rng));
        } while (p.squaredNorm() > r2);
      }
      out[i] = signed_distance_sample(p, surface);
    }
  });
  return out;
}

NormalizedMesh preprocess_mesh(const TriangleMesh& mesh, const LandmarkMatrix& landmarks,
                               const NormalizeOptions& options) {
  NormalizedMesh n = normalize_and_crop(mesh, landmarks, options);
  n.mesh = remove_hidden_surfaces(n.mesh);
  n.mesh = delaunay_xy(n.mesh);
  return n;
}

}  // namespace imface::geom
