#pragma once

#include "imface/geomprep/bvh.hpp"
#include "imface/geomprep/mesh.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace imface::geom {

using LandmarkMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Landmark order used throughout: outer left eye corner, outer right eye
/// corner, nose tip, left mouth corner, right mouth corner.
inline constexpr int kNoseTip = 2;

/// Frontal reference landmarks (mm) for rigid alignment, nose tip at (0, 0, 40).
LandmarkMatrix canonical_landmarks();

struct NormalizeOptions {
  double radius_mm = 100.0;
  double nose_depth_mm = 40.0;  // origin sits this far behind the nose tip
  double unit_to_mm = 1.0;      // input units -> mm
};

struct NormalizedMesh {
  TriangleMesh mesh;
  LandmarkMatrix landmarks;  // transformed into the output frame
  Eigen::Matrix3d rotation;
  Vec3 translation;  // output = unit_to_mm * rotation * input + translation
};

/// Rigidly aligns landmarks to the canonical frontal frame (Kabsch), puts the
/// origin `nose_depth_mm` behind the nose tip and crops every triangle with a
/// vertex outside the sampling sphere.
NormalizedMesh normalize_and_crop(const TriangleMesh& mesh, const LandmarkMatrix& landmarks,
                                  const NormalizeOptions& options = {});

/// Drops triangles occluded from the +z view: a ray from each centroid toward
/// +z that hits another triangle removes it.
TriangleMesh remove_hidden_surfaces(const TriangleMesh& mesh);

struct SampleTriplet {
  Vec3 point;
  double sdf = 0.0;
  Vec3 gradient;
};

struct SurfaceQuery {
  const TriangleMesh* mesh;
  const BVH* bvh;
  const std::vector<Vec3>* normals;  // area-weighted vertex normals
};

/// Signed distance with the frontal sign convention: negative behind the sheet.
SampleTriplet signed_distance_sample(const Vec3& p, const SurfaceQuery& surface);

struct SamplingOptions {
  std::size_t n_near = 4000;
  std::size_t n_uniform = 4000;
  double sigma_near_mm = 10.0;
  double radius_mm = 100.0;
  std::uint64_t seed = 0;
};

/// Near-surface samples (area-weighted surface point displaced along a
/// random direction by N(0, sigma)) followed by uniform samples in the
/// sphere. Each point owns an RNG stream derived from (seed, index).
std::vector<SampleTriplet> sample_training_points(const TriangleMesh& mesh, const SamplingOptions& options);

/// Area-weighted uniform surface samples with the face they came from.
std::vector<Vec3> sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed,
                                 std::vector<int>* faces = nullptr);

/// Full pipeline: normalize/crop, hidden-surface removal, Delaunay on x-y.
NormalizedMesh preprocess_mesh(const TriangleMesh& mesh, const LandmarkMatrix& landmarks,
                               const NormalizeOptions& options = {});

}  // namespace imface::geom
