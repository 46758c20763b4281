#pragma once

#include "imface/geomprep/mesh.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace imface::recon {

using geom::Vec3;

/// Symmetric Chamfer distance: half the sum of both mean nearest distances.
double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

/// Percent F-score at threshold tau (a point counts when its distance <= tau).
double fscore(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt, double tau_mm = 1.0);

struct NormalConsistency {
  double value = 0.0;
  std::size_t skipped = 0;  // samples with a zero-area face on either side
};

/// One direction: mean over `from` samples of <n_from, n_to at the nearest
/// point on `to`>. `faces` names the face of `from` each sample lies on.
NormalConsistency normal_consistency_directed(const geom::TriangleMesh& from, const std::vector<Vec3>& samples,
                                              const std::vector<int>& faces, const geom::TriangleMesh& to,
                                              bool absolute = false);

/// Average of both directions over `n_samples` area-weighted samples per mesh.
NormalConsistency normal_consistency(const geom::TriangleMesh& pred, const geom::TriangleMesh& gt,
                                     std::size_t n_samples = 50000, std::uint64_t seed = 0, bool absolute = false);

struct MetricReport {
  double chamfer_mm = 0.0;
  double fscore_pct = 0.0;
  double tau_mm = 1.0;
  double normal_consistency = 0.0;
  std::size_t nc_skipped = 0;
  std::size_t samples = 0;
  std::optional<double> ede_mm, tde_mm;
};

void to_json(nlohmann::json& j, const MetricReport& r);

struct EvalOptions {
  std::size_t samples = 50000;
  double tau_mm = 1.0;
  bool abs_normals = false;
  bool crop = true;  // restrict the prediction to the ground truth's footprint
  double radius_mm = 100.0;
  std::uint64_t seed = 0;
};

/// Keeps the predicted faces whose centroid lies inside the sampling sphere
/// and above or below some ground-truth face. Reconstructions of an open scan
/// extend past its border; the crop compares like with like.
geom::TriangleMesh crop_to_footprint(const geom::TriangleMesh& pred, const geom::TriangleMesh& gt,
                                     double radius_mm = 100.0);

MetricReport evaluate_meshes(const geom::TriangleMesh& pred, const geom::TriangleMesh& gt,
                             const EvalOptions& options = {});

/// Distance from every vertex of `mesh` to the surface of `reference`.
std::vector<double> vertex_distances(const geom::TriangleMesh& mesh, const geom::TriangleMesh& reference);
/// One value per line, in vertex order.
void write_scalar_sidecar(const std::filesystem::path& path, const std::vector<double>& values);

}  // namespace imface::recon
