#pragma once

#include <Eigen/Dense>

#include <array>
#include <filesystem>
#include <vector>

namespace imface::geom {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Face = std::array<int, 3>;

/// Triangle mesh in millimetres. Faces are CCW seen from +z after preprocessing.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<int> landmark_indices;  // optional

  bool empty() const { return faces.empty(); }
  /// Throws Error(data) when a face index is out of range.
  void validate() const;
};

Vec3 face_normal_unnormalized(const TriangleMesh& mesh, std::size_t face);  // 2 * area * unit normal
double face_area(const TriangleMesh& mesh, std::size_t face);
Vec3 face_centroid(const TriangleMesh& mesh, std::size_t face);
double total_area(const TriangleMesh& mesh);
/// Area-weighted, normalized per-vertex normals (zero for isolated vertices).
std::vector<Vec3> vertex_normals(const TriangleMesh& mesh);
double bbox_diagonal(const TriangleMesh& mesh);

/// Drops unreferenced vertices and remaps faces and landmark indices. A
/// landmark whose vertex disappears raises Error(data).
TriangleMesh compact_vertices(const TriangleMesh& mesh);
/// Keeps the faces whose mask entry is true, then compacts.
TriangleMesh filter_faces(const TriangleMesh& mesh, const std::vector<bool>& keep);
TriangleMesh transformed(const TriangleMesh& mesh, const Eigen::Matrix3d& rotation, const Vec3& translation);

/// Minimal OBJ subset: `v x y z` and `f a b c` (1-based, `a/b/c` forms accepted,
/// polygons fan-triangulated). Everything else is ignored.
TriangleMesh read_obj(const std::filesystem::path& path);
void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh);

/// Sidecar text file with one vertex index per line.
std::vector<int> read_landmark_indices(const std::filesystem::path& path);
void write_landmark_indices(const std::filesystem::path& path, const std::vector<int>& indices);

}  // namespace imface::geom
