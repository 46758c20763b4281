#include "imface/geomprep/mesh.hpp"

#include "imface/error.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace imface::geom {

void TriangleMesh::validate() const {
  const int n = static_cast<int>(vertices.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int idx : faces[f]) {
      if (idx < 0 || idx >= n) {
        throw Error(ErrorKind::data, "face " + std::to_string(f) + " references vertex " + std::to_string(idx) +
                                         " of " + std::to_string(n));
      }
    }
  }
  for (int idx : landmark_indices) {
    if (idx < 0 || idx >= n) throw Error(ErrorKind::data, "landmark index " + std::to_string(idx) + " out of range");
  }
}

Vec3 face_normal_unnormalized(const TriangleMesh& mesh, std::size_t face) {
  const auto& f = mesh.faces[face];
  const Vec3& a = mesh.vertices[f[0]];
  return (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a);
}

double face_area(const TriangleMesh& mesh, std::size_t face) { return 0.5 * face_normal_unnormalized(mesh, face).norm(); }

Vec3 face_centroid(const TriangleMesh& mesh, std::size_t face) {
  const auto& f = mesh.faces[face];
  return (mesh.vertices[f[0]] + mesh.vertices[f[1]] + mesh.vertices[f[2]]) / 3.0;
}

double total_area(const TriangleMesh& mesh) {
  double a = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) a += face_area(mesh, f);
  return a;
}

std::vector<Vec3> vertex_normals(const TriangleMesh& mesh) {
  std::vector<Vec3> n(mesh.vertices.size(), Vec3::Zero());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    // the cross product is already area-weighted
    const Vec3 fn = face_normal_unnormalized(mesh, f);
    for (int v : mesh.faces[f]) n[v] += fn;
  }
  for (auto& v : n) {
    const double len = v.norm();
    if (len > 0.0) v /= len;
  }
  return n;
}

double bbox_diagonal(const TriangleMesh& mesh) {
  if (mesh.vertices.empty()) return 0.0;
  Vec3 lo = mesh.vertices[0], hi = mesh.vertices[0];
  for (const auto& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return (hi - lo).norm();
}

TriangleMesh compact_vertices(const TriangleMesh& mesh) {
  // survivors keep their relative order so indices stay predictable
  std::vector<int> remap(mesh.vertices.size(), -1);
  for (const auto& f : mesh.faces) {
    for (int v : f) remap[v] = 0;
  }
  TriangleMesh result;
  for (std::size_t v = 0; v < remap.size(); ++v) {
    if (remap[v] < 0) continue;
    remap[v] = static_cast<int>(result.vertices.size());
    result.vertices.push_back(mesh.vertices[v]);
  }
  result.faces.reserve(mesh.faces.size());
  for (const auto& f : mesh.faces) result.faces.push_back({remap[f[0]], remap[f[1]], remap[f[2]]});
  for (int lm : mesh.landmark_indices) {
    if (remap[lm] < 0) throw Error(ErrorKind::data, "landmark vertex " + std::to_string(lm) + " was removed");
    result.landmark_indices.push_back(remap[lm]);
  }
  return result;
}

TriangleMesh filter_faces(const TriangleMesh& mesh, const std::vector<bool>& keep) {
  TriangleMesh kept;
  kept.vertices = mesh.vertices;
  kept.landmark_indices = mesh.landmark_indices;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    if (keep[f]) kept.faces.push_back(mesh.faces[f]);
  }
  return compact_vertices(kept);
}

TriangleMesh transformed(const TriangleMesh& mesh, const Eigen::Matrix3d& rotation, const Vec3& translation) {
  TriangleMesh out = mesh;
  for (auto& v : out.vertices) v = rotation * v + translation;
  return out;
}

namespace {

int parse_index(const std::string& token, int vertex_count, std::size_t line_no) {
  const std::string head = token.substr(0, token.find('/'));
  int idx = 0;
  const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), idx);
  if (ec != std::errc() || ptr != head.data() + head.size() || idx == 0) {
    throw Error(ErrorKind::data, "obj line " + std::to_string(line_no) + ": bad face index '" + token + "'");
  }
  return idx > 0 ? idx - 1 : vertex_count + idx;
}

}  // namespace

TriangleMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  TriangleMesh mesh;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ss >> v.x() >> v.y() >> v.z())) {
        throw Error(ErrorKind::data, "obj line " + std::to_string(line_no) + ": malformed vertex");
      }
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ss >> tok) poly.push_back(parse_index(tok, static_cast<int>(mesh.vertices.size()), line_no));
      if (poly.size() < 3) throw Error(ErrorKind::data, "obj line " + std::to_string(line_no) + ": face with < 3 vertices");
      for (std::size_t i = 1; i + 1 < poly.size(); ++i) mesh.faces.push_back({poly[0], poly[i], poly[i + 1]});
    }
  }
  mesh.validate();
  return mesh;
}

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << std::setprecision(17);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw Error(ErrorKind::io, "short write to " + path.string());
}

std::vector<int> read_landmark_indices(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::vector<int> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(std::stoi(line));
    } catch (const std::exception&) {
      throw Error(ErrorKind::data, path.string() + ": bad landmark index '" + line + "'");
    }
  }
  return out;
}

void write_landmark_indices(const std::filesystem::path& path, const std::vector<int>& indices) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  for (int i : indices) out << i << '\n';
}

}  // namespace imface::geom
