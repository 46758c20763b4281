#include "imface/geomprep/scan_record.hpp"

#include "imface/diffcore/checkpoint.hpp"
#include "imface/error.hpp"

#include <cstring>

namespace imface::geom {

namespace {

struct Out {
  std::vector<std::uint8_t> bytes;
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  void put_vec(const Vec3& v) {
    put(v.x());
    put(v.y());
    put(v.z());
  }
};

struct In {
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;
  void take(void* out, std::size_t n) {
    if (n > bytes.size() - pos) throw Error(ErrorKind::io, "scan record truncated");
    std::memcpy(out, bytes.data() + pos, n);
    pos += n;
  }
  template <class T>
  T get() {
    T v;
    take(&v, sizeof(T));
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    if (n > bytes.size() - pos) throw Error(ErrorKind::io, "scan record truncated");
    std::string s(n, '\0');
    take(s.data(), n);
    return s;
  }
  Vec3 get_vec() {
    const double x = get<double>(), y = get<double>(), z = get<double>();
    return {x, y, z};
  }
  void check_count(std::uint64_t n, std::size_t bytes_each) const {
    if (n > (bytes.size() - pos) / bytes_each) throw Error(ErrorKind::io, "scan record truncated");
  }
};

}  // namespace

void write_scan(const std::filesystem::path& path, const ScanRecord& scan) {
  if (scan.dense_points.size() != scan.dense_ids.size()) {
    throw Error(ErrorKind::data, "scan record: dense points and ids differ in length");
  }
  Out o;
  o.bytes.insert(o.bytes.end(), kScanMagic, kScanMagic + sizeof(kScanMagic));
  o.put_string(scan.identity);
  o.put_string(scan.expression);
  o.put<std::uint8_t>(scan.is_neutral ? 1 : 0);
  o.put<std::uint64_t>(static_cast<std::uint64_t>(scan.landmarks.rows()));
  o.put<std::uint64_t>(scan.dense_points.size());
  o.put<std::uint64_t>(scan.triplets.size());
  for (Eigen::Index i = 0; i < scan.landmarks.rows(); ++i) o.put_vec(scan.landmarks.row(i).transpose());
  for (const auto& p : scan.dense_points) o.put_vec(p);
  for (auto id : scan.dense_ids) o.put<std::int64_t>(id);
  for (const auto& t : scan.triplets) {
    o.put_vec(t.point);
    o.put(t.sdf);
    o.put_vec(t.gradient);
  }
  diff::write_file_bytes(path, o.bytes);
}

ScanRecord read_scan(const std::filesystem::path& path) {
  const auto bytes = diff::read_file_bytes(path);
  In in{bytes};
  char magic[sizeof(kScanMagic)];
  in.take(magic, sizeof(magic));
  if (std::memcmp(magic, kScanMagic, sizeof(magic)) != 0) throw Error(ErrorKind::io, path.string() + ": not a scan record");
  ScanRecord s;
  s.identity = in.get_string();
  s.expression = in.get_string();
  s.is_neutral = in.get<std::uint8_t>() != 0;
  const auto k = in.get<std::uint64_t>();
  const auto m = in.get<std::uint64_t>();
  const auto n = in.get<std::uint64_t>();
  in.check_count(k, 24);
  s.landmarks = LandmarkMatrix(static_cast<Eigen::Index>(k), 3);
  for (std::uint64_t i = 0; i < k; ++i) s.landmarks.row(static_cast<Eigen::Index>(i)) = in.get_vec().transpose();
  in.check_count(m, 32);
  s.dense_points.resize(m);
  s.dense_ids.resize(m);
  for (auto& p : s.dense_points) p = in.get_vec();
  for (auto& id : s.dense_ids) id = in.get<std::int64_t>();
  in.check_count(n, 56);
  s.triplets.resize(n);
  for (auto& t : s.triplets) {
    t.point = in.get_vec();
    t.sdf = in.get<double>();
    t.gradient = in.get_vec();
  }
  if (in.pos != bytes.size()) throw Error(ErrorKind::io, path.string() + ": trailing bytes after scan record");
  return s;
}

}  // namespace imface::geom
