#include "imface/training/dataset.hpp"

#include "imface/error.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <unordered_map>

namespace imface::train {

using diff::Tensor;

namespace {

Tensor landmark_tensor(const geom::LandmarkMatrix& l, double scale) {
  Tensor t(static_cast<std::size_t>(l.rows()), 3);
  for (Eigen::Index r = 0; r < l.rows(); ++r) {
    for (int c = 0; c < 3; ++c) t(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = l(r, c) * scale;
  }
  return t;
}

Tensor rows_of(const std::vector<geom::Vec3>& pts, double scale) {
  Tensor t(pts.size(), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (int c = 0; c < 3; ++c) t(i, static_cast<std::size_t>(c)) = pts[i][c] * scale;
  }
  return t;
}

// First `count` entries of a seeded partial shuffle of [0, n).
std::vector<std::size_t> pick(std::size_t n, std::size_t count, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (count >= n) return idx;
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> u(i, n - 1);
    std::swap(idx[i], idx[u(rng)]);
  }
  idx.resize(count);
  return idx;
}

Tensor gather(const Tensor& src, const std::vector<std::size_t>& rows) {
  const std::size_t c = src.cols();
  Tensor out(rows.size(), c);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(src.data() + rows[r] * c, c, out.data() + r * c);
  }
  return out;
}

}  // namespace

std::vector<std::string> scan_names(const std::filesystem::path& dir) {
  std::error_code ec;
  std::vector<std::string> names;
  for (const auto& e : std::filesystem::directory_iterator(dir, ec)) {
    if (e.is_regular_file() && e.path().extension() == ".imfscan") names.push_back(e.path().stem().string());
  }
  if (ec) throw Error(ErrorKind::io, "cannot list " + dir.string() + ": " + ec.message());
  std::sort(names.begin(), names.end());
  if (names.empty()) throw Error(ErrorKind::data, dir.string() + ": no .imfscan files");
  return names;
}

std::vector<geom::ScanRecord> load_scan_dir(const std::filesystem::path& dir) {
  std::vector<geom::ScanRecord> out;
  for (const auto& name : scan_names(dir)) out.push_back(geom::read_scan(dir / (name + ".imfscan")));
  return out;
}

ScanData scan_samples(const geom::ScanRecord& record, double unit_mm) {
  if (record.triplets.empty()) throw Error(ErrorKind::data, "scan " + record.identity + "/" + record.expression + " has no samples");
  const double s = 1.0 / unit_mm;
  ScanData d;
  d.identity = record.identity;
  d.expression = record.expression;
  d.is_neutral = record.is_neutral;
  const std::size_t n = record.triplets.size();
  d.points = Tensor(n, 3);
  d.sdf = Tensor(n, 1);
  d.normals = Tensor(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = record.triplets[i];
    for (std::size_t c = 0; c < 3; ++c) {
      d.points(i, c) = t.point[static_cast<int>(c)] * s;
      d.normals(i, c) = t.gradient[static_cast<int>(c)];
    }
    d.sdf(i, 0) = t.sdf * s;
  }
  d.landmarks = landmark_tensor(record.landmarks, s);
  return d;
}

TrainingSet build_training_set(const std::vector<geom::ScanRecord>& records, double unit_mm) {
  if (records.empty()) throw Error(ErrorKind::data, "training set is empty");
  const double s = 1.0 / unit_mm;
  TrainingSet set;
  std::map<std::string, std::size_t> id_index;
  std::vector<std::size_t> identity_of(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto [it, fresh] = id_index.try_emplace(records[i].identity, set.identities.size());
    if (fresh) set.identities.push_back(records[i].identity);
    identity_of[i] = it->second;
  }
  constexpr auto kNone = static_cast<std::size_t>(-1);
  set.neutral_scan.assign(set.identities.size(), kNone);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].is_neutral) continue;
    auto& slot = set.neutral_scan[identity_of[i]];
    if (slot != kNone) throw Error(ErrorKind::data, "identity " + records[i].identity + " has two neutral scans");
    slot = i;
  }
  for (std::size_t id = 0; id < set.identities.size(); ++id) {
    if (set.neutral_scan[id] == kNone) throw Error(ErrorKind::data, "identity " + set.identities[id] + " has no neutral scan");
  }
  const auto k = records[0].landmarks.rows();
  for (const auto& r : records) {
    if (r.landmarks.rows() != k) throw Error(ErrorKind::data, "scans disagree on the landmark count");
  }

  // neutral dense points by id, and ids present on every neutral scan
  std::vector<std::unordered_map<std::int64_t, geom::Vec3>> neutral(set.identities.size());
  std::unordered_map<std::int64_t, std::pair<geom::Vec3, std::size_t>> templ;
  for (std::size_t id = 0; id < set.identities.size(); ++id) {
    const auto& r = records[set.neutral_scan[id]];
    for (std::size_t j = 0; j < r.dense_ids.size(); ++j) {
      neutral[id].emplace(r.dense_ids[j], r.dense_points[j]);
      auto& t = templ.try_emplace(r.dense_ids[j], geom::Vec3::Zero(), 0).first->second;
      t.first += r.dense_points[j];
      ++t.second;
    }
  }

  const std::size_t n_ids = set.identities.size();
  set.mean_landmarks = Tensor(static_cast<std::size_t>(k), 3);
  set.mean_neutral = Tensor(static_cast<std::size_t>(k), 3);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    ScanData d = scan_samples(r, unit_mm);
    d.identity_index = identity_of[i];
    const auto& nr = records[set.neutral_scan[d.identity_index]];
    d.neutral_landmarks = landmark_tensor(nr.landmarks, s);
    set.mean_landmarks.matrix() += d.landmarks.matrix() / static_cast<double>(records.size());
    if (r.is_neutral) set.mean_neutral.matrix() += d.landmarks.matrix() / static_cast<double>(n_ids);

    std::vector<geom::Vec3> p, pn, pt;
    for (std::size_t j = 0; j < r.dense_ids.size(); ++j) {
      const auto id = r.dense_ids[j];
      const auto t = templ.find(id);
      if (t == templ.end() || t->second.second != n_ids) continue;
      const auto n = neutral[d.identity_index].find(id);
      if (n == neutral[d.identity_index].end()) continue;
      d.dense_ids.push_back(id);
      p.push_back(r.dense_points[j]);
      pn.push_back(n->second);
      pt.push_back(t->second.first / static_cast<double>(n_ids));
    }
    d.dense = rows_of(p, s);
    d.dense_neutral = rows_of(pn, s);
    d.dense_template = rows_of(pt, s);
    set.scans.push_back(std::move(d));
  }
  set.template_landmarks = set.mean_neutral;
  return set;
}

losses::ScanBatch assemble_batch(const ScanData& scan, std::size_t points, std::size_t dense, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto rows = pick(scan.points.rows(), points, rng);
  losses::ScanBatch b;
  b.points = gather(scan.points, rows);
  b.sdf = gather(scan.sdf, rows);
  b.normals = gather(scan.normals, rows);
  b.landmarks = scan.landmarks;
  b.neutral_landmarks = scan.neutral_landmarks;
  b.is_neutral = scan.is_neutral;
  if (dense > 0 && scan.dense.size() > 0) {
    const auto d = pick(scan.dense.rows(), dense, rng);
    b.dense = gather(scan.dense, d);
    b.dense_neutral = gather(scan.dense_neutral, d);
    b.dense_template = gather(scan.dense_template, d);
  }
  return b;
}

}  // namespace imface::train
