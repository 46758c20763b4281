#include "imface/synthdata/synth.hpp"

#include "imface/diffcore/checkpoint.hpp"
#include "imface/error.hpp"
#include "imface/log.hpp"
#include "imface/parallel.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <random>

namespace imface::synth {

namespace {

constexpr double kPi = std::numbers::pi;

// Seed streams; each factor draws from its own stream so changing one count
// never reshuffles the others.
constexpr std::uint64_t kIdentityStream = 0;
constexpr std::uint64_t kDetailStream = 1ull << 20;
constexpr std::uint64_t kExpressionStream = 2ull << 20;
constexpr std::uint64_t kJitterStream = 3ull << 20;
constexpr std::uint64_t kSampleStream = 4ull << 20;

constexpr int kMaxFoldRetries = 12;

double gauss(double d2, double w) { return std::exp(-d2 / (2.0 * w * w)); }

// Base dome plus a nose ridge; identity bumps add on top.
struct Height {
  double z;
  Vec2 grad;
};

Height identity_height(const IdentityParams& id, const Vec2& uv) {
  const double r2 = uv.squaredNorm();
  const double nose = 10.0 * gauss(r2, 10.0);
  Height h{32.0 - r2 / 150.0 + nose, -2.0 * uv / 150.0 - nose * uv / 100.0};
  for (const auto& b : id.bumps) {
    const Vec2 d = uv - b.center;
    const double g = b.amplitude * gauss(d.squaredNorm(), b.width);
    h.z += g;
    h.grad += -g * d / (b.width * b.width);
  }
  return h;
}

Vec3 surface_normal(const Vec2& grad) { return Vec3(-grad.x(), -grad.y(), 1.0).normalized(); }

Vec3 expression_offset(const ExpressionParams& exp, const Vec2& uv, const Vec3& normal) {
  const auto sites = landmark_sites();
  Vec3 d = Vec3::Zero();
  for (std::size_t s = 0; s < sites.size(); ++s) {
    const auto& m = exp.sites[s];
    const double g = gauss((uv - sites[s]).squaredNorm(), m.width);
    d += g * (Vec3(m.amplitude.x(), m.amplitude.y(), 0.0) + m.amplitude.z() * normal);
  }
  return exp.magnitude * d;
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::string scan_name(std::size_t identity, std::size_t expression) {
  char buf[64];
  if (expression == 0) {
    std::snprintf(buf, sizeof(buf), "id%03zu_neutral", identity);
  } else {
    std::snprintf(buf, sizeof(buf), "id%03zu_exp%zu", identity, expression);
  }
  return buf;
}

}  // namespace

void SynthOptions::validate() const {
  if (grid_res < 32) throw Error(ErrorKind::config, "synth: grid_res must be >= 32");
  if (!(disk_radius_mm > 0.0)) throw Error(ErrorKind::config, "synth: disk radius must be positive");
  if (identity_bumps < 0 || wrinkle_waves < 0) throw Error(ErrorKind::config, "synth: negative component count");
  if (!(wavelength_min_mm > 0.0) || wavelength_max_mm < wavelength_min_mm) {
    throw Error(ErrorKind::config, "synth: bad wavelength range");
  }
  if (wrinkle_amplitude_mm < 0.0) throw Error(ErrorKind::config, "synth: negative wrinkle amplitude");
}

std::array<Vec2, 5> landmark_sites() {
  return {Vec2(-35.0, 25.0), Vec2(35.0, 25.0), Vec2(0.0, 0.0), Vec2(-20.0, -30.0), Vec2(20.0, -30.0)};
}

IdentityParams sample_identity(std::uint64_t seed, const SynthOptions& o) {
  std::mt19937_64 rng(seed);
  IdentityParams id;
  id.seed = seed;
  for (int i = 0; i < o.identity_bumps; ++i) {
    Bump b;
    const double r = 70.0 * std::sqrt(uniform(rng, 0.0, 1.0));
    const double a = uniform(rng, 0.0, 2.0 * kPi);
    b.center = Vec2(r * std::cos(a), r * std::sin(a));
    b.width = uniform(rng, 15.0, 40.0);
    b.amplitude = uniform(rng, -15.0, 15.0);
    id.bumps.push_back(b);
  }
  return id;
}

ExpressionParams sample_expression(std::uint64_t seed, double magnitude) {
  std::mt19937_64 rng(seed);
  ExpressionParams e;
  e.seed = seed;
  e.magnitude = magnitude;
  for (auto& s : e.sites) {
    s.width = uniform(rng, 10.0, 25.0);
    for (int c = 0; c < 3; ++c) s.amplitude[c] = uniform(rng, -10.0, 10.0);
  }
  return e;
}

DetailParams sample_detail(std::uint64_t seed, const SynthOptions& o) {
  std::mt19937_64 rng(seed);
  DetailParams d;
  d.seed = seed;
  if (!o.wrinkles || o.wrinkle_waves == 0) return d;
  // each wave gets at most an equal share, so the sum stays within the bound
  const double share = o.wrinkle_amplitude_mm / o.wrinkle_waves;
  for (int i = 0; i < o.wrinkle_waves; ++i) {
    Wave w;
    w.wavelength = uniform(rng, o.wavelength_min_mm, o.wavelength_max_mm);
    w.direction = uniform(rng, 0.0, kPi);
    w.phase = uniform(rng, 0.0, 2.0 * kPi);
    w.amplitude = share * uniform(rng, 0.5, 1.0);
    d.waves.push_back(w);
  }
  return d;
}

double wrinkle_envelope(const Vec2& uv) {
  const double du = uv.x() / 30.0;
  const double dv = (uv.y() - 45.0) / 14.0;
  return std::exp(-0.5 * (du * du + dv * dv));
}

double wrinkle_height(const DetailParams& det, const Vec2& uv) {
  double h = 0.0;
  for (const auto& w : det.waves) {
    const double t = std::cos(w.direction) * uv.x() + std::sin(w.direction) * uv.y();
    h += w.amplitude * std::sin(2.0 * kPi * t / w.wavelength + w.phase);
  }
  return h == 0.0 ? 0.0 : wrinkle_envelope(uv) * h;
}

double wrinkle_amplitude(const DetailParams& det, const Vec2& uv) {
  double a = 0.0;
  for (const auto& w : det.waves) a += w.amplitude;
  return a == 0.0 ? 0.0 : wrinkle_envelope(uv) * a;
}

Vec2 grid_uv(std::int64_t id, const SynthOptions& o) {
  const std::int64_t n1 = o.grid_res + 1;
  const double step = 2.0 * o.disk_radius_mm / o.grid_res;
  return {-o.disk_radius_mm + step * static_cast<double>(id % n1), -o.disk_radius_mm + step * static_cast<double>(id / n1)};
}

SynthScan synth_mesh(const IdentityParams& id, const ExpressionParams& exp, const DetailParams& det,
                     const SynthOptions& o) {
  o.validate();
  const int n = o.grid_res;
  const std::int64_t n1 = n + 1;
  const double r2max = o.disk_radius_mm * o.disk_radius_mm * (1.0 + 1e-12);

  SynthScan out;
  std::vector<int> vertex_of(static_cast<std::size_t>(n1 * n1), -1);
  std::vector<Vec2> uvs;
  for (std::int64_t g = 0; g < n1 * n1; ++g) {
    const Vec2 uv = grid_uv(g, o);
    if (uv.squaredNorm() > r2max) continue;
    vertex_of[static_cast<std::size_t>(g)] = static_cast<int>(uvs.size());
    uvs.push_back(uv);
    out.grid_ids.push_back(g);
  }

  auto& verts = out.mesh.vertices;
  verts.resize(uvs.size());
  for (std::size_t v = 0; v < uvs.size(); ++v) {
    const Height h = identity_height(id, uvs[v]);
    verts[v] = Vec3(uvs[v].x(), uvs[v].y(), h.z);
    if (exp.magnitude != 0.0) verts[v] += expression_offset(exp, uvs[v], surface_normal(h.grad));
  }

  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int a = vertex_of[j * n1 + i], b = vertex_of[j * n1 + i + 1];
      const int c = vertex_of[(j + 1) * n1 + i + 1], d = vertex_of[(j + 1) * n1 + i];
      if (a >= 0 && b >= 0 && c >= 0) out.mesh.faces.push_back({a, b, c});
      if (a >= 0 && c >= 0 && d >= 0) out.mesh.faces.push_back({a, c, d});
    }
  }

  out.wrinkle.assign(uvs.size(), 0.0);
  if (!det.waves.empty()) {
    const auto normals = geom::vertex_normals(out.mesh);
    for (std::size_t v = 0; v < uvs.size(); ++v) {
      out.wrinkle[v] = wrinkle_height(det, uvs[v]);
      verts[v] += out.wrinkle[v] * normals[v];
    }
  }

  for (const auto& f : out.mesh.faces) {
    const Vec3 e1 = verts[f[1]] - verts[f[0]];
    const Vec3 e2 = verts[f[2]] - verts[f[0]];
    if (e1.x() * e2.y() - e1.y() * e2.x() <= 0.0) {
      throw Error(ErrorKind::data, "synth: deformation folds the heightfield");
    }
  }

  // landmarks sit on the grid vertex nearest each nominal site
  for (const Vec2& site : landmark_sites()) {
    const double step = 2.0 * o.disk_radius_mm / n;
    const auto i = static_cast<std::int64_t>(std::lround((site.x() + o.disk_radius_mm) / step));
    const auto j = static_cast<std::int64_t>(std::lround((site.y() + o.disk_radius_mm) / step));
    const int v = vertex_of[static_cast<std::size_t>(j * n1 + i)];
    if (v < 0) throw Error(ErrorKind::internal, "synth: landmark site outside the disk");
    out.mesh.landmark_indices.push_back(v);
  }
  return out;
}

std::vector<GeneratedScan> generate_dataset(const DatasetOptions& o) {
  o.synth.validate();
  if (o.identities == 0 || o.expressions == 0) throw Error(ErrorKind::config, "synth: need at least one scan");
  const std::int64_t n_ids = static_cast<std::int64_t>(o.synth.grid_res + 1) * (o.synth.grid_res + 1);

  // expression types are shared by all identities
  std::vector<ExpressionParams> types(o.expressions);
  for (std::size_t e = 1; e < o.expressions; ++e) types[e] = sample_expression(mix_seed(o.seed, kExpressionStream + e), 1.0);

  std::vector<GeneratedScan> scans(o.identities * o.expressions);
  for (std::size_t i = 0; i < o.identities; ++i) {
    const IdentityParams id = sample_identity(mix_seed(o.seed, kIdentityStream + i), o.synth);
    const DetailParams det = sample_detail(mix_seed(o.seed, kDetailStream + i), o.synth);
    for (std::size_t e = 0; e < o.expressions; ++e) {
      const std::size_t index = i * o.expressions + e;
      auto& s = scans[index];
      s.name = scan_name(i, e);
      s.identity = id;
      s.detail = det;
      s.expression = types[e];
      if (e > 0) {
        std::mt19937_64 rng(mix_seed(o.seed, kJitterStream + index));
        s.expression.magnitude = uniform(rng, 0.7, 1.0);
      }
      // folds are rare; shrink the magnitude until the surface stays a heightfield
      for (int attempt = 0;; ++attempt) {
        try {
          s.raw = synth_mesh(id, s.expression, det, o.synth);
          break;
        } catch (const Error& err) {
          if (err.kind() != ErrorKind::data || attempt == kMaxFoldRetries || s.expression.magnitude == 0.0) throw;
          log_debug(s.name + ": fold, reducing expression magnitude");
          s.expression.magnitude *= 0.8;
        }
      }

      geom::LandmarkMatrix lmk(5, 3);
      for (int l = 0; l < 5; ++l) lmk.row(l) = s.raw.mesh.vertices[s.raw.mesh.landmark_indices[l]].transpose();
      const geom::NormalizedMesh norm = geom::preprocess_mesh(s.raw.mesh, lmk);

      s.aligned = norm.mesh;
      auto& rec = s.record;
      rec.identity = s.name.substr(0, 5);
      rec.expression = e == 0 ? "neutral" : "exp" + std::to_string(e);
      rec.is_neutral = e == 0;
      rec.landmarks = norm.landmarks;
      const double r2 = geom::NormalizeOptions{}.radius_mm * geom::NormalizeOptions{}.radius_mm;
      for (std::size_t v = 0; v < s.raw.mesh.vertices.size(); ++v) {
        const Vec3 q = norm.rotation * s.raw.mesh.vertices[v] + norm.translation;
        if (q.squaredNorm() > r2) continue;
        rec.dense_points.push_back(q);
        rec.dense_ids.push_back(s.raw.grid_ids[v]);
      }
      geom::SamplingOptions sampling = o.sampling;
      sampling.seed = mix_seed(o.seed ^ o.sampling.seed, kSampleStream + index);
      rec.triplets = geom::sample_training_points(norm.mesh, sampling);
    }
  }

  // neutral positions by grid id, then their mean over identities
  const auto none = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
  std::vector<std::vector<Vec3>> neutral(o.identities, std::vector<Vec3>(static_cast<std::size_t>(n_ids), none));
  std::vector<Vec3> templ(static_cast<std::size_t>(n_ids), Vec3::Zero());
  std::vector<std::size_t> seen(static_cast<std::size_t>(n_ids), 0);
  for (std::size_t i = 0; i < o.identities; ++i) {
    const auto& rec = scans[i * o.expressions].record;
    for (std::size_t k = 0; k < rec.dense_ids.size(); ++k) {
      const auto g = static_cast<std::size_t>(rec.dense_ids[k]);
      neutral[i][g] = rec.dense_points[k];
      templ[g] += rec.dense_points[k];
      ++seen[g];
    }
  }
  for (std::size_t g = 0; g < templ.size(); ++g) {
    if (seen[g] == o.identities) templ[g] /= static_cast<double>(o.identities);
  }

  for (std::size_t index = 0; index < scans.size(); ++index) {
    auto& s = scans[index];
    const auto& base = neutral[index / o.expressions];
    for (std::size_t k = 0; k < s.record.dense_ids.size(); ++k) {
      const auto g = s.record.dense_ids[k];
      const auto gi = static_cast<std::size_t>(g);
      if (seen[gi] != o.identities || std::isnan(base[gi].x())) continue;
      const Vec2 uv = grid_uv(g, o.synth);
      s.correspondences.push_back(
          {g, s.record.dense_points[k], base[gi], templ[gi], wrinkle_height(s.detail, uv), wrinkle_amplitude(s.detail, uv)});
    }
  }
  return scans;
}

namespace {

constexpr char kCorrMagic[8] = {'I', 'M', 'F', 'C', 'O', 'R', 'R', '1'};
constexpr std::size_t kRowBytes = 8 + 11 * 8;

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <class T>
T get(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

void write_correspondences(const std::filesystem::path& path, const std::vector<CorrespondenceRow>& rows) {
  std::vector<std::uint8_t> out(kCorrMagic, kCorrMagic + sizeof(kCorrMagic));
  out.reserve(16 + rows.size() * kRowBytes);
  put<std::uint64_t>(out, rows.size());
  for (const auto& r : rows) {
    put(out, r.id);
    for (const Vec3* v : {&r.point, &r.neutral, &r.template_point}) {
      for (int c = 0; c < 3; ++c) put(out, (*v)[c]);
    }
    put(out, r.wrinkle);
    put(out, r.wrinkle_amplitude);
  }
  diff::write_file_bytes(path, out);
}

std::vector<CorrespondenceRow> read_correspondences(const std::filesystem::path& path) {
  const auto in = diff::read_file_bytes(path);
  if (in.size() < 16 || std::memcmp(in.data(), kCorrMagic, sizeof(kCorrMagic)) != 0) {
    throw Error(ErrorKind::io, path.string() + ": not a correspondence table");
  }
  std::size_t pos = sizeof(kCorrMagic);
  const auto n = get<std::uint64_t>(in, pos);
  if (n > (in.size() - pos) / kRowBytes || pos + n * kRowBytes != in.size()) {
    throw Error(ErrorKind::io, path.string() + ": correspondence table size mismatch");
  }
  std::vector<CorrespondenceRow> rows(n);
  for (auto& r : rows) {
    r.id = get<std::int64_t>(in, pos);
    for (Vec3* v : {&r.point, &r.neutral, &r.template_point}) {
      for (int c = 0; c < 3; ++c) (*v)[c] = get<double>(in, pos);
    }
    r.wrinkle = get<double>(in, pos);
    r.wrinkle_amplitude = get<double>(in, pos);
  }
  return rows;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<GeneratedScan>& scans) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "landmarks", ec);
  std::filesystem::create_directories(dir / "correspondences", ec);
  std::filesystem::create_directories(dir / "aligned", ec);
  if (ec) throw Error(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
  for (const auto& s : scans) {
    geom::write_obj(dir / (s.name + ".obj"), s.raw.mesh);
    geom::write_scan(dir / (s.name + ".imfscan"), s.record);
    geom::write_landmark_indices(dir / "landmarks" / (s.name + ".txt"), s.raw.mesh.landmark_indices);
    write_correspondences(dir / "correspondences" / (s.name + ".imfcorr"), s.correspondences);
    geom::write_obj(dir / "aligned" / (s.name + ".obj"), s.aligned);
  }
}

}  // namespace imface::synth
