#pragma once

#include "imface/geomprep/preprocess.hpp"
#include "imface/geomprep/scan_record.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace imface::synth {

using geom::Vec2;
using geom::Vec3;

// Faces are heightfields z(u, v) over a disk in the (u, v) plane, sampled on
// a fixed square grid; a vertex's grid index is its correspondence key.
struct SynthOptions {
  int grid_res = 160;  // grid cells per side
  double disk_radius_mm = 85.0;
  int identity_bumps = 4;
  int wrinkle_waves = 3;
  double wavelength_min_mm = 3.0;
  double wavelength_max_mm = 8.0;
  double wrinkle_amplitude_mm = 1.5;  // bound on the summed wrinkle height
  bool wrinkles = true;

  void validate() const;
};

struct Bump {
  Vec2 center;
  double width = 20.0;
  double amplitude = 0.0;
};

struct IdentityParams {
  std::vector<Bump> bumps;
  std::uint64_t seed = 0;
};

struct SiteMotion {
  double width = 15.0;
  Vec3 amplitude = Vec3::Zero();  // (along u, along v, along the surface normal)
};

struct ExpressionParams {
  std::array<SiteMotion, 5> sites;
  double magnitude = 0.0;
  std::uint64_t seed = 0;
};

struct Wave {
  double wavelength = 5.0;
  double direction = 0.0;  // radians in the (u, v) plane
  double phase = 0.0;
  double amplitude = 0.0;
};

struct DetailParams {
  std::vector<Wave> waves;
  std::uint64_t seed = 0;
};

IdentityParams sample_identity(std::uint64_t seed, const SynthOptions& o);
ExpressionParams sample_expression(std::uint64_t seed, double magnitude);
DetailParams sample_detail(std::uint64_t seed, const SynthOptions& o);
inline ExpressionParams neutral_expression() { return {}; }
inline DetailParams no_detail() { return {}; }

/// (u, v) of the five landmark sites: outer eye corners, nose tip, mouth corners.
std::array<Vec2, 5> landmark_sites();

struct SynthScan {
  geom::TriangleMesh mesh;             // mm, landmark_indices set
  std::vector<std::int64_t> grid_ids;  // per vertex
  std::vector<double> wrinkle;         // signed wrinkle height per vertex (mm)
};

/// Wrinkles live in a forehead patch; this is its taper in [0, 1].
double wrinkle_envelope(const Vec2& uv);
/// Summed wave height at material position uv (envelope applied).
double wrinkle_height(const DetailParams& det, const Vec2& uv);
/// Local wave amplitude: envelope times the summed wave amplitudes.
double wrinkle_amplitude(const DetailParams& det, const Vec2& uv);

/// Material (u, v) of a grid index.
Vec2 grid_uv(std::int64_t id, const SynthOptions& o);

/// Builds the deformed heightfield. Throws Error(data) when the expression
/// folds the surface over itself in the (x, y) projection.
SynthScan synth_mesh(const IdentityParams& id, const ExpressionParams& exp, const DetailParams& det,
                     const SynthOptions& o);

struct DatasetOptions {
  std::size_t identities = 20;
  std::size_t expressions = 4;  // per identity, the first one neutral
  std::uint64_t seed = 0;
  SynthOptions synth;
  geom::SamplingOptions sampling;  // seed is derived per scan
};

// Ground-truth correspondence of one dense point, all in the normalized frame
// of the respective scan.
struct CorrespondenceRow {
  std::int64_t id = 0;
  Vec3 point;     // on this scan
  Vec3 neutral;   // same grid vertex on the identity's neutral scan
  Vec3 template_point;  // mean over all neutral scans
  double wrinkle = 0.0;            // ground-truth wrinkle height at this grid vertex
  double wrinkle_amplitude = 0.0;  // local wave amplitude there
};

struct GeneratedScan {
  std::string name;  // file stem
  SynthScan raw;
  geom::TriangleMesh aligned;  // preprocessed mesh in the record's frame
  geom::ScanRecord record;
  std::vector<CorrespondenceRow> correspondences;
  IdentityParams identity;
  ExpressionParams expression;
  DetailParams detail;
};

/// Scans ordered identity-major, the neutral scan first for every identity.
std::vector<GeneratedScan> generate_dataset(const DatasetOptions& o);

/// Binary table: magic "IMFCORR1" | u64 rows | rows x (i64 id, 11 f64).
void write_correspondences(const std::filesystem::path& path, const std::vector<CorrespondenceRow>& rows);
std::vector<CorrespondenceRow> read_correspondences(const std::filesystem::path& path);

/// Writes <stem>.obj (raw) and <stem>.imfscan at the top level plus landmark
/// sidecars, correspondence tables and the aligned meshes (aligned/<stem>.obj,
/// the reference surface for metrics) in subdirectories.
void write_dataset(const std::filesystem::path& dir, const std::vector<GeneratedScan>& scans);

}  // namespace imface::synth
