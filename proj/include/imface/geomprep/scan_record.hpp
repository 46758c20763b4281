#pragma once

#include "imface/geomprep/preprocess.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace imface::geom {

/// One preprocessed scan: SDF triplets, sparse landmarks, and dense surface
/// points keyed by a correspondence id shared across scans.
struct ScanRecord {
  std::string identity;
  std::string expression;
  bool is_neutral = false;
  LandmarkMatrix landmarks;
  std::vector<Vec3> dense_points;
  std::vector<std::int64_t> dense_ids;
  std::vector<SampleTriplet> triplets;
};

inline constexpr char kScanMagic[8] = {'I', 'M', 'F', 'S', 'C', 'A', 'N', '1'};

/// Little-endian layout:
///   magic "IMFSCAN1" | u32 len + identity | u32 len + expression | u8 neutral |
///   u64 k | u64 m | u64 n | k*3 f64 landmarks | m*3 f64 dense points |
///   m i64 dense ids | n*7 f64 (point, sdf, gradient)
void write_scan(const std::filesystem::path& path, const ScanRecord& scan);
ScanRecord read_scan(const std::filesystem::path& path);

}  // namespace imface::geom
