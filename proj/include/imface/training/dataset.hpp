#pragma once

#include "imface/geomprep/scan_record.hpp"
#include "imface/losses/losses.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace imface::train {

/// One scan's training targets in model units (mm / unit_mm).
struct ScanData {
  std::string identity;
  std::string expression;
  bool is_neutral = false;
  std::size_t identity_index = 0;
  diff::Tensor points;   // n x 3
  diff::Tensor sdf;      // n x 1
  diff::Tensor normals;  // n x 3
  diff::Tensor landmarks;          // k x 3
  diff::Tensor neutral_landmarks;  // k x 3, the identity's neutral scan
  // Dense correspondences whose grid id exists on this scan, on the
  // identity's neutral scan and on every neutral scan (the template).
  std::vector<std::int64_t> dense_ids;
  diff::Tensor dense;           // m x 3
  diff::Tensor dense_neutral;   // m x 3
  diff::Tensor dense_template;  // m x 3
};

struct TrainingSet {
  std::vector<ScanData> scans;
  std::vector<std::string> identities;
  std::vector<std::size_t> neutral_scan;  // per identity
  diff::Tensor mean_landmarks;            // over all scans
  diff::Tensor mean_neutral;              // over neutral scans
  diff::Tensor template_landmarks;        // l'': the neutral mean
};

/// Every `*.imfscan` in `dir`, sorted by file name.
std::vector<geom::ScanRecord> load_scan_dir(const std::filesystem::path& dir);
/// Names matching load_scan_dir's order.
std::vector<std::string> scan_names(const std::filesystem::path& dir);

/// Identities keep their first-appearance order. Every identity needs exactly
/// one neutral scan; violations raise Error(data).
TrainingSet build_training_set(const std::vector<geom::ScanRecord>& records, double unit_mm);

/// SDF samples of a scan without any correspondence targets (fitting input).
ScanData scan_samples(const geom::ScanRecord& record, double unit_mm);

/// `points` triplets and `dense` correspondences drawn without replacement
/// from one stream seeded by `seed`; counts beyond the available rows take
/// every row in order.
losses::ScanBatch assemble_batch(const ScanData& scan, std::size_t points, std::size_t dense, std::uint64_t seed);

}  // namespace imface::train
