#pragma once

#include "imface/training/dataset.hpp"

#include <cstdint>
#include <vector>

namespace imface::train {

struct FitConfig {
  std::size_t steps = 400;
  std::size_t points = 1024;  // triplets per step
  double lr = 1e-3;
  bool use_detail = true;
  std::uint64_t seed = 0;
  losses::LossWeights weights;
};

struct FitResult {
  model::LatentCodes codes;  // constant Vars
  std::vector<double> losses;
  bool restarted = false;
};

/// Optimizes only the three codes of one scan against a frozen model,
/// starting from `init`. A loss above 10x the initial one restarts once from
/// zero codes; a second divergence raises Error(numeric).
FitResult fit_latents(const model::ImFaceModel& m, const ScanData& scan, const model::LatentCodes& init,
                      const FitConfig& config);

}  // namespace imface::train
