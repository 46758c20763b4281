#pragma once

// Test-only finite-difference oracle. It perturbs raw tensor storage and
// re-evaluates a scalar closure, so it shares no code with the reverse-mode
// engine it checks.

#include <algorithm>
#include <cmath>
#include <functional>

namespace imface::testing {

inline double central_difference(double& slot, const std::function<double()>& f, double h = 1e-5) {
  const double saved = slot;
  slot = saved + h;
  const double up = f();
  slot = saved - h;
  const double down = f();
  slot = saved;
  return (up - down) / (2.0 * h);
}

/// |a - b| / max(|a|, |b|, floor): relative error with an absolute floor so
/// that gradients which are genuinely ~0 do not dominate the check.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

}  // namespace imface::testing
