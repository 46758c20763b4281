#pragma once

// Random finite-difference probes of a scalar loss with respect to named
// parameters. Shared by the loss tests and the acceptance binary.

#include "fd_oracle.hpp"

#include "imface/diffcore/var.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace imface::testing {

struct ProbeResult {
  std::size_t probes = 0;
  double worst = 0.0;
  std::string worst_at;
};

/// Picks `count` random entries among those with a non-negligible analytic
/// gradient and compares each with a central difference (step h). `loss`
/// must rebuild its graph from the current parameter values on every call.
inline ProbeResult probe_gradients(const std::function<diff::Var()>& loss,
                                   const std::vector<std::pair<std::string, diff::Var>>& params, std::size_t count,
                                   std::uint64_t seed, double h = 1e-5) {
  std::vector<diff::Var> vars;
  for (const auto& [name, v] : params) vars.push_back(v);
  const std::vector<diff::Var> grads = diff::grad(loss(), vars);

  double scale = 0.0;
  for (const auto& g : grads) {
    for (double v : g.value().values()) scale = std::max(scale, std::fabs(v));
  }
  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const auto& g = grads[i].value();
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (std::fabs(g[j]) > 1e-6 * scale) candidates.emplace_back(i, j);
    }
  }
  ProbeResult r;
  if (candidates.empty()) return r;
  std::mt19937_64 rng(seed);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  candidates.resize(std::min(count, candidates.size()));
  for (const auto& [i, j] : candidates) {
    diff::Var v = vars[i];
    double& slot = v.mutable_value()[j];
    const double fd = central_difference(slot, [&] { return loss().item(); }, h);
    const double err = relative_error(grads[i].value()[j], fd, 1e-8);
    ++r.probes;
    if (err > r.worst) {
      r.worst = err;
      r.worst_at = params[i].first + "[" + std::to_string(j) + "]";
    }
  }
  return r;
}

}  // namespace imface::testing
