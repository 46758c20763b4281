#pragma once

#include "imface/diffcore/mlp.hpp"

namespace imface::fields {

enum class BlockOutput { se3, se3_residual, scalar };

inline std::size_t output_width(BlockOutput kind) {
  switch (kind) {
    case BlockOutput::se3: return 6;
    case BlockOutput::se3_residual: return 7;
    case BlockOutput::scalar: return 1;
  }
  return 1;
}

// Shape of one Mini-Nets block: k region nets over gamma(x - l_n) plus a
// fusion net over the absolute x that yields k softmax weights.
struct BlockSpec {
  std::size_t k = 5;
  std::size_t n_freq = 4;
  std::size_t width = 128;
  std::size_t depth = 3;  // hidden layers
  double w0 = 30.0;
  BlockOutput output = BlockOutput::scalar;
  std::size_t fusion_width = 64;
  double fusion_w0 = 5.0;

  diff::MLPSpec region_spec() const;
  diff::MLPSpec fusion_spec() const;
  void validate() const;
};

// Parameters for one evaluation of a block. Region parameters usually come
// from a hypernet; the fusion net is static.
struct BlockParams {
  std::vector<diff::MLPParams> regions;
  diff::MLPParams fusion;
};

diff::MLPParams init_fusion(const BlockSpec& spec, diff::Rng& rng);

/// Softmax blend weights w(x), n x k.
diff::Var blend_weights(const BlockSpec& spec, const diff::MLPParams& fusion, const diff::Var& x);

/// v(x) = sum_n w_n(x) psi_n(gamma(x - l_n)) for n x 3 queries and k x 3
/// landmarks. Output is n x output_width(spec.output).
diff::Var blend_field(const BlockSpec& spec, const BlockParams& params, const diff::Var& x, const diff::Var& landmarks);

/// Same blend with caller-provided weights (n x k), e.g. forced one-hot.
diff::Var blend_with_weights(const BlockSpec& spec, const std::vector<diff::MLPParams>& regions, const diff::Var& weights,
                             const diff::Var& x, const diff::Var& landmarks);

}  // namespace imface::fields
