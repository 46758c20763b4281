#pragma once

#include "imface/diffcore/mlp.hpp"

namespace imface::fields {

// One generator per target layer: z -> hidden (ReLU) -> that layer's
// flattened weights (row-major, fan_in x fan_out) followed by its bias.
struct HyperNet {
  diff::MLPSpec target;
  std::size_t latent_dim = 0;
  std::size_t hidden = 32;
  std::vector<diff::MLPParams> generators;

  diff::MLPSpec generator_spec(std::size_t layer) const;
};

struct HyperInit {
  std::size_t hidden = 32;
  // Scale of the generated final layer (weights, bias and the z-dependent
  // part alike); 0 makes the target net output exactly zero for every z.
  double final_scale = 1.0;
  // Output columns of the target net forced to zero at initialization.
  std::vector<std::size_t> zero_output_cols;
  // Spread of the z-dependent part relative to the target init bound.
  double spread = 1.0;
};

/// Generator output biases hold a SIREN initialization of the target net,
/// so z = 0 reproduces a well-initialized Mini-Net.
HyperNet make_hypernet(const diff::MLPSpec& target, std::size_t latent_dim, const HyperInit& init, diff::Rng& rng);

/// z is 1 x latent_dim. The result stays differentiable in z and in the
/// generator parameters.
diff::MLPParams hyper_generate(const HyperNet& net, const diff::Var& z);

std::vector<diff::Var> hypernet_parameters(const HyperNet& net);

}  // namespace imface::fields
