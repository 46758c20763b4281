#pragma once

#include "imface/diffcore/mlp.hpp"

namespace imface::fields {

// Fully connected ReLU net [in, H, H, 3k] predicting k landmarks from one or
// two concatenated codes.
struct LandmarkNet {
  diff::MLPSpec spec;
  diff::MLPParams params;
  std::size_t k = 5;
};

/// `mean` (k x 3) seeds the output bias so an untrained net predicts it.
LandmarkNet make_landmark_net(std::size_t input_dim, std::size_t hidden, const diff::Tensor& mean, diff::Rng& rng);

/// eta(z_exp, z_id): codes are 1 x d rows, result k x 3.
diff::Var predict_landmarks(const LandmarkNet& net, const diff::Var& z_exp, const diff::Var& z_id);
/// eta'(z_id).
diff::Var predict_landmarks_neutral(const LandmarkNet& net, const diff::Var& z_id);

}  // namespace imface::fields
