#include "imface/fields/landmark_net.hpp"

#include "imface/error.hpp"

namespace imface::fields {

using diff::Var;

LandmarkNet make_landmark_net(std::size_t input_dim, std::size_t hidden, const diff::Tensor& mean, diff::Rng& rng) {
  if (mean.cols() != 3 || mean.rows() == 0) throw Error(ErrorKind::config, "landmark net: mean must be k x 3");
  LandmarkNet net;
  net.k = mean.rows();
  net.spec = {{input_dim, hidden, hidden, 3 * net.k}, diff::Activation::relu, 1.0};
  net.params = diff::init_mlp(net.spec, rng);
  // small head so the prediction starts at the mean
  for (auto& v : net.params.back().weight.mutable_value().values()) v *= 0.01;
  auto& b = net.params.back().bias.mutable_value();
  std::copy(mean.values().begin(), mean.values().end(), b.values().begin());
  return net;
}

namespace {

Var run(const LandmarkNet& net, const Var& input) {
  if (input.rows() != 1 || input.cols() != net.spec.input_width()) {
    throw Error(ErrorKind::dimension, "landmark net: expected a 1 x " + std::to_string(net.spec.input_width()) +
                                          " input, got " + input.value().shape_string());
  }
  return diff::reshape(diff::mlp_forward(net.spec, net.params, input), net.k, 3);
}

}  // namespace

Var predict_landmarks(const LandmarkNet& net, const Var& z_exp, const Var& z_id) {
  return run(net, diff::concat_cols({z_exp, z_id}));
}

Var predict_landmarks_neutral(const LandmarkNet& net, const Var& z_id) { return run(net, z_id); }

}  // namespace imface::fields
