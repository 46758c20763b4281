#pragma once

#include "imface/diffcore/var.hpp"

#include <random>
#include <vector>

namespace imface::diff {

using Rng = std::mt19937_64;

enum class Activation { sine, relu, none };

/// Layer widths including input and output, e.g. {3, 128, 128, 128, 6} is a
/// three-hidden-layer net. The final layer is always linear.
struct MLPSpec {
  std::vector<std::size_t> widths;
  Activation activation = Activation::sine;
  double w0 = 30.0;

  std::size_t input_width() const { return widths.front(); }
  std::size_t output_width() const { return widths.back(); }
  std::size_t layer_count() const { return widths.size() - 1; }
  /// Total number of scalar weights and biases.
  std::size_t parameter_count() const;
  void validate() const;
};

struct LayerParams {
  Var weight;  // fan_in x fan_out
  Var bias;    // 1 x fan_out
};

using MLPParams = std::vector<LayerParams>;

/// SIREN initialization for one weight matrix (fan_in x fan_out): the first
/// layer draws from U(-1/fan_in, 1/fan_in), later layers from
/// U(-sqrt(6/fan_in)/w0, sqrt(6/fan_in)/w0).
Tensor siren_init(std::size_t fan_in, std::size_t fan_out, double w0, bool is_first_layer, Rng& rng);
double siren_bound(std::size_t fan_in, double w0, bool is_first_layer);

/// Fresh trainable parameters: SIREN for sine nets, He-uniform for ReLU nets,
/// zero biases everywhere.
MLPParams init_mlp(const MLPSpec& spec, Rng& rng);

Var mlp_forward(const MLPSpec& spec, const MLPParams& params, const Var& x);

/// gamma(x) = (x, sin(2^0 pi x), cos(2^0 pi x), ..., sin(2^(n-1) pi x),
/// cos(2^(n-1) pi x)); columns are grouped per frequency band.
Var positional_encoding(const Var& x, std::size_t n_freq);
inline std::size_t encoded_width(std::size_t dims, std::size_t n_freq) { return dims * (1 + 2 * n_freq); }

std::vector<Var> flatten(const MLPParams& params);

}  // namespace imface::diff
