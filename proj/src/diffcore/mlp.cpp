#include "imface/diffcore/mlp.hpp"

#include "imface/error.hpp"

#include <cmath>
#include <numbers>

namespace imface::diff {

std::size_t MLPSpec::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += widths[l] * widths[l + 1] + widths[l + 1];
  return n;
}

void MLPSpec::validate() const {
  if (widths.size() < 3) throw Error(ErrorKind::config, "MLP needs at least one hidden layer");
  for (auto w : widths) {
    if (w == 0) throw Error(ErrorKind::config, "MLP layer width must be positive");
  }
  if (activation == Activation::sine && !(w0 > 0)) {
    throw Error(ErrorKind::config, "sine MLP requires w0 > 0");
  }
}

double siren_bound(std::size_t fan_in, double w0, bool is_first_layer) {
  if (fan_in == 0) throw Error(ErrorKind::config, "siren_init: fan_in must be >= 1");
  const double n = static_cast<double>(fan_in);
  return is_first_layer ? 1.0 / n : std::sqrt(6.0 / n) / w0;
}

Tensor siren_init(std::size_t fan_in, std::size_t fan_out, double w0, bool is_first_layer, Rng& rng) {
  const double bound = siren_bound(fan_in, w0, is_first_layer);
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor w(fan_in, fan_out);
  for (auto& v : w.values()) v = dist(rng);
  return w;
}

MLPParams init_mlp(const MLPSpec& spec, Rng& rng) {
  spec.validate();
  MLPParams params;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::size_t fan_in = spec.widths[l];
    const std::size_t fan_out = spec.widths[l + 1];
    Tensor w;
    if (spec.activation == Activation::sine) {
      w = siren_init(fan_in, fan_out, spec.w0, l == 0, rng);
    } else {
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      w = Tensor(fan_in, fan_out);
      for (auto& v : w.values()) v = dist(rng);
    }
    params.push_back({parameter(std::move(w)), parameter(Tensor(1, fan_out))});
  }
  return params;
}

Var mlp_forward(const MLPSpec& spec, const MLPParams& params, const Var& x) {
  if (params.size() != spec.layer_count()) {
    throw Error(ErrorKind::dimension, "mlp_forward: expected " + std::to_string(spec.layer_count()) +
                                          " layers, got " + std::to_string(params.size()));
  }
  if (x.cols() != spec.input_width()) {
    throw Error(ErrorKind::dimension, "mlp_forward: input width " + std::to_string(x.cols()) +
                                          " does not match " + std::to_string(spec.input_width()));
  }
  Var h = x;
  for (std::size_t l = 0; l < params.size(); ++l) {
    h = add(matmul(h, params[l].weight), params[l].bias);
    if (l + 1 == params.size()) break;
    switch (spec.activation) {
      case Activation::sine: h = sin(h, spec.w0); break;
      case Activation::relu: h = relu(h); break;
      case Activation::none: break;
    }
  }
  return h;
}

Var positional_encoding(const Var& x, std::size_t n_freq) {
  if (n_freq == 0) return x;
  std::vector<Var> parts{x};
  double freq = std::numbers::pi;
  for (std::size_t k = 0; k < n_freq; ++k) {
    parts.push_back(sin(x, freq));
    parts.push_back(cos(x, freq));
    freq *= 2.0;
  }
  return concat_cols(parts);
}

std::vector<Var> flatten(const MLPParams& params) {
  std::vector<Var> out;
  for (const auto& l : params) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  return out;
}

}  // namespace imface::diff
