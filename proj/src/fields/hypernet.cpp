#include "imface/fields/hypernet.hpp"

#include "imface/error.hpp"

#include <cmath>

namespace imface::fields {

using diff::Tensor;
using diff::Var;

diff::MLPSpec HyperNet::generator_spec(std::size_t layer) const {
  const std::size_t fan_in = target.widths[layer];
  const std::size_t fan_out = target.widths[layer + 1];
  return {{latent_dim, hidden, fan_in * fan_out + fan_out}, diff::Activation::relu, 1.0};
}

HyperNet make_hypernet(const diff::MLPSpec& target, std::size_t latent_dim, const HyperInit& init, diff::Rng& rng) {
  target.validate();
  if (latent_dim == 0 || init.hidden == 0) throw Error(ErrorKind::config, "hypernet: latent and hidden widths must be positive");
  for (auto c : init.zero_output_cols) {
    if (c >= target.output_width()) throw Error(ErrorKind::config, "hypernet: zeroed output column out of range");
  }
  HyperNet net;
  net.target = target;
  net.latent_dim = latent_dim;
  net.hidden = init.hidden;

  const diff::MLPParams base = diff::init_mlp(target, rng);
  const std::size_t last = target.layer_count() - 1;
  for (std::size_t l = 0; l < target.layer_count(); ++l) {
    const std::size_t fan_in = target.widths[l];
    const std::size_t fan_out = target.widths[l + 1];
    auto gen = diff::init_mlp(net.generator_spec(l), rng);

    Tensor& w2 = gen[1].weight.mutable_value();
    Tensor& b2 = gen[1].bias.mutable_value();
    const double bound = target.activation == diff::Activation::sine
                             ? diff::siren_bound(fan_in, target.w0, l == 0)
                             : std::sqrt(6.0 / static_cast<double>(fan_in));
    const double w2_scale = init.spread * bound / std::sqrt(static_cast<double>(init.hidden));
    std::uniform_real_distribution<double> spread(-1.0, 1.0);
    for (auto& v : w2.values()) v = spread(rng) * w2_scale;

    const auto& w = base[l].weight.value();
    const auto& b = base[l].bias.value();
    std::copy(w.values().begin(), w.values().end(), b2.values().begin());
    std::copy(b.values().begin(), b.values().end(), b2.values().begin() + static_cast<std::ptrdiff_t>(fan_in * fan_out));

    if (l == last) {
      const std::size_t cols = fan_in * fan_out + fan_out;
      auto scale_col = [&](std::size_t c, double s) {
        b2[c] *= s;
        for (std::size_t r = 0; r < init.hidden; ++r) w2(r, c) *= s;
      };
      for (std::size_t c = 0; c < cols; ++c) scale_col(c, init.final_scale);
      for (auto out : init.zero_output_cols) {
        for (std::size_t i = 0; i < fan_in; ++i) scale_col(i * fan_out + out, 0.0);
        scale_col(fan_in * fan_out + out, 0.0);
      }
    }
    net.generators.push_back(std::move(gen));
  }
  return net;
}

diff::MLPParams hyper_generate(const HyperNet& net, const Var& z) {
  if (z.rows() != 1 || z.cols() != net.latent_dim) {
    throw Error(ErrorKind::dimension, "hypernet: expected a 1 x " + std::to_string(net.latent_dim) + " latent, got " +
                                          z.value().shape_string());
  }
  diff::MLPParams out;
  for (std::size_t l = 0; l < net.generators.size(); ++l) {
    const std::size_t fan_in = net.target.widths[l];
    const std::size_t fan_out = net.target.widths[l + 1];
    const Var flat = diff::mlp_forward(net.generator_spec(l), net.generators[l], z);
    out.push_back({diff::reshape(diff::slice_cols(flat, 0, fan_in * fan_out), fan_in, fan_out),
                   diff::slice_cols(flat, fan_in * fan_out, fan_in * fan_out + fan_out)});
  }
  return out;
}

std::vector<Var> hypernet_parameters(const HyperNet& net) {
  std::vector<Var> out;
  for (const auto& g : net.generators) {
    for (const auto& v : diff::flatten(g)) out.push_back(v);
  }
  return out;
}

}  // namespace imface::fields
