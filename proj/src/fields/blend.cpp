#include "imface/fields/blend.hpp"

#include "imface/error.hpp"

namespace imface::fields {

using diff::Var;

diff::MLPSpec BlockSpec::region_spec() const {
  diff::MLPSpec s;
  s.widths.push_back(diff::encoded_width(3, n_freq));
  for (std::size_t i = 0; i < depth; ++i) s.widths.push_back(width);
  s.widths.push_back(output_width(output));
  s.activation = diff::Activation::sine;
  s.w0 = w0;
  return s;
}

diff::MLPSpec BlockSpec::fusion_spec() const {
  return {{3, fusion_width, fusion_width, k}, diff::Activation::sine, fusion_w0};
}

void BlockSpec::validate() const {
  if (k == 0) throw Error(ErrorKind::config, "block needs at least one region");
  if (depth == 0 || width == 0 || fusion_width == 0) throw Error(ErrorKind::config, "block widths must be positive");
  region_spec().validate();
  fusion_spec().validate();
}

diff::MLPParams init_fusion(const BlockSpec& spec, diff::Rng& rng) {
  auto p = diff::init_mlp(spec.fusion_spec(), rng);
  // start from uniform weights; the fusion net learns the partition
  p.back().weight.mutable_value().values().assign(p.back().weight.value().size(), 0.0);
  return p;
}

Var blend_weights(const BlockSpec& spec, const diff::MLPParams& fusion, const Var& x) {
  return diff::softmax_rows(diff::mlp_forward(spec.fusion_spec(), fusion, x));
}

Var blend_with_weights(const BlockSpec& spec, const std::vector<diff::MLPParams>& regions, const Var& weights,
                       const Var& x, const Var& landmarks) {
  if (regions.size() != spec.k || landmarks.rows() != spec.k || landmarks.cols() != 3) {
    throw Error(ErrorKind::config, "blend field: block has k=" + std::to_string(spec.k) + " but got " +
                                       std::to_string(regions.size()) + " region nets and " +
                                       std::to_string(landmarks.rows()) + " landmarks");
  }
  if (weights.cols() != spec.k) throw Error(ErrorKind::dimension, "blend field: weight columns differ from k");
  const auto region = spec.region_spec();
  Var acc;
  for (std::size_t n = 0; n < spec.k; ++n) {
    const Var local = diff::sub(x, diff::slice_rows(landmarks, n, n + 1));
    const Var psi = diff::mlp_forward(region, regions[n], diff::positional_encoding(local, spec.n_freq));
    const Var term = spec.k == 1 ? psi : diff::mul(diff::slice_cols(weights, n, n + 1), psi);
    acc = acc.defined() ? diff::add(acc, term) : term;
  }
  return acc;
}

Var blend_field(const BlockSpec& spec, const BlockParams& params, const Var& x, const Var& landmarks) {
  if (spec.k == 1) {
    // softmax of a single logit is exactly 1
    return blend_with_weights(spec, params.regions, diff::constant(diff::Tensor(x.rows(), 1, 1.0)), x, landmarks);
  }
  return blend_with_weights(spec, params.regions, blend_weights(spec, params.fusion, x), x, landmarks);
}

}  // namespace imface::fields
