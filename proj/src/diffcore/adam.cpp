#include "imface/diffcore/adam.hpp"

#include "imface/error.hpp"

#include <cmath>

namespace imface::diff {

void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, std::size_t step, double lr,
                 const AdamHyper& h) {
  if (!param.same_shape(grad) || !param.same_shape(m) || !param.same_shape(v)) {
    throw Error(ErrorKind::dimension, "adam: parameter/gradient/moment shapes differ");
  }
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(step));
  double* p = param.data();
  const double* g = grad.data();
  double* pm = m.data();
  double* pv = v.data();
  const std::size_t n = param.size();
  for (std::size_t i = 0; i < n; ++i) {
    pm[i] = h.beta1 * pm[i] + (1.0 - h.beta1) * g[i];
    pv[i] = h.beta2 * pv[i] + (1.0 - h.beta2) * g[i] * g[i];
    const double mhat = pm[i] / c1;
    const double vhat = pv[i] / c2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + h.eps);
  }
}

std::size_t Adam::add_group(const std::string& group_name, double lr) {
  lrs_.push_back(lr);
  group_names_.push_back(group_name);
  return lrs_.size() - 1;
}

void Adam::add_param(std::size_t group, const std::string& name, const Var& param) {
  if (group >= lrs_.size()) throw Error(ErrorKind::config, "adam: unknown parameter group");
  const Tensor& v = param.value();
  slots_.push_back({name, param, Tensor(v.shape(), std::vector<double>(v.size(), 0.0)),
                    Tensor(v.shape(), std::vector<double>(v.size(), 0.0)), group});
}

void Adam::step(const std::vector<Tensor>& grads) {
  if (grads.size() != slots_.size()) throw Error(ErrorKind::dimension, "adam: gradient count mismatch");
  ++t_;
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (grads[i].size() == 0) continue;
    Slot& s = slots_[i];
    adam_update(s.param.mutable_value(), grads[i], s.m, s.v, ++s.steps, lrs_[s.group], hyper_);
  }
}

std::vector<Var> Adam::params() const {
  std::vector<Var> out;
  out.reserve(slots_.size());
  for (const auto& s : slots_) out.push_back(s.param);
  return out;
}

}  // namespace imface::diff
