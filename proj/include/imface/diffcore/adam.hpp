#pragma once

#include "imface/diffcore/var.hpp"

#include <string>
#include <vector>

namespace imface::diff {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over named parameter groups. Each group has its own
/// learning rate; moments and step counts are kept per parameter, so a
/// parameter that sits out a step (sparse embeddings, frozen groups) is
/// corrected by the number of updates it actually received.
class Adam {
 public:
  struct Slot {
    std::string name;
    Var param;
    Tensor m;
    Tensor v;
    std::size_t group = 0;
    std::size_t steps = 0;
  };

  explicit Adam(AdamHyper hyper = {}) : hyper_(hyper) {}

  /// Returns the group index.
  std::size_t add_group(const std::string& group_name, double lr);
  void add_param(std::size_t group, const std::string& name, const Var& param);

  void set_lr(std::size_t group, double lr) { lrs_.at(group) = lr; }
  double lr(std::size_t group) const { return lrs_.at(group); }
  std::size_t group_count() const { return lrs_.size(); }
  const std::string& group_name(std::size_t group) const { return group_names_.at(group); }

  /// One update. `grads[i]` corresponds to `slots()[i]`; an empty tensor
  /// skips that parameter for this step (its moments are untouched).
  void step(const std::vector<Tensor>& grads);

  std::vector<Var> params() const;
  std::vector<Slot>& slots() { return slots_; }
  const std::vector<Slot>& slots() const { return slots_; }
  std::size_t step_count() const { return t_; }
  void set_step_count(std::size_t t) { t_ = t; }
  const AdamHyper& hyper() const { return hyper_; }

 private:
  AdamHyper hyper_;
  std::vector<double> lrs_;
  std::vector<std::string> group_names_;
  std::vector<Slot> slots_;
  std::size_t t_ = 0;
};

/// Single-parameter convenience form of the update rule.
void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, std::size_t step, double lr,
                 const AdamHyper& hyper = {});

}  // namespace imface::diff
