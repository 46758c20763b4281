#include "imface/training/fit.hpp"

#include "imface/diffcore/adam.hpp"
#include "imface/error.hpp"
#include "imface/log.hpp"
#include "imface/parallel.hpp"

#include <cmath>

namespace imface::train {

using diff::Tensor;
using diff::Var;

namespace {

struct Attempt {
  FitResult result;
  bool diverged = false;
};

Attempt run_fit(const model::ImFaceModel& m, const ScanData& scan, const model::LatentCodes& init, const FitConfig& cfg) {
  model::LatentCodes codes{diff::parameter(init.exp.value()), diff::parameter(init.id.value()),
                           diff::parameter(init.detail.value())};
  const std::size_t n = std::min(cfg.points, scan.points.rows());
  const auto w = losses::per_element(cfg.weights, n, 0, m.config.k, m.config.latent_exp, m.config.latent_detail);
  diff::Adam opt;
  const auto g = opt.add_group("codes", cfg.lr);
  opt.add_param(g, "exp", codes.exp);
  opt.add_param(g, "id", codes.id);
  opt.add_param(g, "detail", codes.detail);

  Attempt a;
  double initial = 0.0;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto batch = assemble_batch(scan, n, 0, mix_seed(cfg.seed, step));
    const auto terms = losses::fitting_terms(m, codes, batch, w, cfg.use_detail);
    const Var total = terms.total();
    const double loss = total.item();
    if (step == 0) initial = loss;
    a.result.losses.push_back(loss);
    if (!std::isfinite(loss) || loss > 10.0 * initial) {
      a.diverged = true;
      break;
    }
    const auto grads = diff::grad(total, {codes.exp, codes.id, codes.detail});
    std::vector<Tensor> gs;
    for (std::size_t i = 0; i < grads.size(); ++i) {
      const auto& p = opt.slots()[i].param;
      gs.push_back(grads[i].defined() ? grads[i].value() : Tensor(p.rows(), p.cols()));
    }
    opt.step(gs);
  }
  a.result.codes = {codes.exp.detach(), codes.id.detach(), codes.detail.detach()};
  return a;
}

}  // namespace

FitResult fit_latents(const model::ImFaceModel& m, const ScanData& scan, const model::LatentCodes& init,
                      const FitConfig& config) {
  if (config.steps == 0 || config.points == 0) throw Error(ErrorKind::config, "fit: steps and points must be positive");
  if (init.exp.cols() != m.config.latent_exp || init.id.cols() != m.config.latent_id ||
      init.detail.cols() != m.config.latent_detail) {
    throw Error(ErrorKind::dimension, "fit: initial codes do not match the model's latent sizes");
  }
  Attempt a = run_fit(m, scan, init, config);
  if (!a.diverged) return a.result;
  log_warn("fit diverged; restarting from zero codes");
  Attempt b = run_fit(m, scan, model::zero_codes(m.config), config);
  if (b.diverged) throw Error(ErrorKind::numeric, "fit diverged twice (loss exceeded 10x its initial value)");
  b.result.restarted = true;
  return b.result;
}

}  // namespace imface::train
