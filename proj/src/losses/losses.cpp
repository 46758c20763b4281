#include "imface/losses/losses.hpp"

#include "imface/error.hpp"

#include <cmath>
#include <numbers>

namespace imface::losses {

using diff::Tensor;
using diff::Var;
using nlohmann::json;

void LossWeights::validate() const {
  for (double v : {sdf, normal, eikonal, emb, emb_detail, lmk_gen, lmk_cons, residual, imp}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorKind::config, "loss weights must be finite and non-negative");
  }
}

#define IMFACE_LOSS_FIELDS(X) X(sdf) X(normal) X(eikonal) X(emb) X(emb_detail) X(lmk_gen) X(lmk_cons) X(residual) X(imp)

void to_json(json& j, const LossWeights& w) {
  j = json::object();
#define X(f) j[#f] = w.f;
  IMFACE_LOSS_FIELDS(X)
#undef X
}

void from_json(const json& j, LossWeights& w) {
  if (!j.is_object()) throw Error(ErrorKind::config, "loss weights must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
#define X(f)                                                                     \
  if (key == #f) {                                                               \
    if (!value.is_number()) throw Error(ErrorKind::config, "weights." + key + " must be a number"); \
    w.f = value.get<double>();                                                   \
    known = true;                                                                \
  }
    IMFACE_LOSS_FIELDS(X)
#undef X
    if (!known) throw Error(ErrorKind::config, "unknown loss weight '" + key + "'");
  }
  w.validate();
}

LossWeights per_element(const LossWeights& w, std::size_t n_points, std::size_t m_dense, std::size_t k,
                        std::size_t latent_exp, std::size_t latent_detail) {
  auto inv = [](std::size_t n) { return n ? 1.0 / static_cast<double>(n) : 0.0; };
  LossWeights out = w;
  out.sdf *= inv(n_points);
  out.normal *= inv(n_points);
  out.eikonal *= inv(n_points);
  out.residual *= inv(n_points);
  out.imp *= inv(n_points);
  out.lmk_cons *= inv(m_dense);
  out.lmk_gen *= inv(3 * k);
  out.emb *= inv(latent_exp);
  out.emb_detail *= inv(latent_detail);
  return out;
}

namespace {

Var scalar(double v) { return diff::constant(Tensor::scalar(v)); }

void require_rows(const Var& a, const Tensor& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::dimension, std::string(what) + ": prediction " + a.value().shape_string() +
                                          " does not match target " + b.shape_string());
  }
}

}  // namespace

Var sdf_loss(const Var& s, const Var& grad, const Tensor& s_gt, const Tensor& n_gt, double l1, double l2) {
  require_rows(s, s_gt, "sdf loss");
  require_rows(grad, n_gt, "normal loss");
  const Var value_term = diff::sum(diff::abs(diff::sub(s, diff::constant(s_gt))));
  const Var cos_term = diff::sum(diff::sub(scalar(1.0), diff::row_dot(grad, diff::constant(n_gt))));
  return diff::add(diff::scale(value_term, l1), diff::scale(cos_term, l2));
}

Var eikonal_loss(const Var& grad_f, const Var& grad_id, double l3) {
  Var acc = diff::sum(diff::abs(diff::add_scalar(diff::row_norm(grad_f), -1.0)));
  if (grad_id.defined()) acc = diff::add(acc, diff::sum(diff::abs(diff::add_scalar(diff::row_norm(grad_id), -1.0))));
  return diff::scale(acc, l3);
}

Var embedding_loss(const model::LatentCodes& codes, double l4, double l5) {
  const Var id_exp = diff::add(diff::sum(diff::square(codes.exp)), diff::sum(diff::square(codes.id)));
  return diff::add(diff::scale(id_exp, l4), diff::scale(diff::sum(diff::square(codes.detail)), l5));
}

Var landmark_gen_loss(const Var& l, const Var& l_neutral, const Tensor& gt, const Tensor& gt_neutral, double l6) {
  require_rows(l, gt, "landmark generation loss");
  require_rows(l_neutral, gt_neutral, "landmark generation loss (neutral)");
  const Var a = diff::sum(diff::abs(diff::sub(l, diff::constant(gt))));
  const Var b = diff::sum(diff::abs(diff::sub(l_neutral, diff::constant(gt_neutral))));
  return diff::scale(diff::add(a, b), l6);
}

Var landmark_consistency_loss(const Var& exp_points, const Var& template_points, const Tensor& gt_neutral,
                              const Tensor& gt_template, double l7) {
  require_rows(exp_points, gt_neutral, "landmark consistency loss");
  require_rows(template_points, gt_template, "landmark consistency loss (template)");
  const Var a = diff::sum(diff::abs(diff::sub(exp_points, diff::constant(gt_neutral))));
  const Var b = diff::sum(diff::abs(diff::sub(template_points, diff::constant(gt_template))));
  return diff::scale(diff::add(a, b), l7);
}

Var residual_loss(const Var& delta, double l8) { return diff::scale(diff::sum(diff::abs(delta)), l8); }

Var neutral_suppression_loss(const Var& exp_points, const Var& points, bool is_neutral, double l9) {
  if (!is_neutral) return scalar(0.0);
  return diff::scale(diff::sum(diff::square(diff::sub(exp_points, points))), l9);
}

double stage_blend_kappa(double t, double t_m) {
  if (!(t_m >= 0.0 && t_m < 1.0)) throw Error(ErrorKind::config, "T_m must lie in [0, 1)");
  if (!(t >= t_m && t <= 1.0)) throw Error(ErrorKind::config, "kappa is only defined for T_m <= t <= 1");
  // same curve as (1 + cos(pi u)) / 2, written around the midpoint so that
  // t = (1 + T_m) / 2 gives exactly 0.5 and the endpoints exactly 1 and 0
  const double s = ((1.0 + t_m) - 2.0 * t) / (1.0 - t_m);
  return 0.5 + 0.5 * std::sin(0.5 * std::numbers::pi * s);
}

Var LossTerms::total() const {
  Var acc;
  for (const Var* v : {&sdf, &eik, &emb, &lmk_g, &lmk_c, &res, &imp}) {
    if (!v->defined()) continue;
    acc = acc.defined() ? diff::add(acc, *v) : *v;
  }
  return acc.defined() ? acc : scalar(0.0);
}

json LossTerms::values() const {
  json j = json::object();
  auto put = [&](const char* name, const Var& v) {
    if (v.defined()) j[name] = v.item();
  };
  put("sdf", sdf);
  put("eik", eik);
  put("emb", emb);
  put("lmk_g", lmk_g);
  put("lmk_c", lmk_c);
  put("res", res);
  put("imp", imp);
  return j;
}

namespace {

void check_batch(const ScanBatch& b) {
  if (b.points.rows() == 0 || b.points.cols() != 3) throw Error(ErrorKind::data, "scan batch has no points");
  if (b.sdf.rows() != b.points.rows() || b.normals.rows() != b.points.rows()) {
    throw Error(ErrorKind::data, "scan batch targets do not match the point count");
  }
}

// g_id: spatial gradient of T(I(p')) at p' = E(p), residual excluded.
Var identity_space_gradient(const model::BaseEval& e) { return diff::grad(e.s0, {e.p_id}, Var(), true)[0]; }

LossTerms base_terms_from(const model::Conditioned& c, const model::LatentCodes& codes, const ScanBatch& b,
                          const LossWeights& w, const Var& p, const model::BaseEval& e, const Var& grad_f) {
  LossTerms t;
  t.sdf = sdf_loss(e.sdf, grad_f, b.sdf, b.normals, w.sdf, w.normal);
  t.eik = eikonal_loss(grad_f, identity_space_gradient(e), w.eikonal);
  t.emb = embedding_loss(codes, w.emb, w.emb_detail);
  t.lmk_g = landmark_gen_loss(c.l, c.l_neutral, b.landmarks, b.neutral_landmarks, w.lmk_gen);
  if (b.dense.rows() > 0 && w.lmk_cons > 0.0) {
    const Var dense = diff::constant(b.dense);
    const Var on_id = model::exp_deform(c, dense);
    const Var on_template = model::id_deform(c, on_id).point;
    t.lmk_c = landmark_consistency_loss(on_id, on_template, b.dense_neutral, b.dense_template, w.lmk_cons);
  } else {
    t.lmk_c = scalar(0.0);
  }
  t.res = residual_loss(e.delta, w.residual);
  t.imp = neutral_suppression_loss(e.p_id, p, b.is_neutral, w.imp);
  return t;
}

}  // namespace

LossTerms stage1_terms(const model::ImFaceModel& m, const model::LatentCodes& codes, const ScanBatch& batch,
                       const LossWeights& w) {
  check_batch(batch);
  const model::Conditioned c = model::condition(m, codes);
  const Var p = diff::parameter(batch.points);
  const model::BaseEval e = model::base_eval(c, p);
  const Var grad_f = diff::grad(e.sdf, {p}, Var(), true)[0];
  return base_terms_from(c, codes, batch, w, p, e, grad_f);
}

namespace {

LossTerms detail_terms_from(const model::LatentCodes& codes, const ScanBatch& b, const LossWeights& w, const Var& p,
                            const model::DetailEval& d) {
  LossTerms t;
  const Var grad_f = diff::grad(d.at_corrected.sdf, {p}, Var(), true)[0];
  t.sdf = sdf_loss(d.at_corrected.sdf, grad_f, b.sdf, b.normals, w.sdf, w.normal);
  t.eik = eikonal_loss(grad_f, identity_space_gradient(d.at_corrected), w.eikonal);
  t.emb = embedding_loss(codes, w.emb, w.emb_detail);
  return t;
}

}  // namespace

LossTerms stage2_terms(const model::ImFaceModel& m, const model::LatentCodes& codes, const ScanBatch& batch,
                       const LossWeights& w) {
  check_batch(batch);
  const model::Conditioned c = model::condition(m, codes);
  const Var p = diff::parameter(batch.points);
  return detail_terms_from(codes, batch, w, p, model::detail_eval(c, p));
}

BlendedTerms blended_terms(const model::ImFaceModel& m, const model::LatentCodes& codes, const ScanBatch& batch,
                           const LossWeights& w) {
  check_batch(batch);
  const model::Conditioned c = model::condition(m, codes);
  const Var p = diff::parameter(batch.points);
  const model::DetailEval d = model::detail_eval(c, p);
  BlendedTerms out;
  out.base = base_terms_from(c, codes, batch, w, p, d.base, d.base_grad);
  out.detail = detail_terms_from(codes, batch, w, p, d);
  return out;
}

LossTerms fitting_terms(const model::ImFaceModel& m, const model::LatentCodes& codes, const ScanBatch& batch,
                        const LossWeights& w, bool use_detail) {
  check_batch(batch);
  const model::Conditioned c = model::condition(m, codes);
  const Var p = diff::parameter(batch.points);
  if (use_detail) return detail_terms_from(codes, batch, w, p, model::detail_eval(c, p));
  const model::BaseEval e = model::base_eval(c, p);
  const Var grad_f = diff::grad(e.sdf, {p}, Var(), true)[0];
  LossTerms t;
  t.sdf = sdf_loss(e.sdf, grad_f, batch.sdf, batch.normals, w.sdf, w.normal);
  t.eik = eikonal_loss(grad_f, identity_space_gradient(e), w.eikonal);
  t.emb = embedding_loss(codes, w.emb, w.emb_detail);
  return t;
}

}  // namespace imface::losses
