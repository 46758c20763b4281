#include "doctest.h"
#include "gradient_probe.hpp"
#include "model_fixtures.hpp"

#include "imface/error.hpp"
#include "imface/losses/losses.hpp"

#include <cmath>

using namespace imface::losses;
using imface::diff::constant;
using imface::diff::parameter;
using imface::diff::Tensor;
using imface::diff::Var;
using imface::model::LatentCodes;

namespace {

Var row3(double x, double y, double z) { return constant(Tensor::from_rows({{x, y, z}})); }

LatentCodes param_codes(const LatentCodes& c) {
  return {parameter(c.exp.value()), parameter(c.id.value()), parameter(c.detail.value())};
}

std::vector<std::pair<std::string, Var>> code_params(const LatentCodes& c) {
  return {{"z_exp", c.exp}, {"z_id", c.id}, {"z_detail", c.detail}};
}

LossWeights only(double LossWeights::*field, double value = 1.0) {
  LossWeights w{0, 0, 0, 0, 0, 0, 0, 0, 0};
  w.*field = value;
  return w;
}

}  // namespace

TEST_CASE("sdf_loss examples") {
  const Tensor s_gt = Tensor::from_rows({{0.2}});
  const Tensor n_gt = Tensor::from_rows({{0.0, 0.0, 1.0}});
  CHECK(sdf_loss(constant(s_gt), row3(0, 0, 1), s_gt, n_gt, 3.0, 5.0).item() == 0.0);
  CHECK(sdf_loss(constant(Tensor::from_rows({{0.7}})), row3(0, 0, 1), s_gt, n_gt, 2.0, 1.0).item() ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK(sdf_loss(constant(s_gt), row3(0, 0, -1), s_gt, n_gt, 2.0, 1.5).item() == 3.0);
  CHECK_THROWS_AS(sdf_loss(constant(s_gt), row3(0, 0, 1), Tensor(2, 1), n_gt, 1, 1), imface::Error);
}

TEST_CASE("eikonal_loss on analytic fields") {
  Tensor pts(20, 3);
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = std::sin(0.37 * i);
  Var p = parameter(pts);
  const Var f = imface::diff::slice_cols(p, 2, 3);  // f = z
  const Var g = imface::diff::input_gradient(f, p);
  CHECK(eikonal_loss(g, Var(), 4.0).item() == 0.0);
  CHECK(eikonal_loss(g, g, 4.0).item() == 0.0);
  const Var g2 = imface::diff::input_gradient(imface::diff::scale(f, 2.0), p);  // f = 2z
  CHECK(eikonal_loss(g2, Var(), 4.0).item() == doctest::Approx(4.0 * 20));
  CHECK(eikonal_loss(g2, g, 4.0).item() == doctest::Approx(4.0 * 20));
}

TEST_CASE("embedding_loss examples") {
  const auto c = imface::testing::tiny_model_config();
  LatentCodes z = imface::model::zero_codes(c);
  CHECK(embedding_loss(z, 2.0, 3.0).item() == 0.0);
  Tensor e1(1, c.latent_exp);
  e1[0] = 1.0;
  z.exp = constant(e1);
  CHECK(embedding_loss(z, 2.0, 3.0).item() == 2.0);
  const LatentCodes r = imface::testing::random_codes(c, 5);
  const LatentCodes r2{imface::diff::scale(r.exp, 2.0), imface::diff::scale(r.id, 2.0), imface::diff::scale(r.detail, 2.0)};
  CHECK(embedding_loss(r2, 1.5, 0.5).item() == doctest::Approx(4.0 * embedding_loss(r, 1.5, 0.5).item()).epsilon(1e-14));
}

TEST_CASE("landmark_gen_loss examples") {
  const Tensor gt = imface::testing::canonical_model_landmarks();
  CHECK(landmark_gen_loss(constant(gt), constant(gt), gt, gt, 7.0).item() == 0.0);
  Tensor off = gt;
  off(1, 0) += 1.0;
  CHECK(landmark_gen_loss(constant(off), constant(gt), gt, gt, 1.0).item() == doctest::Approx(1.0).epsilon(1e-15));
  Tensor noisy = gt;
  for (std::size_t i = 0; i < noisy.size(); ++i) noisy[i] += 0.01 * std::cos(3.0 * i);
  CHECK(landmark_gen_loss(constant(noisy), constant(gt), gt, noisy, 1.0).item() ==
        landmark_gen_loss(constant(gt), constant(noisy), noisy, gt, 1.0).item());
  CHECK_THROWS_AS(landmark_gen_loss(constant(Tensor(4, 3)), constant(gt), gt, gt, 1.0), imface::Error);
}

TEST_CASE("landmark_consistency_loss examples") {
  const Tensor pts = imface::testing::random_queries(12, 3);
  CHECK(landmark_consistency_loss(constant(pts), constant(pts), pts, pts, 5.0).item() == 0.0);
  // constant translation deformation by (0.5, -0.25, 1.0)
  Tensor moved = pts;
  for (std::size_t i = 0; i < 12; ++i) {
    moved(i, 0) += 0.5;
    moved(i, 1) -= 0.25;
    moved(i, 2) += 1.0;
  }
  CHECK(landmark_consistency_loss(constant(moved), constant(pts), pts, pts, 2.0).item() ==
        doctest::Approx(2.0 * 12 * 1.75).epsilon(1e-14));
}

TEST_CASE("landmark consistency gradient reaches ExpNet and IDNet") {
  auto m = imface::testing::tiny_model(3);
  const LatentCodes codes = imface::testing::random_codes(m.config, 4);
  const ScanBatch b = imface::testing::synthetic_batch(16, 32, 5);
  const LossTerms t = stage1_terms(m, codes, b, only(&LossWeights::lmk_cons));
  std::vector<Var> exp_params, id_params;
  for (const auto& [name, v] : m.base_parameters()) {
    if (name.rfind("exp.hyper", 0) == 0) exp_params.push_back(v);
    if (name.rfind("id.hyper", 0) == 0) id_params.push_back(v);
  }
  auto norm = [](const std::vector<Var>& gs) {
    double s = 0.0;
    for (const auto& g : gs) {
      for (double v : g.value().values()) s += v * v;
    }
    return s;
  };
  CHECK(norm(imface::diff::grad(t.lmk_c, exp_params)) > 0.0);
  CHECK(norm(imface::diff::grad(t.lmk_c, id_params)) > 0.0);
}

TEST_CASE("residual and neutral suppression examples") {
  CHECK(residual_loss(constant(Tensor(5, 1)), 3.0).item() == 0.0);
  CHECK(residual_loss(constant(Tensor::from_rows({{0.5}, {-0.5}})), 2.0).item() == 2.0);
  Var d = parameter(Tensor::from_rows({{0.5}, {-0.25}, {0.0}}));
  const Tensor g = imface::diff::grad(residual_loss(d, 3.0), {d})[0].value();
  CHECK(g[0] == 3.0);
  CHECK(g[1] == -3.0);
  CHECK(g[2] == 0.0);

  const Tensor pts = imface::testing::random_queries(3, 9);
  Tensor shifted = pts;
  for (std::size_t i = 0; i < 3; ++i) shifted(i, 0) += 1.0;
  CHECK(neutral_suppression_loss(constant(shifted), constant(pts), false, 1.0).item() == 0.0);
  CHECK(neutral_suppression_loss(constant(pts), constant(pts), true, 1.0).item() == 0.0);
  CHECK(neutral_suppression_loss(constant(shifted), constant(pts), true, 1.0).item() == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("stage_blend_kappa") {
  for (double tm : {0.0, 0.1, 0.3, 0.6, 0.7, 0.9, 0.95}) {
    CHECK(stage_blend_kappa(tm, tm) == 1.0);
    CHECK(stage_blend_kappa(1.0, tm) == 0.0);
    CHECK(stage_blend_kappa((1.0 + tm) / 2.0, tm) == 0.5);
    double prev = 2.0;
    for (int i = 0; i <= 1000; ++i) {
      const double k = stage_blend_kappa(tm + (1.0 - tm) * i / 1000.0, tm);
      CHECK(k <= prev);
      prev = k;
    }
  }
  CHECK_THROWS_AS(stage_blend_kappa(0.2, 0.5), imface::Error);
  CHECK_THROWS_AS(stage_blend_kappa(0.5, 1.0), imface::Error);
}

TEST_CASE("per_element scales sums into means") {
  const LossWeights w;
  const LossWeights e = per_element(w, 100, 50, 5, 32, 16);
  CHECK(e.sdf == w.sdf / 100);
  CHECK(e.eikonal == w.eikonal / 100);
  CHECK(e.lmk_cons == w.lmk_cons / 50);
  CHECK(e.lmk_gen == w.lmk_gen / 15);
  CHECK(e.emb == w.emb / 32);
  CHECK(e.emb_detail == w.emb_detail / 16);
}

TEST_CASE("stage totals: sums, structure and reduction") {
  auto m = imface::testing::tiny_model(11);
  const LatentCodes codes = imface::testing::random_codes(m.config, 12);
  const ScanBatch b = imface::testing::synthetic_batch(24, 16, 13, true);
  const LossWeights w;
  const LossTerms t1 = stage1_terms(m, codes, b, w);
  double manual = 0.0;
  for (const Var* v : {&t1.sdf, &t1.eik, &t1.emb, &t1.lmk_g, &t1.lmk_c, &t1.res, &t1.imp}) {
    REQUIRE(v->defined());
    CHECK(v->item() >= 0.0);
    manual += v->item();
  }
  CHECK(t1.total().item() == doctest::Approx(manual).epsilon(1e-14));

  const LossTerms t2 = stage2_terms(m, codes, b, w);
  CHECK(!t2.lmk_g.defined());
  CHECK(!t2.lmk_c.defined());
  CHECK(!t2.res.defined());
  CHECK(!t2.imp.defined());
  // fresh model: the detail head is zero, so L_f's terms equal L_f^'s
  CHECK(t2.sdf.item() == t1.sdf.item());
  CHECK(t2.eik.item() == t1.eik.item());
  CHECK(t2.emb.item() == t1.emb.item());

  const BlendedTerms bl = blended_terms(m, codes, b, w);
  CHECK(bl.base.total().item() == t1.total().item());
  CHECK(bl.detail.total().item() == t2.total().item());
}

TEST_CASE("zeroing a weight removes that term's gradient") {
  auto m = imface::testing::tiny_model(14);
  imface::testing::activate_zero_heads(m, 15);
  const LatentCodes codes = param_codes(imface::testing::random_codes(m.config, 16));
  const ScanBatch b = imface::testing::synthetic_batch(12, 8, 17, true);
  LossWeights w;
  LossWeights no_res = w;
  no_res.residual = 0.0;
  LossWeights res_only = only(&LossWeights::residual, w.residual);
  std::vector<Var> params;
  for (const auto& [n, v] : m.base_parameters()) params.push_back(v);
  const auto g_all = imface::diff::grad(stage1_terms(m, codes, b, w).total(), params);
  const auto g_without = imface::diff::grad(stage1_terms(m, codes, b, no_res).total(), params);
  const auto g_res = imface::diff::grad(stage1_terms(m, codes, b, res_only).total(), params);
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t j = 0; j < g_all[i].value().size(); ++j) {
      const double a = g_all[i].value()[j], s = g_without[i].value()[j] + g_res[i].value()[j];
      worst = std::max(worst, std::fabs(a - s) / std::max(1.0, std::fabs(a)));
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("every loss term's gradients match central differences") {
  auto m = imface::testing::tiny_model(21);
  imface::testing::activate_zero_heads(m, 22);
  const LatentCodes codes = param_codes(imface::testing::random_codes(m.config, 23));
  const ScanBatch neutral = imface::testing::synthetic_batch(10, 8, 24, true);

  auto params = m.base_parameters();
  for (const auto& p : m.detail_parameters()) params.push_back(p);
  const auto embeddings = code_params(codes);

  struct Case {
    const char* name;
    double LossWeights::*field;
    bool stage2;
    double tol;
  };
  const Case cases[] = {
      {"sdf+normal", &LossWeights::sdf, false, 1e-4}, {"normal", &LossWeights::normal, false, 1e-4},
      {"eikonal", &LossWeights::eikonal, false, 1e-3}, {"embedding", &LossWeights::emb, false, 1e-4},
      {"embedding detail", &LossWeights::emb_detail, false, 1e-4}, {"landmark gen", &LossWeights::lmk_gen, false, 1e-4},
      {"landmark cons", &LossWeights::lmk_cons, false, 1e-4}, {"residual", &LossWeights::residual, false, 1e-4},
      {"imp", &LossWeights::imp, false, 1e-4}, {"stage2 sdf", &LossWeights::sdf, true, 1e-4},
      {"stage2 normal", &LossWeights::normal, true, 1e-4}, {"stage2 eikonal", &LossWeights::eikonal, true, 1e-3},
  };
  std::uint64_t seed = 100;
  for (const auto& cs : cases) {
    const LossWeights w = only(cs.field);
    auto loss = [&] {
      return cs.stage2 ? stage2_terms(m, codes, neutral, w).total() : stage1_terms(m, codes, neutral, w).total();
    };
    const auto rp = imface::testing::probe_gradients(loss, params, 20, seed++);
    const auto re = imface::testing::probe_gradients(loss, embeddings, 20, seed++);
    const std::string name = cs.name;
    INFO(name << " worst parameter probe " << rp.worst << " at " << rp.worst_at);
    INFO(name << " worst embedding probe " << re.worst << " at " << re.worst_at);
    // the embedding prior is the only term without network parameters
    const bool prior = cs.field == &LossWeights::emb || cs.field == &LossWeights::emb_detail;
    CHECK(rp.probes == (prior ? 0u : 20u));
    CHECK(rp.worst < cs.tol);
    CHECK(re.probes > 0);
    CHECK(re.worst < cs.tol);
  }
}
