#pragma once

#include "imface/model/model.hpp"

#include "json.hpp"

namespace imface::losses {

struct LossWeights {
  double sdf = 3e3;         // lambda1
  double normal = 1e2;      // lambda2
  double eikonal = 5e1;     // lambda3
  double emb = 1e5;         // lambda4
  double emb_detail = 1e3;  // lambda5
  double lmk_gen = 1e3;     // lambda6
  double lmk_cons = 1e2;    // lambda7
  double residual = 1e2;    // lambda8
  double imp = 1e4;         // lambda9

  void validate() const;
};

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);

/// Weights that turn every sum below into a mean: per-point terms over n,
/// consistency over m, landmark generation over the 3k coordinates and the
/// embedding prior over the code width.
LossWeights per_element(const LossWeights& w, std::size_t n_points, std::size_t m_dense, std::size_t k,
                        std::size_t latent_exp, std::size_t latent_detail);

// Individual terms. Every one is a plain sum scaled by its weight.

/// l1 * sum |s - s_gt| + l2 * sum (1 - <grad, n_gt>).
diff::Var sdf_loss(const diff::Var& s, const diff::Var& grad, const diff::Tensor& s_gt, const diff::Tensor& n_gt,
                   double l1, double l2);
/// l3 * sum (| |g_f| - 1 | + | |g_id| - 1 |); g_id may be undefined.
diff::Var eikonal_loss(const diff::Var& grad_f, const diff::Var& grad_id, double l3);
diff::Var embedding_loss(const model::LatentCodes& codes, double l4, double l5);
diff::Var landmark_gen_loss(const diff::Var& l, const diff::Var& l_neutral, const diff::Tensor& gt,
                            const diff::Tensor& gt_neutral, double l6);
/// l7 * sum (|E(l_n) - gt_neutral_n| + |I(E(l_n)) - template_n|), l1 per coordinate.
diff::Var landmark_consistency_loss(const diff::Var& exp_points, const diff::Var& template_points,
                                    const diff::Tensor& gt_neutral, const diff::Tensor& gt_template, double l7);
diff::Var residual_loss(const diff::Var& delta, double l8);
/// l9 * sum |E(p) - p|^2 on neutral scans, 0 otherwise.
diff::Var neutral_suppression_loss(const diff::Var& exp_points, const diff::Var& points, bool is_neutral, double l9);

/// kappa = (1 + cos(pi (t - T_m) / (1 - T_m))) / 2 on [T_m, 1].
double stage_blend_kappa(double t, double t_m);

// One scan's training targets, model units.
struct ScanBatch {
  diff::Tensor points;   // n x 3
  diff::Tensor sdf;      // n x 1
  diff::Tensor normals;  // n x 3
  diff::Tensor landmarks;          // k x 3 on this scan
  diff::Tensor neutral_landmarks;  // k x 3 on the identity's neutral scan
  diff::Tensor dense;              // m x 3 dense correspondences on this scan
  diff::Tensor dense_neutral;      // same grid ids on the neutral scan
  diff::Tensor dense_template;     // same grid ids on the template
  bool is_neutral = false;
};

struct LossTerms {
  diff::Var sdf, eik, emb, lmk_g, lmk_c, res, imp;

  diff::Var total() const;
  nlohmann::json values() const;
};

/// L_f^ terms for one scan.
LossTerms stage1_terms(const model::ImFaceModel& m, const model::LatentCodes& codes, const ScanBatch& batch,
                       const LossWeights& w);
/// L_f terms (sdf, eikonal, embedding; the rest undefined) using the
/// detail-corrected field.
LossTerms stage2_terms(const model::ImFaceModel& m, const model::LatentCodes& codes, const ScanBatch& batch,
                       const LossWeights& w);

struct BlendedTerms {
  LossTerms base;    // L_f^
  LossTerms detail;  // L_f
};

/// Both stage totals from one detail evaluation: the base terms reuse the
/// base pass that the correction needs anyway.
BlendedTerms blended_terms(const model::ImFaceModel& m, const model::LatentCodes& codes, const ScanBatch& batch,
                           const LossWeights& w);

/// L_sdf + L_eik + L_emb of the full field: the test-time fitting objective.
LossTerms fitting_terms(const model::ImFaceModel& m, const model::LatentCodes& codes, const ScanBatch& batch,
                        const LossWeights& w, bool use_detail);

}  // namespace imface::losses
