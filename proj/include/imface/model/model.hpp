#pragma once

#include "imface/diffcore/checkpoint.hpp"
#include "imface/fields/blend.hpp"
#include "imface/fields/hypernet.hpp"
#include "imface/fields/landmark_net.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>

namespace imface::model {

// All fields work in model units: millimetres divided by unit_mm, so the
// 100 mm sampling sphere becomes the unit ball.
struct ModelConfig {
  std::size_t k = 5;
  std::size_t n_freq = 4;
  std::size_t latent_exp = 32;
  std::size_t latent_id = 32;
  std::size_t latent_detail = 32;
  std::size_t width = 128;  // ExpNet, IDNet, TempNet region nets
  std::size_t detail_width = 256;
  std::size_t depth = 3;
  double w0 = 30.0;
  double detail_w0 = 60.0;
  std::size_t fusion_width = 64;
  double fusion_w0 = 5.0;
  std::size_t hyper_hidden = 32;
  std::size_t landmark_hidden = 256;
  double deform_init_scale = 0.1;  // shrinks the generated deformation head at init
  double sigma_att_mm = 5.0;
  double unit_mm = 100.0;

  void validate() const;
  double sigma_att() const { return sigma_att_mm / unit_mm; }
  fields::BlockSpec exp_block() const;
  fields::BlockSpec id_block() const;
  fields::BlockSpec temp_block() const;
  fields::BlockSpec detail_block() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
/// Missing keys keep their defaults; unknown keys are a config error.
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Per-scan embeddings, each a 1 x d row.
struct LatentCodes {
  diff::Var exp, id, detail;
};

LatentCodes zero_codes(const ModelConfig& c);

struct ImFaceModel {
  ModelConfig config;
  std::vector<fields::HyperNet> exp_hyper, id_hyper, detail_hyper;
  diff::MLPParams exp_fusion, id_fusion, temp_fusion, detail_fusion;
  std::vector<diff::MLPParams> temp_regions;
  fields::LandmarkNet eta;          // (z_exp, z_id) -> l
  fields::LandmarkNet eta_neutral;  // z_id -> l'
  diff::Tensor template_landmarks;  // l'', k x 3, a fixed buffer

  /// ExpNet, IDNet, TempNet and both landmark nets.
  std::vector<std::pair<std::string, diff::Var>> base_parameters() const;
  /// DetailNet (hypernets and fusion).
  std::vector<std::pair<std::string, diff::Var>> detail_parameters() const;

  diff::NamedTensors state() const;
  /// Copies values in place; every name must be present with a matching shape.
  void load_state(const diff::NamedTensors& tensors);
};

/// Landmark matrices are k x 3 in model units: `mean_landmarks` seeds eta,
/// `mean_neutral` seeds eta', `template_landmarks` becomes l''.
ImFaceModel make_model(const ModelConfig& config, const diff::Tensor& mean_landmarks, const diff::Tensor& mean_neutral,
                       const diff::Tensor& template_landmarks, std::uint64_t seed);

/// Zeroes DetailNet's generated output head (weights and biases), so d = 0
/// for every code.
void zero_detail_head(ImFaceModel& m);

/// Mini-Net parameters generated for one scan's codes.
struct Conditioned {
  const ImFaceModel* model = nullptr;
  fields::BlockParams exp, id, temp, detail;
  diff::Var l, l_neutral, l_template;
};

Conditioned condition(const ImFaceModel& m, const LatentCodes& codes);

struct IdOutput {
  diff::Var point;  // p''
  diff::Var delta;  // residual, n x 1
};

/// p' = E(p): expression space to identity space.
diff::Var exp_deform(const Conditioned& c, const diff::Var& p);
/// (p'', delta) = I(p'): identity space to template space.
IdOutput id_deform(const Conditioned& c, const diff::Var& p_id);
diff::Var template_sdf(const Conditioned& c, const diff::Var& p_template);
diff::Var detail_displacement(const Conditioned& c, const diff::Var& p_template);
diff::Var attenuation(const diff::Var& s, double sigma);
double attenuation(double s, double sigma);

// Intermediate values of one base evaluation.
struct BaseEval {
  diff::Var p_id, p_template, s0, delta, sdf;
};
BaseEval base_eval(const Conditioned& c, const diff::Var& p);
diff::Var base_sdf(const Conditioned& c, const diff::Var& p);
diff::Var template_correspondence(const Conditioned& c, const diff::Var& p);

struct DetailEval {
  BaseEval base;         // at p
  diff::Var base_grad;   // grad f^(p), n x 3
  diff::Var d;           // displacement at p''
  diff::Var corrected;   // p'_b
  BaseEval at_corrected; // base fields at p'_b; its sdf is f
  std::size_t skipped = 0;  // points with a degenerate base gradient
};

/// p must be a graph leaf that requires grad (the base gradient is taken with
/// respect to it). Everything stays differentiable.
DetailEval detail_eval(const Conditioned& c, const diff::Var& p);
diff::Var corrected_point(const Conditioned& c, const diff::Var& p);
diff::Var full_sdf(const Conditioned& c, const diff::Var& p);

/// Chunked, no-graph evaluation of a field over many points (model units).
/// `full` selects f over f^. Points whose base |f^| exceeds `band` skip the
/// detail correction, which is below 1e-15 of d there when band >= 6 sigma.
std::vector<double> evaluate_sdf(const ImFaceModel& m, const LatentCodes& codes, const std::vector<double>& xyz, bool full,
                                 double band = 0.0);

/// p'' for many points, no graph.
std::vector<double> evaluate_template_points(const ImFaceModel& m, const LatentCodes& codes, const std::vector<double>& xyz);
/// p' = E(p) for many points, no graph.
std::vector<double> evaluate_exp_points(const ImFaceModel& m, const LatentCodes& codes, const std::vector<double>& xyz);

nlohmann::json manifest(const ModelConfig& c);
void save_model(const std::filesystem::path& dir, const ImFaceModel& m);
ImFaceModel load_model(const std::filesystem::path& dir);

}  // namespace imface::model
