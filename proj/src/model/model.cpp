#include "imface/model/model.hpp"

#include "imface/error.hpp"
#include "imface/fields/se3.hpp"
#include "imface/log.hpp"
#include "imface/parallel.hpp"

#include <cmath>
#include <fstream>

namespace imface::model {

using diff::Tensor;
using diff::Var;
using nlohmann::json;

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw Error(ErrorKind::config, std::string("model.") + name + " must be positive");
  };
  positive(k, "k");
  positive(latent_exp, "latent_exp");
  positive(latent_id, "latent_id");
  positive(latent_detail, "latent_detail");
  positive(width, "width");
  positive(detail_width, "detail_width");
  positive(depth, "depth");
  positive(fusion_width, "fusion_width");
  positive(hyper_hidden, "hyper_hidden");
  positive(landmark_hidden, "landmark_hidden");
  if (!(w0 > 0) || !(detail_w0 > 0) || !(fusion_w0 > 0)) throw Error(ErrorKind::config, "model: w0 values must be positive");
  if (!(sigma_att_mm > 0)) throw Error(ErrorKind::config, "model.sigma_att_mm must be positive");
  if (!(unit_mm > 0)) throw Error(ErrorKind::config, "model.unit_mm must be positive");
  if (!(deform_init_scale >= 0)) throw Error(ErrorKind::config, "model.deform_init_scale must be >= 0");
}

namespace {

fields::BlockSpec block(const ModelConfig& c, std::size_t width, double w0, fields::BlockOutput out) {
  fields::BlockSpec s;
  s.k = c.k;
  s.n_freq = c.n_freq;
  s.width = width;
  s.depth = c.depth;
  s.w0 = w0;
  s.output = out;
  s.fusion_width = c.fusion_width;
  s.fusion_w0 = c.fusion_w0;
  return s;
}

}  // namespace

fields::BlockSpec ModelConfig::exp_block() const { return block(*this, width, w0, fields::BlockOutput::se3); }
fields::BlockSpec ModelConfig::id_block() const { return block(*this, width, w0, fields::BlockOutput::se3_residual); }
fields::BlockSpec ModelConfig::temp_block() const { return block(*this, width, w0, fields::BlockOutput::scalar); }
fields::BlockSpec ModelConfig::detail_block() const {
  return block(*this, detail_width, detail_w0, fields::BlockOutput::scalar);
}

#define IMFACE_MODEL_FIELDS(X)                                                                                        \
  X(k) X(n_freq) X(latent_exp) X(latent_id) X(latent_detail) X(width) X(detail_width) X(depth) X(w0) X(detail_w0)   \
      X(fusion_width) X(fusion_w0) X(hyper_hidden) X(landmark_hidden) X(deform_init_scale) X(sigma_att_mm) X(unit_mm)

void to_json(json& j, const ModelConfig& c) {
  j = json::object();
#define X(f) j[#f] = c.f;
  IMFACE_MODEL_FIELDS(X)
#undef X
}

void from_json(const json& j, ModelConfig& c) {
  if (!j.is_object()) throw Error(ErrorKind::config, "model config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
#define X(f)                                                                                   \
  if (key == #f) {                                                                             \
    try {                                                                                      \
      c.f = value.get<decltype(c.f)>();                                                        \
    } catch (const json::exception&) {                                                         \
      throw Error(ErrorKind::config, "model." + key + " has the wrong type");                  \
    }                                                                                          \
    known = true;                                                                              \
  }
    IMFACE_MODEL_FIELDS(X)
#undef X
    if (!known) throw Error(ErrorKind::config, "unknown model key '" + key + "'");
  }
  c.validate();
}

LatentCodes zero_codes(const ModelConfig& c) {
  return {diff::constant(Tensor(1, c.latent_exp)), diff::constant(Tensor(1, c.latent_id)),
          diff::constant(Tensor(1, c.latent_detail))};
}

namespace {

using Named = std::vector<std::pair<std::string, Var>>;

void add_mlp(Named& out, const std::string& prefix, const diff::MLPParams& p) {
  for (std::size_t l = 0; l < p.size(); ++l) {
    out.emplace_back(prefix + ".l" + std::to_string(l) + ".w", p[l].weight);
    out.emplace_back(prefix + ".l" + std::to_string(l) + ".b", p[l].bias);
  }
}

void add_hyper(Named& out, const std::string& prefix, const std::vector<fields::HyperNet>& nets) {
  for (std::size_t n = 0; n < nets.size(); ++n) {
    for (std::size_t g = 0; g < nets[n].generators.size(); ++g) {
      add_mlp(out, prefix + "." + std::to_string(n) + ".g" + std::to_string(g), nets[n].generators[g]);
    }
  }
}

}  // namespace

Named ImFaceModel::base_parameters() const {
  Named out;
  add_hyper(out, "exp.hyper", exp_hyper);
  add_mlp(out, "exp.fusion", exp_fusion);
  add_hyper(out, "id.hyper", id_hyper);
  add_mlp(out, "id.fusion", id_fusion);
  for (std::size_t n = 0; n < temp_regions.size(); ++n) add_mlp(out, "temp.region." + std::to_string(n), temp_regions[n]);
  add_mlp(out, "temp.fusion", temp_fusion);
  add_mlp(out, "eta", eta.params);
  add_mlp(out, "eta_neutral", eta_neutral.params);
  return out;
}

Named ImFaceModel::detail_parameters() const {
  Named out;
  add_hyper(out, "detail.hyper", detail_hyper);
  add_mlp(out, "detail.fusion", detail_fusion);
  return out;
}

diff::NamedTensors ImFaceModel::state() const {
  diff::NamedTensors out;
  for (const auto& [name, v] : base_parameters()) out.emplace_back(name, v.value());
  for (const auto& [name, v] : detail_parameters()) out.emplace_back(name, v.value());
  out.emplace_back("template_landmarks", template_landmarks);
  return out;
}

void ImFaceModel::load_state(const diff::NamedTensors& tensors) {
  auto copy_into = [&](const std::string& name, Tensor& dst) {
    const Tensor& src = diff::find_tensor(tensors, name);
    if (!src.same_shape(dst)) {
      throw Error(ErrorKind::data, "checkpoint tensor '" + name + "' has shape " + src.shape_string() + ", expected " +
                                       dst.shape_string());
    }
    dst = src;
  };
  for (auto& [name, v] : base_parameters()) copy_into(name, v.mutable_value());
  for (auto& [name, v] : detail_parameters()) copy_into(name, v.mutable_value());
  copy_into("template_landmarks", template_landmarks);
}

ImFaceModel make_model(const ModelConfig& config, const Tensor& mean_landmarks, const Tensor& mean_neutral,
                       const Tensor& template_landmarks, std::uint64_t seed) {
  config.validate();
  for (const Tensor* t : {&mean_landmarks, &mean_neutral, &template_landmarks}) {
    if (t->rank() != 2 || t->rows() != config.k || t->cols() != 3) {
      throw Error(ErrorKind::config, "make_model: landmark matrices must be " + std::to_string(config.k) + " x 3");
    }
  }
  diff::Rng rng(seed);
  ImFaceModel m;
  m.config = config;
  const auto exp_spec = config.exp_block();
  const auto id_spec = config.id_block();
  const auto temp_spec = config.temp_block();
  const auto detail_spec = config.detail_block();

  fields::HyperInit deform;
  deform.hidden = config.hyper_hidden;
  deform.final_scale = config.deform_init_scale;
  fields::HyperInit id_init = deform;
  id_init.zero_output_cols = {6};  // delta starts at zero
  fields::HyperInit detail;
  detail.hidden = config.hyper_hidden;
  detail.final_scale = 0.0;

  for (std::size_t n = 0; n < config.k; ++n) {
    m.exp_hyper.push_back(fields::make_hypernet(exp_spec.region_spec(), config.latent_exp, deform, rng));
    m.id_hyper.push_back(fields::make_hypernet(id_spec.region_spec(), config.latent_id, id_init, rng));
    m.temp_regions.push_back(diff::init_mlp(temp_spec.region_spec(), rng));
    m.detail_hyper.push_back(fields::make_hypernet(detail_spec.region_spec(), config.latent_detail, detail, rng));
  }
  m.exp_fusion = fields::init_fusion(exp_spec, rng);
  m.id_fusion = fields::init_fusion(id_spec, rng);
  m.temp_fusion = fields::init_fusion(temp_spec, rng);
  m.detail_fusion = fields::init_fusion(detail_spec, rng);
  m.eta = fields::make_landmark_net(config.latent_exp + config.latent_id, config.landmark_hidden, mean_landmarks, rng);
  m.eta_neutral = fields::make_landmark_net(config.latent_id, config.landmark_hidden, mean_neutral, rng);
  m.template_landmarks = template_landmarks;
  return m;
}

void zero_detail_head(ImFaceModel& m) {
  for (auto& h : m.detail_hyper) {
    auto& last = h.generators.back();
    for (auto& v : last[1].weight.mutable_value().values()) v = 0.0;
    for (auto& v : last[1].bias.mutable_value().values()) v = 0.0;
  }
}

Conditioned condition(const ImFaceModel& m, const LatentCodes& codes) {
  const auto& c = m.config;
  if (codes.exp.cols() != c.latent_exp || codes.id.cols() != c.latent_id || codes.detail.cols() != c.latent_detail) {
    throw Error(ErrorKind::dimension, "latent code dimensions do not match the model");
  }
  Conditioned out;
  out.model = &m;
  for (std::size_t n = 0; n < c.k; ++n) {
    out.exp.regions.push_back(fields::hyper_generate(m.exp_hyper[n], codes.exp));
    out.id.regions.push_back(fields::hyper_generate(m.id_hyper[n], codes.id));
    out.detail.regions.push_back(fields::hyper_generate(m.detail_hyper[n], codes.detail));
  }
  out.exp.fusion = m.exp_fusion;
  out.id.fusion = m.id_fusion;
  out.detail.fusion = m.detail_fusion;
  out.temp.regions = m.temp_regions;
  out.temp.fusion = m.temp_fusion;
  out.l = fields::predict_landmarks(m.eta, codes.exp, codes.id);
  out.l_neutral = fields::predict_landmarks_neutral(m.eta_neutral, codes.id);
  out.l_template = diff::constant(m.template_landmarks);
  return out;
}

Var exp_deform(const Conditioned& c, const Var& p) {
  const Var xi = fields::blend_field(c.model->config.exp_block(), c.exp, p, c.l);
  return fields::se3_apply(p, xi);
}

IdOutput id_deform(const Conditioned& c, const Var& p_id) {
  const Var out = fields::blend_field(c.model->config.id_block(), c.id, p_id, c.l_neutral);
  return {fields::se3_apply(p_id, diff::slice_cols(out, 0, 6)), diff::slice_cols(out, 6, 7)};
}

Var template_sdf(const Conditioned& c, const Var& p_template) {
  return fields::blend_field(c.model->config.temp_block(), c.temp, p_template, c.l_template);
}

Var detail_displacement(const Conditioned& c, const Var& p_template) {
  return fields::blend_field(c.model->config.detail_block(), c.detail, p_template, c.l_template);
}

Var attenuation(const Var& s, double sigma) {
  if (!(sigma > 0)) throw Error(ErrorKind::config, "attenuation: sigma must be positive");
  return diff::exp(diff::neg(diff::square(diff::scale(s, 1.0 / sigma))));
}

double attenuation(double s, double sigma) {
  if (!(sigma > 0)) throw Error(ErrorKind::config, "attenuation: sigma must be positive");
  const double r = s / sigma;
  return std::exp(-r * r);
}

BaseEval base_eval(const Conditioned& c, const Var& p) {
  BaseEval e;
  e.p_id = exp_deform(c, p);
  const IdOutput id = id_deform(c, e.p_id);
  e.p_template = id.point;
  e.delta = id.delta;
  e.s0 = template_sdf(c, e.p_template);
  e.sdf = diff::add(e.s0, e.delta);
  return e;
}

Var base_sdf(const Conditioned& c, const Var& p) { return base_eval(c, p).sdf; }

Var template_correspondence(const Conditioned& c, const Var& p) { return id_deform(c, exp_deform(c, p)).point; }

DetailEval detail_eval(const Conditioned& c, const Var& p) {
  constexpr double kDegenerate = 1e-8;
  DetailEval e;
  e.base = base_eval(c, p);
  e.base_grad = diff::grad(e.base.sdf, {p}, Var(), true)[0];
  const Var norm = diff::row_norm(e.base_grad);
  const std::size_t n = p.rows();
  Tensor degenerate(n, 1), keep(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const bool bad = !(norm.value()[i] >= kDegenerate);
    degenerate[i] = bad ? 1.0 : 0.0;
    keep[i] = bad ? 0.0 : 1.0;
    if (bad) ++e.skipped;
  }
  if (e.skipped > 0) log_debug("detail correction skipped at " + std::to_string(e.skipped) + " degenerate points");
  const Var safe_norm = diff::where(degenerate, diff::constant(Tensor(n, 1, 1.0)), norm);
  const Var normal = diff::mul(diff::div(e.base_grad, safe_norm), diff::constant(keep));
  e.d = detail_displacement(c, e.base.p_template);
  const Var chi = attenuation(e.base.sdf, c.model->config.sigma_att());
  e.corrected = diff::add(p, diff::mul(diff::mul(chi, e.d), normal));
  e.at_corrected = base_eval(c, e.corrected);
  return e;
}

Var corrected_point(const Conditioned& c, const Var& p) { return detail_eval(c, p).corrected; }

Var full_sdf(const Conditioned& c, const Var& p) { return detail_eval(c, p).at_corrected.sdf; }

namespace {

constexpr std::size_t kChunk = 1024;

void check_xyz(const std::vector<double>& xyz) {
  if (xyz.size() % 3 != 0) throw Error(ErrorKind::dimension, "point buffer length must be a multiple of 3");
}

// Runs fn(conditioned, begin, count) over chunks of points. Conditioning is
// done once per worker chunk range; generated parameters are read-only.
template <class Fn>
void for_chunks(const ImFaceModel& m, const LatentCodes& codes, std::size_t n_points, Fn fn) {
  const LatentCodes detached{codes.exp.detach(), codes.id.detach(), codes.detail.detach()};
  Conditioned c;
  {
    diff::NoGradGuard ng;
    c = condition(m, detached);
  }
  const std::size_t chunks = (n_points + kChunk - 1) / kChunk;
  parallel_for(chunks, [&](std::size_t begin, std::size_t end) {
    for (std::size_t ch = begin; ch < end; ++ch) {
      const std::size_t first = ch * kChunk;
      fn(c, first, std::min(kChunk, n_points - first));
    }
  }, 1);
}

Tensor slice_points(const std::vector<double>& xyz, std::size_t first, std::size_t count) {
  Tensor t(count, 3);
  std::copy(xyz.begin() + static_cast<std::ptrdiff_t>(3 * first),
            xyz.begin() + static_cast<std::ptrdiff_t>(3 * (first + count)), t.values().begin());
  return t;
}

}  // namespace

std::vector<double> evaluate_sdf(const ImFaceModel& m, const LatentCodes& codes, const std::vector<double>& xyz, bool full,
                                 double band) {
  check_xyz(xyz);
  const std::size_t n = xyz.size() / 3;
  std::vector<double> out(n);
  for_chunks(m, codes, n, [&](const Conditioned& c, std::size_t first, std::size_t count) {
    const Tensor pts = slice_points(xyz, first, count);
    Tensor base;
    {
      diff::NoGradGuard ng;
      base = base_sdf(c, diff::constant(pts)).value();
    }
    if (!full) {
      std::copy(base.values().begin(), base.values().end(), out.begin() + static_cast<std::ptrdiff_t>(first));
      return;
    }
    std::vector<std::size_t> near;
    for (std::size_t i = 0; i < count; ++i) {
      out[first + i] = base[i];
      if (band <= 0.0 || std::fabs(base[i]) <= band) near.push_back(i);
    }
    if (near.empty()) return;
    Tensor sub(near.size(), 3);
    for (std::size_t r = 0; r < near.size(); ++r) {
      for (int j = 0; j < 3; ++j) sub(r, j) = pts(near[r], j);
    }
    diff::EnableGradGuard eg;
    const Var p = diff::parameter(sub);
    const Tensor f = full_sdf(c, p).value();
    for (std::size_t r = 0; r < near.size(); ++r) out[first + near[r]] = f[r];
  });
  return out;
}

std::vector<double> evaluate_template_points(const ImFaceModel& m, const LatentCodes& codes, const std::vector<double>& xyz) {
  check_xyz(xyz);
  std::vector<double> out(xyz.size());
  for_chunks(m, codes, xyz.size() / 3, [&](const Conditioned& c, std::size_t first, std::size_t count) {
    diff::NoGradGuard ng;
    const Tensor q = template_correspondence(c, diff::constant(slice_points(xyz, first, count))).value();
    std::copy(q.values().begin(), q.values().end(), out.begin() + static_cast<std::ptrdiff_t>(3 * first));
  });
  return out;
}

std::vector<double> evaluate_exp_points(const ImFaceModel& m, const LatentCodes& codes, const std::vector<double>& xyz) {
  check_xyz(xyz);
  std::vector<double> out(xyz.size());
  for_chunks(m, codes, xyz.size() / 3, [&](const Conditioned& c, std::size_t first, std::size_t count) {
    diff::NoGradGuard ng;
    const Tensor q = exp_deform(c, diff::constant(slice_points(xyz, first, count))).value();
    std::copy(q.values().begin(), q.values().end(), out.begin() + static_cast<std::ptrdiff_t>(3 * first));
  });
  return out;
}

json manifest(const ModelConfig& c) {
  json j;
  j["format"] = "imface-model";
  j["version"] = 1;
  j["config"] = c;
  return j;
}

void save_model(const std::filesystem::path& dir, const ImFaceModel& m) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "model.json");
    if (!f) throw Error(ErrorKind::io, "cannot write " + (dir / "model.json").string());
    f << manifest(m.config).dump(2) << "\n";
  }
  diff::write_tensors(dir / "model.bin", m.state());
}

ImFaceModel load_model(const std::filesystem::path& dir) {
  std::ifstream f(dir / "model.json");
  if (!f) throw Error(ErrorKind::io, "cannot read " + (dir / "model.json").string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::io, (dir / "model.json").string() + ": " + e.what());
  }
  if (j.value("format", "") != "imface-model" || j.value("version", 0) != 1) {
    throw Error(ErrorKind::io, (dir / "model.json").string() + ": unsupported manifest");
  }
  ModelConfig c = j.at("config").get<ModelConfig>();
  const diff::NamedTensors tensors = diff::read_tensors(dir / "model.bin");
  const Tensor& tl = diff::find_tensor(tensors, "template_landmarks");
  ImFaceModel m = make_model(c, tl, tl, tl, 0);
  m.load_state(tensors);
  return m;
}

}  // namespace imface::model
