#include "imface/training/trainer.hpp"

#include "imface/diffcore/checkpoint.hpp"
#include "imface/error.hpp"
#include "imface/log.hpp"
#include "imface/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace imface::train {

using diff::Tensor;
using diff::Var;
using nlohmann::json;

namespace {

// Seed streams below the config seed.
constexpr std::uint64_t kModelStream = 1;
constexpr std::uint64_t kEmbeddingStream = 2;
constexpr std::uint64_t kShuffleStream = 1ull << 32;
constexpr std::uint64_t kBatchStream = 2ull << 32;

const char* stages_name(Stages s) {
  switch (s) {
    case Stages::stage1: return "stage1";
    case Stages::stage2: return "stage2";
    case Stages::both: return "both";
  }
  return "both";
}

Stages parse_stages(const std::string& s) {
  if (s == "stage1") return Stages::stage1;
  if (s == "stage2") return Stages::stage2;
  if (s == "both") return Stages::both;
  throw Error(ErrorKind::config, "stages must be stage1, stage2 or both, got '" + s + "'");
}

}  // namespace

// ---------------------------------------------------------------- config

void TrainConfig::validate() const {
  if (epochs == 0 || batch_scans == 0 || points_per_scan == 0) {
    throw Error(ErrorKind::config, "epochs, batch_scans and points_per_scan must be positive");
  }
  for (double v : {lr, embedding_lr_scale, detail_lr_scale, embedding_init_std}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorKind::config, "learning rates and init std must be finite and >= 0");
  }
  if (!(t_m >= 0.0 && t_m < 1.0)) throw Error(ErrorKind::config, "t_m must lie in [0, 1)");
  weights.validate();
  model.validate();
}

std::size_t TrainConfig::stage1_epochs() const {
  switch (stages) {
    case Stages::stage1: return epochs;
    case Stages::stage2: return 0;
    case Stages::both: return std::min(epochs, static_cast<std::size_t>(std::ceil(t_m * static_cast<double>(epochs) - 1e-9)));
  }
  return epochs;
}

#define IMFACE_TRAIN_FIELDS(X)                                                                                  \
  X(epochs) X(batch_scans) X(points_per_scan) X(dense_points) X(lr) X(embedding_lr_scale) X(detail_lr_scale) \
      X(t_m) X(literal_kappa) X(embedding_init_std) X(seed) X(checkpoint_every)

void to_json(json& j, const TrainConfig& c) {
  j = json::object();
#define X(f) j[#f] = c.f;
  IMFACE_TRAIN_FIELDS(X)
#undef X
  j["stages"] = stages_name(c.stages);
  j["weights"] = c.weights;
  j["model"] = c.model;
}

void from_json(const json& j, TrainConfig& c) {
  if (!j.is_object()) throw Error(ErrorKind::config, "training config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
#define X(f)                                                                    \
  if (key == #f) {                                                              \
    try {                                                                       \
      c.f = value.get<decltype(c.f)>();                                         \
    } catch (const json::exception&) {                                          \
      throw Error(ErrorKind::config, "config key '" + key + "' has the wrong type"); \
    }                                                                           \
    known = true;                                                               \
  }
    IMFACE_TRAIN_FIELDS(X)
#undef X
    if (key == "stages") {
      if (!value.is_string()) throw Error(ErrorKind::config, "stages must be a string");
      c.stages = parse_stages(value.get<std::string>());
      known = true;
    } else if (key == "weights") {
      from_json(value, c.weights);
      known = true;
    } else if (key == "model") {
      from_json(value, c.model);
      known = true;
    }
    if (!known) throw Error(ErrorKind::config, "unknown config key '" + key + "'");
  }
  c.validate();
}

void apply_override(json& config, const std::string& key, const std::string& value) {
  if (key.empty()) throw Error(ErrorKind::config, "empty override key");
  json parsed = json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;
  json* node = &config;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw Error(ErrorKind::config, "bad override key '" + key + "'");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = parsed;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

// ---------------------------------------------------------------- embeddings

model::LatentCodes EmbeddingTable::codes(std::size_t scan) const {
  return {exp.at(scan), id.at(identity_of.at(scan)), detail.at(scan)};
}

model::LatentCodes EmbeddingTable::mean_codes() const {
  const std::size_t n = exp.size();
  Tensor e(1, exp[0].cols()), i(1, id[0].cols()), d(1, detail[0].cols());
  for (std::size_t s = 0; s < n; ++s) {
    e.matrix() += exp[s].value().matrix();
    i.matrix() += id[identity_of[s]].value().matrix();
    d.matrix() += detail[s].value().matrix();
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (Tensor* t : {&e, &i, &d}) t->matrix() *= inv;
  return {diff::constant(e), diff::constant(i), diff::constant(d)};
}

diff::NamedTensors EmbeddingTable::state() const {
  diff::NamedTensors out;
  for (std::size_t i = 0; i < exp.size(); ++i) out.emplace_back("emb.exp." + scan_keys[i], exp[i].value());
  std::vector<bool> seen(id.size(), false);
  for (std::size_t i = 0; i < exp.size(); ++i) {
    const std::size_t k = identity_of[i];
    if (seen[k]) continue;
    seen[k] = true;
    out.emplace_back("emb.id." + scan_keys[i].substr(0, scan_keys[i].find('/')), id[k].value());
  }
  for (std::size_t i = 0; i < detail.size(); ++i) out.emplace_back("emb.detail." + scan_keys[i], detail[i].value());
  return out;
}

void EmbeddingTable::load_state(const diff::NamedTensors& tensors) {
  auto load = [&](Var& v, const std::string& name) {
    const Tensor& t = diff::find_tensor(tensors, name);
    if (!t.same_shape(v.value())) throw Error(ErrorKind::dimension, name + ": shape " + t.shape_string() + ", expected " + v.value().shape_string());
    v.mutable_value() = t;
  };
  for (std::size_t i = 0; i < exp.size(); ++i) {
    load(exp[i], "emb.exp." + scan_keys[i]);
    load(detail[i], "emb.detail." + scan_keys[i]);
    load(id[identity_of[i]], "emb.id." + scan_keys[i].substr(0, scan_keys[i].find('/')));
  }
}

EmbeddingTable make_embeddings(const TrainingSet& set, const model::ModelConfig& c, double init_std, std::uint64_t seed) {
  diff::Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  auto draw = [&](std::size_t d) {
    Tensor t(1, d);
    for (auto& v : t.values()) v = init_std * g(rng);
    return diff::parameter(std::move(t));
  };
  EmbeddingTable e;
  for (const auto& s : set.scans) {
    e.scan_keys.push_back(s.identity + "/" + s.expression);
    e.identity_of.push_back(s.identity_index);
    e.exp.push_back(draw(c.latent_exp));
  }
  for (std::size_t i = 0; i < set.identities.size(); ++i) e.id.push_back(draw(c.latent_id));
  for (std::size_t i = 0; i < set.scans.size(); ++i) e.detail.push_back(draw(c.latent_detail));
  std::vector<std::string> sorted = e.scan_keys;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw Error(ErrorKind::data, "two scans share the identity/expression label");
  }
  return e;
}

// ---------------------------------------------------------------- trainer

Trainer::Trainer(TrainConfig config, TrainingSet data) : config_(std::move(config)), data_(std::move(data)) {
  config_.validate();
  if (data_.scans.empty()) throw Error(ErrorKind::data, "training set is empty");
  if (data_.mean_landmarks.rows() != config_.model.k) {
    throw Error(ErrorKind::config, "model.k = " + std::to_string(config_.model.k) + " but the scans carry " +
                                       std::to_string(data_.mean_landmarks.rows()) + " landmarks");
  }
  model_ = model::make_model(config_.model, data_.mean_landmarks, data_.mean_neutral, data_.template_landmarks,
                             mix_seed(config_.seed, kModelStream));
  emb_ = make_embeddings(data_, config_.model, config_.embedding_init_std, mix_seed(config_.seed, kEmbeddingStream));

  group_net_ = opt_.add_group("networks", config_.lr);
  group_emb_ = opt_.add_group("embeddings", config_.lr * config_.embedding_lr_scale);
  group_detail_ = opt_.add_group("detail", config_.lr * config_.detail_lr_scale);
  for (const auto& [name, v] : model_.base_parameters()) opt_.add_param(group_net_, name, v);
  n_base_ = opt_.slots().size();
  for (std::size_t i = 0; i < emb_.exp.size(); ++i) {
    slot_exp_.push_back(opt_.slots().size());
    opt_.add_param(group_emb_, "emb.exp." + emb_.scan_keys[i], emb_.exp[i]);
  }
  for (std::size_t i = 0; i < emb_.id.size(); ++i) {
    slot_id_.push_back(opt_.slots().size());
    opt_.add_param(group_emb_, "emb.id." + data_.identities[i], emb_.id[i]);
  }
  slot_detail_begin_ = opt_.slots().size();
  for (const auto& [name, v] : model_.detail_parameters()) opt_.add_param(group_detail_, name, v);
  n_detail_ = opt_.slots().size() - slot_detail_begin_;
  for (std::size_t i = 0; i < emb_.detail.size(); ++i) {
    slot_detail_code_.push_back(opt_.slots().size());
    opt_.add_param(group_detail_, "emb.detail." + emb_.scan_keys[i], emb_.detail[i]);
  }
}

std::size_t Trainer::steps_per_epoch() const {
  return (data_.scans.size() + config_.batch_scans - 1) / config_.batch_scans;
}

double Trainer::progress() const {
  const double e = static_cast<double>(epoch_) + static_cast<double>(step_) / static_cast<double>(steps_per_epoch());
  const double frac = e / static_cast<double>(config_.epochs);
  // a stage2-only run covers [T_m, 1] of the blend schedule
  if (config_.stages == Stages::stage2) return config_.t_m + (1.0 - config_.t_m) * frac;
  return frac;
}

bool Trainer::stage2_now() const { return epoch_ >= config_.stage1_epochs(); }

double Trainer::kappa_at(double t) const {
  return losses::stage_blend_kappa(std::clamp(t, config_.t_m, 1.0), config_.t_m);
}

Trainer::Batch Trainer::make_batch(std::size_t epoch, std::size_t step) const {
  const std::size_t n = data_.scans.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  diff::Rng rng(mix_seed(config_.seed, kShuffleStream + epoch));
  std::shuffle(order.begin(), order.end(), rng);
  Batch b;
  const std::size_t begin = step * config_.batch_scans;
  const std::size_t end = std::min(n, begin + config_.batch_scans);
  b.scans.assign(order.begin() + static_cast<std::ptrdiff_t>(begin), order.begin() + static_cast<std::ptrdiff_t>(end));
  b.targets.resize(b.scans.size());
  const std::size_t dense = config_.dense_points == 0 ? 0 : std::max<std::size_t>(1, config_.dense_points / b.scans.size());
  parallel_for(
      b.scans.size(),
      [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
          const std::uint64_t s = mix_seed(config_.seed, kBatchStream + epoch * n + b.scans[i]);
          b.targets[i] = assemble_batch(data_.scans[b.scans[i]], config_.points_per_scan, dense, s);
        }
      },
      1);
  return b;
}

losses::LossWeights Trainer::scan_weights(std::size_t batch_size) const {
  const std::size_t dense = config_.dense_points == 0 ? 0 : std::max<std::size_t>(1, config_.dense_points / batch_size);
  losses::LossWeights w = losses::per_element(config_.weights, config_.points_per_scan, dense, config_.model.k,
                                              config_.model.latent_exp, config_.model.latent_detail);
  // the batch objective is the mean over its scans
  const double inv = 1.0 / static_cast<double>(batch_size);
  for (double* f : {&w.sdf, &w.normal, &w.eikonal, &w.emb, &w.emb_detail, &w.lmk_gen, &w.lmk_cons, &w.residual, &w.imp}) {
    *f *= inv;
  }
  return w;
}

namespace {

void accumulate_terms(json& acc, const json& terms, double weight) {
  for (const auto& [k, v] : terms.items()) acc[k] = acc.value(k, 0.0) + weight * v.get<double>();
}

Var add_or(const Var& a, const Var& b) { return a.defined() ? diff::add(a, b) : b; }

}  // namespace

Trainer::Objective Trainer::objective(const Batch& b, double t, bool stage2) const {
  const losses::LossWeights w = scan_weights(b.scans.size());
  Objective o;
  o.stage2 = stage2;
  o.terms = json::object();
  if (!stage2) {
    for (std::size_t i = 0; i < b.scans.size(); ++i) {
      const auto terms = losses::stage1_terms(model_, emb_.codes(b.scans[i]), b.targets[i], w);
      o.total = add_or(o.total, terms.total());
      accumulate_terms(o.terms, terms.values(), 1.0);
    }
    return o;
  }
  const double kappa = kappa_at(t);
  // default: kappa on L_f^, so the detail loss ramps in from T_m
  const double w_base = config_.literal_kappa ? 1.0 - kappa : kappa;
  const double w_detail = 1.0 - w_base;
  o.kappa = kappa;
  for (std::size_t i = 0; i < b.scans.size(); ++i) {
    const auto bt = losses::blended_terms(model_, emb_.codes(b.scans[i]), b.targets[i], w);
    o.total = add_or(o.total, diff::add(diff::scale(bt.base.total(), w_base), diff::scale(bt.detail.total(), w_detail)));
    accumulate_terms(o.terms, bt.base.values(), w_base);
    accumulate_terms(o.terms, bt.detail.values(), w_detail);
  }
  return o;
}

StepRecord Trainer::evaluate_batch(std::size_t epoch, std::size_t step, int stage) {
  const Batch b = make_batch(epoch, step);
  const bool s2 = stage == 0 ? epoch >= config_.stage1_epochs() : stage == 2;
  const double t = (static_cast<double>(epoch) + static_cast<double>(step) / static_cast<double>(steps_per_epoch())) /
                   static_cast<double>(config_.epochs);
  const double tt = config_.stages == Stages::stage2 ? config_.t_m + (1.0 - config_.t_m) * t : t;
  const Objective o = objective(b, tt, s2);
  StepRecord r;
  r.epoch = epoch;
  r.step = step;
  r.stage2 = s2;
  r.kappa = o.kappa;
  r.total = o.total.item();
  r.terms = o.terms;
  return r;
}

StepRecord Trainer::step() {
  if (done()) throw Error(ErrorKind::internal, "trainer: all epochs are done");
  const Batch b = make_batch(epoch_, step_);
  const bool s2 = stage2_now();
  const double t = progress();

  std::vector<Var> inputs;
  std::vector<std::size_t> slots;
  auto want = [&](std::size_t slot) {
    if (std::find(slots.begin(), slots.end(), slot) != slots.end()) return;
    slots.push_back(slot);
    inputs.push_back(opt_.slots()[slot].param);
  };
  if (!s2) {
    for (std::size_t i = 0; i < n_base_; ++i) want(i);
    for (std::size_t s : b.scans) {
      want(slot_exp_[s]);
      want(slot_id_[emb_.identity_of[s]]);
    }
  } else {
    for (std::size_t i = 0; i < n_detail_; ++i) want(slot_detail_begin_ + i);
    for (std::size_t s : b.scans) want(slot_detail_code_[s]);
  }

  auto abort = [&](const std::string& what) {
    std::string where;
    if (checkpoint_dir_) {
      save_checkpoint(*checkpoint_dir_ / "last_good");
      where = "; last good state saved to " + (*checkpoint_dir_ / "last_good").string();
    }
    throw Error(ErrorKind::numeric, what + " at epoch " + std::to_string(epoch_) + " step " + std::to_string(step_) + where);
  };

  Objective o;
  std::vector<Tensor> grads(opt_.slots().size());
  try {
    o = objective(b, t, s2);
    if (!std::isfinite(o.total.item())) abort("non-finite loss");
    const auto g = diff::grad(o.total, inputs);
    for (std::size_t i = 0; i < slots.size(); ++i) {
      grads[slots[i]] = g[i].defined() ? g[i].value() : Tensor(inputs[i].rows(), inputs[i].cols());
      if (!grads[slots[i]].all_finite()) abort("non-finite gradient");
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::numeric || std::string(e.what()).find("at epoch") != std::string::npos) throw;
    abort(e.what());
  }
  const double total = o.total.item();

  double lr_active = opt_.lr(group_net_);
  if (s2) {
    // learning rates follow the loss weights
    const double w_detail = config_.literal_kappa ? o.kappa : 1.0 - o.kappa;
    opt_.set_lr(group_detail_, config_.lr * config_.detail_lr_scale * w_detail);
    opt_.set_lr(group_net_, config_.lr * (1.0 - w_detail));
    opt_.set_lr(group_emb_, config_.lr * config_.embedding_lr_scale * (1.0 - w_detail));
    lr_active = opt_.lr(group_detail_);
  }
  opt_.step(grads);

  StepRecord r;
  r.epoch = epoch_;
  r.step = step_;
  r.stage2 = s2;
  r.kappa = o.kappa;
  r.lr = lr_active;
  r.total = total;
  r.terms = o.terms;

  if (log_path_) {
    std::ofstream out(*log_path_, std::ios::app);
    out.precision(17);
    out << r.epoch << ',' << r.step << ',' << (s2 ? 2 : 1) << ',' << r.kappa << ',' << r.lr << ',' << r.total;
    for (const char* k : {"sdf", "eik", "emb", "lmk_g", "lmk_c", "res", "imp"}) out << ',' << r.terms.value(k, 0.0);
    out << '\n';
  }

  epoch_sum_ += total;
  if (++step_ == steps_per_epoch()) {
    epoch_log_.push_back({epoch_, s2, epoch_sum_ / static_cast<double>(steps_per_epoch())});
    log_info("epoch " + std::to_string(epoch_) + (s2 ? " [stage 2]" : "") + " loss " + std::to_string(epoch_log_.back().loss));
    step_ = 0;
    epoch_sum_ = 0.0;
    ++epoch_;
    if (checkpoint_dir_ && config_.checkpoint_every > 0 && epoch_ % config_.checkpoint_every == 0) {
      save_checkpoint(*checkpoint_dir_ / "latest");
    }
  }
  return r;
}

void Trainer::run(std::size_t max_steps) {
  for (std::size_t i = 0; i < max_steps && !done(); ++i) step();
}

void Trainer::set_log(const std::filesystem::path& csv) {
  log_path_ = csv;
  if (!std::filesystem::exists(csv)) {
    std::ofstream out(csv);
    if (!out) throw Error(ErrorKind::io, "cannot write " + csv.string());
    out << "epoch,step,stage,kappa,lr,total,sdf,eik,emb,lmk_g,lmk_c,res,imp\n";
  }
}

void Trainer::load_model_state(const model::ImFaceModel& m) {
  check_model_manifest(model::manifest(m.config), config_.model);
  model_.load_state(m.state());
}

std::uint64_t hash_values(const std::vector<Var>& vars) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& v : vars) {
    const auto* p = reinterpret_cast<const unsigned char*>(v.value().data());
    for (std::size_t i = 0; i < v.value().size() * sizeof(double); ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

std::uint64_t Trainer::frozen_hash() const {
  std::vector<Var> vars;
  for (const auto& [name, v] : model_.base_parameters()) vars.push_back(v);
  vars.insert(vars.end(), emb_.exp.begin(), emb_.exp.end());
  vars.insert(vars.end(), emb_.id.begin(), emb_.id.end());
  vars.push_back(diff::constant(model_.template_landmarks));
  return hash_values(vars);
}

// ---------------------------------------------------------------- files

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::config, path.string() + ": invalid JSON");
  return j;
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ostringstream s;
  s << j.dump(2) << '\n';
  const std::string text = s.str();
  diff::write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

void check_model_manifest(const json& saved, const model::ModelConfig& expected) {
  const json want = model::manifest(expected);
  for (const auto& [key, value] : want.items()) {
    if (!saved.contains(key)) throw Error(ErrorKind::config, "model manifest lacks '" + key + "'");
    if (saved[key] != value) {
      throw Error(ErrorKind::config, "model manifest mismatch in '" + key + "': saved " + saved[key].dump() +
                                         ", configured " + value.dump());
    }
  }
}

void Trainer::save_checkpoint(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
  diff::NamedTensors t;
  for (auto& [name, v] : model_.state()) t.emplace_back("model." + name, v);
  for (auto& [name, v] : emb_.state()) t.emplace_back(name, v);
  Tensor steps(1, opt_.slots().size());
  for (std::size_t i = 0; i < opt_.slots().size(); ++i) {
    const auto& s = opt_.slots()[i];
    t.emplace_back("adam.m." + s.name, s.m);
    t.emplace_back("adam.v." + s.name, s.v);
    steps[i] = static_cast<double>(s.steps);
  }
  t.emplace_back("adam.steps", steps);
  t.emplace_back("adam.lr", Tensor(1, 3));
  for (std::size_t g = 0; g < 3; ++g) t.back().second[g] = opt_.lr(g);

  json m;
  m["format"] = kCheckpointFormat;
  m["config"] = config_;
  m["model"] = model::manifest(config_.model);
  m["schedule"] = {{"epoch", epoch_}, {"step", step_}, {"optimizer_steps", opt_.step_count()}, {"epoch_sum", epoch_sum_}};
  json epochs = json::array();
  for (const auto& e : epoch_log_) epochs.push_back({e.epoch, e.stage2, e.loss});
  m["epochs"] = epochs;
  m["scans"] = emb_.scan_keys;
  diff::write_tensors(dir / "state.bin", t);
  write_json(dir / "checkpoint.json", m);
}

void Trainer::load_checkpoint(const std::filesystem::path& dir) {
  const json m = read_json(dir / "checkpoint.json");
  if (!m.contains("format") || m["format"] != kCheckpointFormat) {
    throw Error(ErrorKind::io, dir.string() + ": checkpoint format " + (m.contains("format") ? m["format"].dump() : "?") +
                                   ", expected " + std::to_string(kCheckpointFormat));
  }
  check_model_manifest(m.at("model"), config_.model);
  if (m.at("scans").get<std::vector<std::string>>() != emb_.scan_keys) {
    throw Error(ErrorKind::data, dir.string() + ": checkpoint was trained on a different scan list");
  }
  // decode everything before touching any state
  const diff::NamedTensors t = diff::read_tensors(dir / "state.bin");
  diff::NamedTensors model_state;
  for (const auto& [name, v] : t) {
    if (name.rfind("model.", 0) == 0) model_state.emplace_back(name.substr(6), v);
  }
  const Tensor& steps = diff::find_tensor(t, "adam.steps");
  const Tensor& lrs = diff::find_tensor(t, "adam.lr");
  if (steps.size() != opt_.slots().size() || lrs.size() != 3) throw Error(ErrorKind::data, "checkpoint optimizer layout differs");
  std::vector<std::pair<const Tensor*, const Tensor*>> moments;
  for (const auto& s : opt_.slots()) {
    const Tensor& mm = diff::find_tensor(t, "adam.m." + s.name);
    const Tensor& vv = diff::find_tensor(t, "adam.v." + s.name);
    if (!mm.same_shape(s.m) || !vv.same_shape(s.v)) throw Error(ErrorKind::dimension, "checkpoint moments for " + s.name + " differ in shape");
    moments.emplace_back(&mm, &vv);
  }
  const auto& sched = m.at("schedule");

  model_.load_state(model_state);
  emb_.load_state(t);
  for (std::size_t i = 0; i < opt_.slots().size(); ++i) {
    auto& s = opt_.slots()[i];
    s.m = *moments[i].first;
    s.v = *moments[i].second;
    s.steps = static_cast<std::size_t>(steps[i]);
  }
  for (std::size_t g = 0; g < 3; ++g) opt_.set_lr(g, lrs[g]);
  opt_.set_step_count(sched.at("optimizer_steps").get<std::size_t>());
  epoch_ = sched.at("epoch").get<std::size_t>();
  step_ = sched.at("step").get<std::size_t>();
  epoch_sum_ = sched.at("epoch_sum").get<double>();
  epoch_log_.clear();
  for (const auto& e : m.at("epochs")) epoch_log_.push_back({e[0].get<std::size_t>(), e[1].get<bool>(), e[2].get<double>()});
}

void Trainer::save_outputs(const std::filesystem::path& dir) const {
  model::save_model(dir, model_);
  diff::write_tensors(dir / "embeddings.bin", emb_.state());
}

}  // namespace imface::train
