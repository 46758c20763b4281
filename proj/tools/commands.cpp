#include "commands.hpp"

#include "common.hpp"

#include "imface/diffcore/checkpoint.hpp"
#include "imface/error.hpp"
#include "imface/geomprep/preprocess.hpp"
#include "imface/log.hpp"
#include "imface/parallel.hpp"
#include "imface/reconeval/latent_ops.hpp"
#include "imface/reconeval/metrics.hpp"
#include "imface/synthdata/synth.hpp"
#include "imface/training/fit.hpp"
#include "imface/training/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>

namespace imface::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path parent_or_cwd(const fs::path& p) { return p.has_parent_path() ? p.parent_path() : fs::path("."); }

model::ImFaceModel load_model_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::io, "model directory " + dir + " does not exist");
  return model::load_model(dir);
}

json point_json(const geom::Vec3& p) { return {p.x(), p.y(), p.z()}; }

// Dotted key present in the default config, so typos are usage errors rather
// than silently created entries.
bool known_key(const json& defaults, const std::string& dotted) {
  const json* at = &defaults;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', start);
    const std::string part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!at->is_object() || !at->contains(part)) return false;
    at = &(*at)[part];
    if (dot == std::string::npos) return true;
    start = dot + 1;
  }
}

}  // namespace

Commands::Commands(CLI::App& app) : app_(app) {
  preprocess_ = app.add_subcommand("preprocess", "Align, crop and sample one scan into an .imfscan record");
  preprocess_->add_option("--mesh", pre_.mesh, "Input OBJ")->required();
  preprocess_->add_option("--landmarks", pre_.landmarks, "Landmark vertex indices, one per line")->required();
  preprocess_->add_option("--out", pre_.out, "Output .imfscan")->required();
  preprocess_->add_option("--aligned", pre_.aligned, "Also write the aligned mesh as OBJ");
  preprocess_->add_option("--identity", pre_.identity, "Identity label (default: file stem)");
  preprocess_->add_option("--expression", pre_.expression, "Expression label")->capture_default_str();
  preprocess_->add_flag("--neutral", pre_.neutral, "Mark the scan as the identity's neutral scan");
  preprocess_->add_option("--n-near", pre_.n_near)->capture_default_str();
  preprocess_->add_option("--n-uniform", pre_.n_uniform)->capture_default_str();
  preprocess_->add_option("--sigma-mm", pre_.sigma_mm, "Near-surface offset spread")->capture_default_str();
  preprocess_->add_option("--unit-to-mm", pre_.unit_to_mm, "Scale from file units to mm")->capture_default_str();
  preprocess_->add_option("--seed", pre_.seed)->capture_default_str();

  synth_ = app.add_subcommand("synth", "Generate the synthetic face dataset");
  synth_->add_option("--identities", syn_.identities)->capture_default_str();
  synth_->add_option("--expressions", syn_.expressions, "Per identity, neutral included")->capture_default_str();
  synth_->add_option("--grid-res", syn_.grid_res)->capture_default_str();
  synth_->add_option("--n-near", syn_.n_near)->capture_default_str();
  synth_->add_option("--n-uniform", syn_.n_uniform)->capture_default_str();
  synth_->add_flag("--no-wrinkles", syn_.no_wrinkles);
  synth_->add_option("--seed", syn_.seed)->required();
  synth_->add_option("--out-dir", syn_.out_dir)->required();

  train_ = app.add_subcommand("train", "Train the model; extra --section.key=value flags override the config");
  train_->add_option("--data", tr_.data, "Directory of .imfscan records")->required();
  train_->add_option("--out-dir", tr_.out_dir)->required();
  train_->add_option("--config", tr_.config, "JSON training config");
  train_->add_option("--seed", tr_.seed)->required();
  train_->add_option("--stage", tr_.stage, "stage1 | stage2 | both")->check(CLI::IsMember({"stage1", "stage2", "both"}));
  train_->add_option("--init", tr_.init, "Start from a trained model directory (needed for stage2)");
  train_->add_option("--resume", tr_.resume, "Continue from a checkpoint directory");
  train_->add_option("--epochs", tr_.epochs);
  train_->add_option("--checkpoint-every", tr_.checkpoint_every, "Epochs between checkpoints");
  train_->add_option("--max-steps", tr_.max_steps, "Stop after this many steps (a checkpoint is written)");
  train_->allow_extras();

  fit_ = app.add_subcommand("fit", "Fit latent codes of one scan against a frozen model");
  fit_->add_option("--model", fit_o_.model)->required();
  fit_->add_option("--scan", fit_o_.scan, ".imfscan record")->required();
  fit_->add_option("--out", fit_o_.out, "Codes JSON")->required();
  fit_->add_option("--seed", fit_o_.seed)->required();
  fit_->add_option("--steps", fit_o_.steps)->capture_default_str();
  fit_->add_option("--points", fit_o_.points)->capture_default_str();
  fit_->add_option("--lr", fit_o_.lr)->capture_default_str();
  fit_->add_option("--init", fit_o_.init, "mean | zero")->check(CLI::IsMember({"mean", "zero"}));
  fit_->add_flag("--no-detail", fit_o_.no_detail, "Fit the base field only");

  reconstruct_ = app.add_subcommand("reconstruct", "Extract a mesh from the model's zero level set");
  reconstruct_->add_option("--checkpoint", rec_.checkpoint, "Model directory")->required();
  auto* codes = reconstruct_->add_option("--codes", rec_.codes, "Codes JSON");
  auto* key = reconstruct_->add_option("--scan-key", rec_.scan_key, "Training scan identity/expression");
  codes->excludes(key);
  reconstruct_->add_option("--resolution", rec_.resolution, "Grid nodes per axis")->capture_default_str();
  reconstruct_->add_option("--out", rec_.out)->required();
  reconstruct_->add_flag("--base-only", rec_.base_only, "Skip the detail correction");

  metrics_ = app.add_subcommand("metrics", "Compare a predicted mesh with a reference mesh");
  metrics_->add_option("--pred", met_.pred)->required();
  metrics_->add_option("--gt", met_.gt)->required();
  metrics_->add_option("--tau-mm", met_.tau_mm)->capture_default_str();
  metrics_->add_option("--samples", met_.samples)->capture_default_str();
  metrics_->add_option("--seed", met_.seed)->capture_default_str();
  metrics_->add_flag("--abs-normals", met_.abs_normals, "Absolute normal inner products");
  metrics_->add_flag("--no-crop", met_.no_crop, "Keep prediction faces outside the reference footprint");
  metrics_->add_option("--out", met_.out, "Report JSON");
  metrics_->add_option("--distances", met_.distances, "Per-vertex distance sidecar for the prediction");
  metrics_->add_option("--model", met_.model, "With --codes and --correspondences: add EDE/TDE");
  metrics_->add_option("--codes", met_.codes);
  metrics_->add_option("--correspondences", met_.correspondences, ".imfcorr ground truth");

  correspond_ = app.add_subcommand("correspond", "Dense correspondences between two fitted scans");
  correspond_->add_option("--model", cor_.model)->required();
  correspond_->add_option("--codes-a", cor_.codes_a)->required();
  correspond_->add_option("--codes-b", cor_.codes_b)->required();
  correspond_->add_option("--mesh-a", cor_.mesh_a)->required();
  correspond_->add_option("--mesh-b", cor_.mesh_b)->required();
  correspond_->add_option("--samples", cor_.samples, "Surface samples per mesh")->capture_default_str();
  correspond_->add_option("--seed", cor_.seed)->capture_default_str();
  correspond_->add_option("--out", cor_.out)->required();

  interp_ = app.add_subcommand("interp", "Interpolate between two code sets");
  interp_->add_option("--model", int_.model)->required();
  interp_->add_option("--codes-a", int_.codes_a)->required();
  interp_->add_option("--codes-b", int_.codes_b)->required();
  interp_->add_option("--steps", int_.steps, "Number of t values in [0, 1]")->capture_default_str();
  interp_->add_option("--subset", int_.subset, "all | exp | id | detail")->capture_default_str();
  interp_->add_option("--resolution", int_.resolution, "Also extract meshes at this resolution");
  interp_->add_option("--out-dir", int_.out_dir)->required();

  edit_ = app.add_subcommand("edit", "Swap expression, identity or detail codes between scans");
  edit_->add_option("--model", edit_o_.model)->required();
  edit_->add_option("--target", edit_o_.target, "Codes to edit")->required();
  edit_->add_option("--source", edit_o_.source, "Codes to take the subset from")->required();
  edit_->add_option("--subset", edit_o_.subset, "exp | id | detail")->required();
  edit_->add_option("--out", edit_o_.out, "Edited codes JSON")->required();
  edit_->add_option("--mesh", edit_o_.mesh, "Also extract the edited mesh");
  edit_->add_option("--resolution", edit_o_.resolution)->capture_default_str();

  pca_ = app.add_subcommand("pca", "PCA over the learned embeddings");
  pca_->add_option("--model", pca_o_.model)->required();
  pca_->add_option("--embedding", pca_o_.embedding, "exp | id | detail")->check(CLI::IsMember({"exp", "id", "detail"}));
  pca_->add_option("--components", pca_o_.components, "0 keeps all")->capture_default_str();
  pca_->add_option("--out", pca_o_.out)->required();
}

int Commands::run() {
  if (preprocess_->parsed()) return preprocess();
  if (synth_->parsed()) return synth();
  if (train_->parsed()) return train();
  if (fit_->parsed()) return fit();
  if (reconstruct_->parsed()) return reconstruct();
  if (metrics_->parsed()) return metrics();
  if (correspond_->parsed()) return correspond();
  if (interp_->parsed()) return interp();
  if (edit_->parsed()) return edit();
  if (pca_->parsed()) return pca();
  throw UsageError("no subcommand", app_.help());
}

int Commands::preprocess() {
  const geom::TriangleMesh mesh = geom::read_obj(pre_.mesh);
  const std::vector<int> idx = geom::read_landmark_indices(pre_.landmarks);
  geom::LandmarkMatrix lmk(static_cast<Eigen::Index>(idx.size()), 3);
  for (std::size_t l = 0; l < idx.size(); ++l) {
    if (idx[l] < 0 || std::size_t(idx[l]) >= mesh.vertices.size())
      throw Error(ErrorKind::data, "landmark index " + std::to_string(idx[l]) + " is not a vertex of " + pre_.mesh);
    lmk.row(Eigen::Index(l)) = mesh.vertices[std::size_t(idx[l])].transpose();
  }
  geom::NormalizeOptions no;
  no.unit_to_mm = pre_.unit_to_mm;
  const auto norm = geom::preprocess_mesh(mesh, lmk, no);

  geom::ScanRecord rec;
  rec.identity = pre_.identity.empty() ? fs::path(pre_.mesh).stem().string() : pre_.identity;
  rec.expression = pre_.expression;
  rec.is_neutral = pre_.neutral;
  rec.landmarks = norm.landmarks;
  geom::SamplingOptions so;
  so.n_near = pre_.n_near;
  so.n_uniform = pre_.n_uniform;
  so.sigma_near_mm = pre_.sigma_mm;
  so.seed = pre_.seed;
  rec.triplets = geom::sample_training_points(norm.mesh, so);
  ensure_parent(pre_.out);
  geom::write_scan(pre_.out, rec);
  if (!pre_.aligned.empty()) {
    ensure_parent(pre_.aligned);
    geom::write_obj(pre_.aligned, norm.mesh);
  }

  write_snapshot(parent_or_cwd(pre_.out), "preprocess",
                 {{"mesh", pre_.mesh}, {"landmarks", pre_.landmarks}, {"out", pre_.out}, {"aligned", pre_.aligned},
                  {"identity", rec.identity}, {"expression", rec.expression}, {"neutral", rec.is_neutral},
                  {"n_near", so.n_near}, {"n_uniform", so.n_uniform}, {"sigma_mm", so.sigma_near_mm},
                  {"unit_to_mm", no.unit_to_mm}, {"seed", so.seed}});
  log_info("preprocess: " + std::to_string(norm.mesh.faces.size()) + " faces kept, " +
           std::to_string(rec.triplets.size()) + " samples -> " + pre_.out);
  return 0;
}

int Commands::synth() {
  synth::DatasetOptions o;
  o.identities = syn_.identities;
  o.expressions = syn_.expressions;
  o.seed = syn_.seed;
  o.synth.grid_res = syn_.grid_res;
  o.synth.wrinkles = !syn_.no_wrinkles;
  o.sampling.n_near = syn_.n_near;
  o.sampling.n_uniform = syn_.n_uniform;
  const auto scans = synth::generate_dataset(o);
  synth::write_dataset(syn_.out_dir, scans);
  write_snapshot(syn_.out_dir, "synth",
                 {{"identities", o.identities}, {"expressions", o.expressions}, {"grid_res", o.synth.grid_res},
                  {"wrinkles", o.synth.wrinkles}, {"n_near", o.sampling.n_near},
                  {"n_uniform", o.sampling.n_uniform}, {"seed", o.seed}, {"out_dir", syn_.out_dir}});
  log_info("synth: " + std::to_string(scans.size()) + " scans -> " + syn_.out_dir);
  return 0;
}

int Commands::train() {
  json cfg;
  train::to_json(cfg, train::TrainConfig{});
  const json defaults = cfg;
  if (!tr_.config.empty()) {
    if (!fs::exists(tr_.config)) throw Error(ErrorKind::config, "config file " + tr_.config + " does not exist");
    json file;
    try {
      file = train::read_json(tr_.config);
    } catch (const Error& e) {
      throw Error(ErrorKind::config, std::string("cannot load ") + tr_.config + ": " + e.what());
    }
    cfg.merge_patch(file);
  }
  for (const std::string& extra : train_->remaining()) {
    const auto eq = extra.find('=');
    if (extra.rfind("--", 0) != 0 || eq == std::string::npos)
      throw UsageError("unexpected argument '" + extra + "' (overrides look like --weights.sdf=3000)", train_->help());
    const std::string k = extra.substr(2, eq - 2);
    if (!known_key(defaults, k)) throw UsageError("unknown config key '" + k + "'", train_->help());
    train::apply_override(cfg, k, extra.substr(eq + 1));
  }
  cfg["seed"] = tr_.seed;
  if (train_->count("--stage")) cfg["stages"] = tr_.stage;
  if (tr_.epochs) cfg["epochs"] = *tr_.epochs;
  if (tr_.checkpoint_every) cfg["checkpoint_every"] = *tr_.checkpoint_every;

  std::optional<model::ImFaceModel> init;
  if (!tr_.init.empty()) {
    init = load_model_dir(tr_.init);
    json m;
    model::to_json(m, init->config);
    cfg["model"] = m;  // the architecture comes from the model being continued
  }
  train::TrainConfig config;
  train::from_json(cfg, config);
  config.validate();
  if (config.stages == train::Stages::stage2 && !init && tr_.resume.empty())
    throw Error(ErrorKind::config, "--stage stage2 needs --init with a stage-1 model (or --resume)");

  const auto records = train::load_scan_dir(tr_.data);
  if (records.empty()) throw Error(ErrorKind::data, "no .imfscan records in " + tr_.data);
  train::Trainer trainer(config, train::build_training_set(records, config.model.unit_mm));
  if (init) {
    trainer.load_model_state(*init);
    trainer.load_embeddings(read_embeddings(tr_.init));
  }
  if (!tr_.resume.empty()) trainer.load_checkpoint(tr_.resume);

  const fs::path out = tr_.out_dir;
  fs::create_directories(out);
  json resolved;
  train::to_json(resolved, config);
  write_snapshot(out, "train",
                 {{"config", resolved}, {"data", tr_.data}, {"scans", train::scan_names(tr_.data)},
                  {"init", tr_.init}, {"resume", tr_.resume}});
  trainer.set_log(out / "train_log.csv");
  trainer.set_checkpoint_dir(out / "checkpoints");
  log_info("train: " + std::to_string(records.size()) + " scans, " + std::to_string(trainer.steps_per_epoch()) +
           " steps per epoch, " + std::to_string(worker_count()) + " workers");
  trainer.run(tr_.max_steps.value_or(std::numeric_limits<std::size_t>::max()));
  trainer.save_checkpoint(out / "checkpoints" / "latest");
  trainer.save_outputs(out / "model");

  json epochs = json::array();
  for (const auto& e : trainer.epochs()) epochs.push_back({{"epoch", e.epoch}, {"stage2", e.stage2}, {"loss", e.loss}});
  write_json_file(out / "train_summary.json", {{"done", trainer.done()}, {"epochs", epochs}});
  log_info(std::string("train: ") + (trainer.done() ? "finished" : "paused") + ", model in " + (out / "model").string());
  return 0;
}

int Commands::fit() {
  const auto m = load_model_dir(fit_o_.model);
  const auto scan = train::scan_samples(geom::read_scan(fit_o_.scan), m.config.unit_mm);
  const model::LatentCodes init =
      fit_o_.init == "zero" ? model::zero_codes(m.config) : mean_codes(read_embeddings(fit_o_.model), m.config);
  train::FitConfig fc;
  fc.steps = fit_o_.steps;
  fc.points = fit_o_.points;
  fc.lr = fit_o_.lr;
  fc.use_detail = !fit_o_.no_detail;
  fc.seed = fit_o_.seed;
  const auto r = train::fit_latents(m, scan, init, fc);
  write_codes(fit_o_.out, r.codes,
              {{"loss_initial", r.losses.front()}, {"loss_final", r.losses.back()}, {"restarted", r.restarted}});
  write_snapshot(parent_or_cwd(fit_o_.out), "fit",
                 {{"model", fit_o_.model}, {"scan", fit_o_.scan}, {"out", fit_o_.out}, {"seed", fc.seed},
                  {"steps", fc.steps}, {"points", fc.points}, {"lr", fc.lr}, {"use_detail", fc.use_detail},
                  {"init", fit_o_.init}});
  log_info("fit: loss " + std::to_string(r.losses.front()) + " -> " + std::to_string(r.losses.back()));
  return 0;
}

int Commands::reconstruct() {
  const auto m = load_model_dir(rec_.checkpoint);
  model::LatentCodes codes;
  if (!rec_.codes.empty()) codes = read_codes(rec_.codes, m.config);
  else if (!rec_.scan_key.empty()) codes = scan_codes(read_embeddings(rec_.checkpoint), rec_.scan_key);
  else throw UsageError("reconstruct needs --codes or --scan-key", reconstruct_->help());
  const auto mesh = recon::reconstruct(m, codes, rec_.resolution, !rec_.base_only);
  ensure_parent(rec_.out);
  geom::write_obj(rec_.out, mesh);
  write_snapshot(parent_or_cwd(rec_.out), "reconstruct",
                 {{"checkpoint", rec_.checkpoint}, {"codes", rec_.codes}, {"scan_key", rec_.scan_key},
                  {"resolution", rec_.resolution}, {"full", !rec_.base_only}, {"out", rec_.out}});
  log_info("reconstruct: " + std::to_string(mesh.vertices.size()) + " vertices, " +
           std::to_string(mesh.faces.size()) + " faces -> " + rec_.out);
  return 0;
}

int Commands::metrics() {
  const auto pred = geom::read_obj(met_.pred);
  const auto gt = geom::read_obj(met_.gt);
  recon::EvalOptions o;
  o.samples = met_.samples;
  o.tau_mm = met_.tau_mm;
  o.abs_normals = met_.abs_normals;
  o.crop = !met_.no_crop;
  o.seed = met_.seed;
  recon::MetricReport r = recon::evaluate_meshes(pred, gt, o);

  const int extra = !met_.model.empty() + !met_.codes.empty() + !met_.correspondences.empty();
  if (extra != 0 && extra != 3)
    throw UsageError("EDE/TDE need --model, --codes and --correspondences together", metrics_->help());
  if (extra == 3) {
    const auto m = load_model_dir(met_.model);
    const auto codes = read_codes(met_.codes, m.config);
    std::vector<geom::Vec3> pts, neutral, templ;
    for (const auto& row : synth::read_correspondences(met_.correspondences)) {
      pts.push_back(row.point);
      neutral.push_back(row.neutral);
      templ.push_back(row.template_point);
    }
    const auto e = recon::ede_tde(m, codes, pts, neutral, templ);
    r.ede_mm = e.ede_mm;
    r.tde_mm = e.tde_mm;
  }
  if (!met_.distances.empty()) ensure_parent(met_.distances);
  if (!met_.distances.empty()) recon::write_scalar_sidecar(met_.distances, recon::vertex_distances(pred, gt));

  const json j = r;
  if (!met_.out.empty()) {
    write_json_file(met_.out, j);
    write_snapshot(parent_or_cwd(met_.out), "metrics",
                   {{"pred", met_.pred}, {"gt", met_.gt}, {"tau_mm", o.tau_mm}, {"samples", o.samples},
                    {"seed", o.seed}, {"abs_normals", o.abs_normals}, {"crop", o.crop}, {"model", met_.model},
                    {"codes", met_.codes}, {"correspondences", met_.correspondences}});
  }
  std::printf("%-22s %12s\n", "metric", "value");
  std::printf("%-22s %12.4f\n", "chamfer_mm", r.chamfer_mm);
  std::printf("%-22s %12.2f\n", ("fscore@" + std::to_string(r.tau_mm).substr(0, 4) + "mm").c_str(), r.fscore_pct);
  std::printf("%-22s %12.4f\n", "normal_consistency", r.normal_consistency);
  if (r.ede_mm) std::printf("%-22s %12.4f\n", "ede_mm", *r.ede_mm);
  if (r.tde_mm) std::printf("%-22s %12.4f\n", "tde_mm", *r.tde_mm);
  std::printf("%s\n", j.dump().c_str());
  return 0;
}

int Commands::correspond() {
  const auto m = load_model_dir(cor_.model);
  const auto a = read_codes(cor_.codes_a, m.config), b = read_codes(cor_.codes_b, m.config);
  const auto pa = geom::sample_surface(geom::read_obj(cor_.mesh_a), cor_.samples, mix_seed(cor_.seed, 0));
  const auto pb = geom::sample_surface(geom::read_obj(cor_.mesh_b), cor_.samples, mix_seed(cor_.seed, 1));
  const auto pairs = recon::correspondence_map(m, a, pa, b, pb);
  json rows = json::array();
  double mean = 0.0;
  for (const auto& p : pairs) {
    rows.push_back({{"source", point_json(p.source)}, {"target", point_json(p.target)},
                    {"anchor", point_json(p.anchor)}, {"target_index", p.target_index}, {"distance", p.distance}});
    mean += p.distance;
  }
  if (!pairs.empty()) mean /= double(pairs.size());
  write_json_file(cor_.out, {{"pairs", rows}, {"mean_template_distance_mm", mean}});
  write_snapshot(parent_or_cwd(cor_.out), "correspond",
                 {{"model", cor_.model}, {"codes_a", cor_.codes_a}, {"codes_b", cor_.codes_b}, {"mesh_a", cor_.mesh_a},
                  {"mesh_b", cor_.mesh_b}, {"samples", cor_.samples}, {"seed", cor_.seed}, {"out", cor_.out}});
  log_info("correspond: " + std::to_string(pairs.size()) + " pairs -> " + cor_.out);
  return 0;
}

int Commands::interp() {
  const auto m = load_model_dir(int_.model);
  const auto a = read_codes(int_.codes_a, m.config), b = read_codes(int_.codes_b, m.config);
  const auto subset = recon::parse_subset(int_.subset);
  if (int_.steps < 2) throw Error(ErrorKind::config, "interp needs at least 2 steps");
  const fs::path out = int_.out_dir;
  json items = json::array();
  for (std::size_t i = 0; i < int_.steps; ++i) {
    const double t = double(i) / double(int_.steps - 1);
    const auto codes = recon::interpolate_codes(a, b, t, subset);
    char stem[32];
    std::snprintf(stem, sizeof stem, "step_%03zu", i);
    write_codes(out / (std::string(stem) + ".json"), codes, {{"t", t}});
    json item = {{"t", t}, {"codes", std::string(stem) + ".json"}};
    if (int_.resolution > 0) {
      const auto mesh = recon::reconstruct(m, codes, int_.resolution, true);
      geom::write_obj(out / (std::string(stem) + ".obj"), mesh);
      item["mesh"] = std::string(stem) + ".obj";
      item["faces"] = mesh.faces.size();
    }
    items.push_back(item);
  }
  write_json_file(out / "interp.json", {{"subset", int_.subset}, {"steps", items}});
  write_snapshot(out, "interp",
                 {{"model", int_.model}, {"codes_a", int_.codes_a}, {"codes_b", int_.codes_b}, {"steps", int_.steps},
                  {"subset", int_.subset}, {"resolution", int_.resolution}});
  log_info("interp: " + std::to_string(int_.steps) + " steps -> " + int_.out_dir);
  return 0;
}

int Commands::edit() {
  const auto m = load_model_dir(edit_o_.model);
  const auto subset = recon::parse_subset(edit_o_.subset);
  if (subset == recon::CodeSubset::all) throw Error(ErrorKind::config, "edit swaps exp, id or detail, not all");
  const auto target = read_codes(edit_o_.target, m.config), source = read_codes(edit_o_.source, m.config);
  const auto edited = recon::swap_codes(target, source, subset);
  write_codes(edit_o_.out, edited, {{"subset", edit_o_.subset}});
  if (!edit_o_.mesh.empty()) ensure_parent(edit_o_.mesh);
  if (!edit_o_.mesh.empty()) geom::write_obj(edit_o_.mesh, recon::reconstruct(m, edited, edit_o_.resolution, true));
  write_snapshot(parent_or_cwd(edit_o_.out), "edit",
                 {{"model", edit_o_.model}, {"target", edit_o_.target}, {"source", edit_o_.source},
                  {"subset", edit_o_.subset}, {"out", edit_o_.out}, {"mesh", edit_o_.mesh},
                  {"resolution", edit_o_.resolution}});
  return 0;
}

int Commands::pca() {
  const auto emb = read_embeddings(pca_o_.model);
  const std::string prefix = "emb." + pca_o_.embedding + ".";
  std::vector<std::string> keys;
  std::vector<const diff::Tensor*> rows;
  for (const auto& [name, t] : emb)
    if (name.rfind(prefix, 0) == 0) {
      keys.push_back(name.substr(prefix.size()));
      rows.push_back(&t);
    }
  if (rows.empty()) throw Error(ErrorKind::data, "no '" + pca_o_.embedding + "' embeddings in " + pca_o_.model);
  Eigen::MatrixXd data(Eigen::Index(rows.size()), Eigen::Index(rows.front()->size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r]->size() != std::size_t(data.cols())) throw Error(ErrorKind::dimension, "embedding widths differ");
    for (Eigen::Index c = 0; c < data.cols(); ++c) data(Eigen::Index(r), c) = rows[r]->values()[std::size_t(c)];
  }
  const auto p = recon::pca_embeddings(data, pca_o_.components);
  const Eigen::MatrixXd proj = p.project(data);
  auto vec = [](const auto& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  json components = json::array(), projections = json::object();
  for (Eigen::Index c = 0; c < p.components.rows(); ++c) components.push_back(vec(Eigen::RowVectorXd(p.components.row(c))));
  for (std::size_t r = 0; r < keys.size(); ++r) projections[keys[r]] = vec(Eigen::RowVectorXd(proj.row(Eigen::Index(r))));
  write_json_file(pca_o_.out, {{"embedding", pca_o_.embedding},
                               {"mean", vec(Eigen::RowVectorXd(p.mean))},
                               {"components", components},
                               {"singular_values", vec(Eigen::VectorXd(p.singular_values))},
                               {"explained_variance", vec(Eigen::VectorXd(p.explained_variance))},
                               {"projections", projections}});
  write_snapshot(parent_or_cwd(pca_o_.out), "pca",
                 {{"model", pca_o_.model}, {"embedding", pca_o_.embedding}, {"components", pca_o_.components},
                  {"out", pca_o_.out}});
  return 0;
}

}  // namespace imface::cli
