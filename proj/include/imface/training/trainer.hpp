#pragma once

#include "imface/diffcore/adam.hpp"
#include "imface/training/dataset.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace imface::train {

enum class Stages { stage1, stage2, both };

struct TrainConfig {
  std::size_t epochs = 300;
  std::size_t batch_scans = 4;
  std::size_t points_per_scan = 512;
  std::size_t dense_points = 512;  // consistency points per batch, split over its scans
  double lr = 1e-4;
  double embedding_lr_scale = 1.0;  // embedding group lr = lr * scale
  double detail_lr_scale = 1.0;     // DetailNet + z_detail group
  double t_m = 0.7;                 // stage-2 start, fraction of the epochs (stages = both)
  bool literal_kappa = false;       // kappa weights L_f (as written) instead of L_f^
  double embedding_init_std = 0.01;
  std::uint64_t seed = 0;
  Stages stages = Stages::both;
  std::size_t checkpoint_every = 0;  // epochs; 0 = only at the end
  losses::LossWeights weights;
  model::ModelConfig model;

  void validate() const;
  std::size_t stage1_epochs() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Missing keys keep defaults; unknown keys raise Error(config).
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Sets a dotted key such as "weights.sdf" from command-line text. The text is
/// read as JSON when it parses and as a string otherwise.
void apply_override(nlohmann::json& config, const std::string& key, const std::string& value);

/// Per-scan z_exp and z_detail, per-identity z_id.
struct EmbeddingTable {
  std::vector<std::string> scan_keys;  // "identity/expression"
  std::vector<std::size_t> identity_of;
  std::vector<diff::Var> exp, id, detail;

  model::LatentCodes codes(std::size_t scan) const;
  /// Mean over scans (z_id averaged per scan, so identities weigh by scan count).
  model::LatentCodes mean_codes() const;
  diff::NamedTensors state() const;
  void load_state(const diff::NamedTensors& tensors);
};

EmbeddingTable make_embeddings(const TrainingSet& set, const model::ModelConfig& c, double init_std, std::uint64_t seed);

/// Per-epoch mean of the optimized objective.
struct EpochRecord {
  std::size_t epoch = 0;
  bool stage2 = false;
  double loss = 0.0;
};

struct StepRecord {
  std::size_t epoch = 0, step = 0;
  bool stage2 = false;
  double kappa = 1.0;
  double lr = 0.0;
  double total = 0.0;
  nlohmann::json terms;
};

class Trainer {
 public:
  Trainer(TrainConfig config, TrainingSet data);

  /// Runs until every epoch is done or `max_steps` further steps were taken.
  void run(std::size_t max_steps = std::numeric_limits<std::size_t>::max());
  StepRecord step();
  bool done() const { return epoch_ >= config_.epochs; }

  std::size_t steps_per_epoch() const;
  /// Global progress t in [0, 1] at the current position.
  double progress() const;
  bool stage2_now() const;

  /// CSV step log; appended when the file exists (resume).
  void set_log(const std::filesystem::path& csv);
  /// Where periodic checkpoints and the last good state on a NaN go.
  void set_checkpoint_dir(const std::filesystem::path& dir) { checkpoint_dir_ = dir; }

  void save_checkpoint(const std::filesystem::path& dir) const;
  /// Restores a checkpoint written with a matching config; the model manifest
  /// is compared field by field.
  void load_checkpoint(const std::filesystem::path& dir);
  /// Model files plus embeddings.bin.
  void save_outputs(const std::filesystem::path& dir) const;
  /// Starts from a trained model (typically before a stage2-only run).
  void load_model_state(const model::ImFaceModel& m);
  void load_embeddings(const diff::NamedTensors& tensors) { emb_.load_state(tensors); }

  /// FNV-1a over every value stage 2 must leave untouched.
  std::uint64_t frozen_hash() const;

  const TrainConfig& config() const { return config_; }
  const TrainingSet& data() const { return data_; }
  const model::ImFaceModel& model() const { return model_; }
  model::ImFaceModel& model() { return model_; }
  const EmbeddingTable& embeddings() const { return emb_; }
  EmbeddingTable& embeddings() { return emb_; }
  const diff::Adam& optimizer() const { return opt_; }
  const std::vector<EpochRecord>& epochs() const { return epoch_log_; }
  std::size_t epoch() const { return epoch_; }
  std::size_t step_in_epoch() const { return step_; }

  /// The objective of the batch scheduled at (epoch, step), without stepping.
  /// stage 0 follows the schedule; 1 or 2 forces that stage's objective.
  StepRecord evaluate_batch(std::size_t epoch, std::size_t step, int stage = 0);

 private:
  struct Batch {
    std::vector<std::size_t> scans;
    std::vector<losses::ScanBatch> targets;
  };
  Batch make_batch(std::size_t epoch, std::size_t step) const;
  losses::LossWeights scan_weights(std::size_t batch_size) const;
  double kappa_at(double t) const;

  struct Objective {
    diff::Var total;
    nlohmann::json terms;
    double kappa = 1.0;
    bool stage2 = false;
  };
  Objective objective(const Batch& b, double t, bool stage2) const;

  TrainConfig config_;
  TrainingSet data_;
  model::ImFaceModel model_;
  EmbeddingTable emb_;
  diff::Adam opt_;
  std::size_t group_net_ = 0, group_emb_ = 0, group_detail_ = 0;
  std::vector<std::size_t> slot_exp_, slot_id_, slot_detail_code_;
  std::size_t n_base_ = 0, n_detail_ = 0, slot_detail_begin_ = 0;
  std::size_t epoch_ = 0, step_ = 0;
  double epoch_sum_ = 0.0;
  std::vector<EpochRecord> epoch_log_;
  std::optional<std::filesystem::path> log_path_;
  std::optional<std::filesystem::path> checkpoint_dir_;
};

inline constexpr int kCheckpointFormat = 1;

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// Errors naming the first model field that differs.
void check_model_manifest(const nlohmann::json& saved, const model::ModelConfig& expected);

std::uint64_t hash_values(const std::vector<diff::Var>& vars);

}  // namespace imface::train
