#pragma once

#include <CLI11.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace imface::cli {

/// Bad command-line input found after parsing (exit code 2).
struct UsageError : std::runtime_error {
  UsageError(const std::string& what, std::string help_text) : std::runtime_error(what), help(std::move(help_text)) {}
  std::string help;
};

class Commands {
 public:
  explicit Commands(CLI::App& app);
  int run();

 private:
  int preprocess();
  int synth();
  int train();
  int fit();
  int reconstruct();
  int metrics();
  int correspond();
  int interp();
  int edit();
  int pca();

  CLI::App& app_;
  CLI::App *preprocess_, *synth_, *train_, *fit_, *reconstruct_, *metrics_, *correspond_, *interp_, *edit_, *pca_;

  struct {
    std::string mesh, landmarks, out, aligned, identity, expression = "neutral";
    bool neutral = false;
    std::size_t n_near = 4000, n_uniform = 4000;
    double sigma_mm = 10.0, unit_to_mm = 1.0;
    std::uint64_t seed = 0;
  } pre_;

  struct {
    std::size_t identities = 20, expressions = 4, grid_res = 160, n_near = 4000, n_uniform = 4000;
    std::uint64_t seed = 0;
    std::string out_dir;
    bool no_wrinkles = false;
  } syn_;

  struct {
    std::string data, out_dir, config, stage = "both", init, resume;
    std::uint64_t seed = 0;
    std::optional<std::size_t> epochs, checkpoint_every, max_steps;
  } tr_;

  struct {
    std::string model, scan, out, init = "mean";
    std::uint64_t seed = 0;
    std::size_t steps = 400, points = 1024;
    double lr = 1e-3;
    bool no_detail = false;
  } fit_o_;

  struct {
    std::string checkpoint, codes, scan_key, out;
    std::size_t resolution = 64;
    bool base_only = false;
  } rec_;

  struct {
    std::string pred, gt, out, distances, model, codes, correspondences;
    double tau_mm = 1.0;
    std::size_t samples = 50000;
    std::uint64_t seed = 0;
    bool abs_normals = false, no_crop = false;
  } met_;

  struct {
    std::string model, codes_a, codes_b, mesh_a, mesh_b, out;
    std::size_t samples = 2000;
    std::uint64_t seed = 0;
  } cor_;

  struct {
    std::string model, codes_a, codes_b, subset = "all", out_dir;
    std::size_t steps = 5, resolution = 0;
  } int_;

  struct {
    std::string model, target, source, subset, out, mesh;
    std::size_t resolution = 64;
  } edit_o_;

  struct {
    std::string model, embedding = "exp", out;
    std::size_t components = 0;
  } pca_o_;
};

}  // namespace imface::cli
