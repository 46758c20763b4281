#pragma once

#include "imface/model/model.hpp"

#include <random>

namespace imface::testing {

inline model::ModelConfig tiny_model_config() {
  model::ModelConfig c;
  c.latent_exp = c.latent_id = c.latent_detail = 4;
  c.width = 16;
  c.detail_width = 16;
  c.depth = 2;
  c.fusion_width = 8;
  c.hyper_hidden = 8;
  c.landmark_hidden = 16;
  return c;
}

inline diff::Tensor canonical_model_landmarks() {
  return diff::Tensor::from_rows(
      {{-0.35, 0.25, 0.20}, {0.35, 0.25, 0.20}, {0.0, 0.0, 0.40}, {-0.20, -0.30, 0.22}, {0.20, -0.30, 0.22}});
}

inline model::ImFaceModel tiny_model(std::uint64_t seed = 1) {
  const auto l = canonical_model_landmarks();
  return model::make_model(tiny_model_config(), l, l, l, seed);
}

inline model::LatentCodes random_codes(const model::ModelConfig& c, std::uint64_t seed, double scale = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  auto row = [&](std::size_t d) {
    diff::Tensor t(1, d);
    for (auto& v : t.values()) v = g(rng);
    return diff::constant(t);
  };
  return {row(c.latent_exp), row(c.latent_id), row(c.latent_detail)};
}

// Gives DetailNet a non-trivial output head so detail terms are exercised.
inline void randomize_detail_head(model::ImFaceModel& m, std::uint64_t seed, double scale = 0.05) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& h : m.detail_hyper) {
    auto& last = h.generators.back();
    for (auto& v : last[1].weight.mutable_value().values()) v = u(rng);
    for (auto& v : last[1].bias.mutable_value().values()) v = u(rng);
  }
}

inline diff::Tensor random_queries(std::size_t n, std::uint64_t seed, double radius = 0.8) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-radius, radius);
  diff::Tensor t(n, 3);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

}  // namespace imface::testing

#include "imface/losses/losses.hpp"

namespace imface::testing {

// Makes the residual column and the detail head non-zero so every term has
// a non-trivial gradient (|x| has no derivative at the zero init).
inline void activate_zero_heads(model::ImFaceModel& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (auto& h : m.id_hyper) {
    auto& last = h.generators.back();
    const std::size_t fan_out = h.target.widths.back();
    auto& b2 = last[1].bias.mutable_value();
    auto& w2 = last[1].weight.mutable_value();
    for (std::size_t c = 6; c < b2.size(); c += fan_out) {
      b2[c] = u(rng);
      for (std::size_t r = 0; r < w2.rows(); ++r) w2(r, c) = u(rng);
    }
  }
  randomize_detail_head(m, seed + 1, 0.1);
}

inline losses::ScanBatch synthetic_batch(std::size_t n, std::size_t m_dense, std::uint64_t seed, bool neutral = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  std::normal_distribution<double> g(0.0, 0.02);
  losses::ScanBatch b;
  b.points = diff::Tensor(n, 3);
  b.sdf = diff::Tensor(n, 1);
  b.normals = diff::Tensor(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) b.points(i, j) = u(rng);
    b.sdf[i] = b.points(i, 2) - 0.3;  // plane z = 0.3
    b.normals(i, 2) = 1.0;
  }
  b.landmarks = canonical_model_landmarks();
  b.neutral_landmarks = canonical_model_landmarks();
  for (auto& v : b.landmarks.values()) v += g(rng);
  for (auto& v : b.neutral_landmarks.values()) v += g(rng);
  b.dense = diff::Tensor(m_dense, 3);
  b.dense_neutral = diff::Tensor(m_dense, 3);
  b.dense_template = diff::Tensor(m_dense, 3);
  for (std::size_t i = 0; i < m_dense; ++i) {
    for (int j = 0; j < 2; ++j) b.dense(i, j) = u(rng);
    b.dense(i, 2) = 0.3;
    for (int j = 0; j < 3; ++j) {
      b.dense_neutral(i, j) = b.dense(i, j) + g(rng);
      b.dense_template(i, j) = b.dense(i, j) + g(rng);
    }
  }
  b.is_neutral = neutral;
  return b;
}

}  // namespace imface::testing
