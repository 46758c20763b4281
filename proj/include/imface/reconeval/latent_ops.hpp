#pragma once

#include "imface/model/model.hpp"
#include "imface/reconeval/marching_cubes.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace imface::recon {

/// Surface field of a model in millimetres. `full` selects f over f^; the
/// detail correction is skipped outside a 6 sigma band of the base surface.
BatchField model_field(const model::ImFaceModel& m, const model::LatentCodes& codes, bool full = true);

/// Runs marching cubes on the model's zero level set.
geom::TriangleMesh reconstruct(const model::ImFaceModel& m, const model::LatentCodes& codes, std::size_t resolution,
                               bool full = true);

enum class CodeSubset { all, exp, id, detail };
CodeSubset parse_subset(const std::string& name);  // "all" | "exp" | "id" | "detail"

/// (1 - t) a + t b on the chosen embeddings; the others keep a's values.
model::LatentCodes interpolate_codes(const model::LatentCodes& a, const model::LatentCodes& b, double t,
                                     CodeSubset subset = CodeSubset::all);
/// Expression editing and detail transfer: target with source's chosen codes.
inline model::LatentCodes swap_codes(const model::LatentCodes& target, const model::LatentCodes& source,
                                     CodeSubset subset) {
  return interpolate_codes(target, source, 1.0, subset);
}

struct CorrespondencePair {
  Vec3 source;  // point of scan A (mm)
  Vec3 target;  // matched point of scan B (mm)
  Vec3 anchor;  // A's template-space point p'' (mm)
  int target_index = -1;
  double distance = 0.0;  // template-space match distance (mm)
};

/// Maps both point sets into the template space and matches every A anchor
/// to its nearest B anchor.
std::vector<CorrespondencePair> correspondence_map(const model::ImFaceModel& m, const model::LatentCodes& codes_a,
                                                   const std::vector<Vec3>& points_a,
                                                   const model::LatentCodes& codes_b,
                                                   const std::vector<Vec3>& points_b);

struct DeformationError {
  double ede_mm = 0.0;  // mean |E(p) - neutral ground truth|
  double tde_mm = 0.0;  // mean |I(E(p)) - template ground truth|
};

/// Points and both ground truths in millimetres, row aligned.
DeformationError ede_tde(const model::ImFaceModel& m, const model::LatentCodes& codes, const std::vector<Vec3>& points,
                         const std::vector<Vec3>& gt_neutral, const std::vector<Vec3>& gt_template);

/// Mean |E(p) - p| in mm, the expression field's displacement.
double mean_expression_displacement(const model::ImFaceModel& m, const model::LatentCodes& codes,
                                    const std::vector<Vec3>& points);

struct GradientNorms {
  std::vector<double> expression;  // |grad f^(p)|
  std::vector<double> identity;    // |grad T(I(p'))| at p' = E(p), residual excluded
};

/// Spatial gradient norms of the base field in both spaces (dimensionless).
GradientNorms gradient_norms(const model::ImFaceModel& m, const model::LatentCodes& codes,
                             const std::vector<Vec3>& points);

struct PCAResult {
  Eigen::RowVectorXd mean;
  Eigen::MatrixXd components;  // one orthonormal row per component
  Eigen::VectorXd singular_values;
  Eigen::VectorXd explained_variance;  // s^2 / (n - 1)

  Eigen::MatrixXd project(const Eigen::MatrixXd& rows) const;
  Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& coefficients) const;
};

/// Centered SVD of one embedding per row; 0 components means min(n, d).
/// Each component's largest-magnitude entry is made positive.
PCAResult pca_embeddings(const Eigen::MatrixXd& rows, std::size_t components = 0);

}  // namespace imface::recon
