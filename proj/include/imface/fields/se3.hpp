#pragma once

#include "imface/diffcore/var.hpp"

#include <Eigen/Dense>

namespace imface::fields {

/// Below this rotation angle the exponential map switches to Taylor
/// coefficients.
inline constexpr double kSmallAngle = 1e-4;

/// (w^) x = w cross x.
Eigen::Matrix3d skew(const Eigen::Vector3d& w);

/// Twist (omega, v): axis-angle rotation plus the screw translation parameter.
struct SE3Param {
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();

  /// Equivalent twist with |omega| <= pi describing the same rigid motion.
  SE3Param wrapped() const;
};

struct RigidMotion {
  Eigen::Matrix3d rotation;
  Eigen::Vector3d translation;
};

/// Coefficients of the exponential map at angle theta:
///   a = sin(t)/t, b = (1 - cos t)/t^2, c = (t - sin t)/t^3.
struct ExpCoefficients {
  double a, b, c;
};
ExpCoefficients exp_coefficients(double theta);

/// R = I + a w^ + b w^2,  t = (I + b w^ + c w^2) v.
RigidMotion se3_exp(const SE3Param& param);
Eigen::Vector3d apply_deformation(const Eigen::Vector3d& p, const SE3Param& param);

/// Differentiable batched form: p is n x 3, xi is n x 6 (or 1 x 6) holding
/// (omega, v) per row. Returns R p + t per row. Every branch of the
/// coefficient switch stays finite, so higher derivatives are well defined.
diff::Var se3_apply(const diff::Var& p, const diff::Var& xi);

}  // namespace imface::fields
