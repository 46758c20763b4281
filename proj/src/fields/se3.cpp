#include "imface/fields/se3.hpp"

#include "imface/error.hpp"

#include <cmath>
#include <numbers>

namespace imface::fields {

using diff::Tensor;
using diff::Var;

namespace {

// (t - sin t) / t^3 = sum_k (-1)^k t^(2k) / (2k + 3)!; nine terms reach
// double precision for t < 1, where the direct form cancels badly.
constexpr int kSeriesTerms = 9;

double series_coefficient(int k) {
  double f = 1.0;
  for (int i = 2; i <= 2 * k + 3; ++i) f *= i;
  return ((k % 2) ? -1.0 : 1.0) / f;
}

double c_series(double s) {
  double acc = series_coefficient(kSeriesTerms - 1);
  for (int k = kSeriesTerms - 2; k >= 0; --k) acc = acc * s + series_coefficient(k);
  return acc;
}

}  // namespace

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0.0, -w.z(), w.y(),  //
      w.z(), 0.0, -w.x(),   //
      -w.y(), w.x(), 0.0;
  return m;
}

ExpCoefficients exp_coefficients(double theta) {
  theta = std::fabs(theta);
  const double s = theta * theta;
  if (theta < kSmallAngle) return {1.0 - s / 6.0, 0.5 - s / 24.0, 1.0 / 6.0 - s / 120.0};
  const double half = std::sin(0.5 * theta);
  const double a = std::sin(theta) / theta;
  const double b = 2.0 * half * half / s;
  const double c = theta < 1.0 ? c_series(s) : (theta - std::sin(theta)) / (theta * s);
  return {a, b, c};
}

RigidMotion se3_exp(const SE3Param& param) {
  if (!param.omega.allFinite() || !param.v.allFinite()) throw Error(ErrorKind::numeric, "se3_exp: non-finite twist");
  const ExpCoefficients k = exp_coefficients(param.omega.norm());
  const Eigen::Matrix3d w = skew(param.omega);
  const Eigen::Matrix3d w2 = w * w;
  const Eigen::Matrix3d id = Eigen::Matrix3d::Identity();
  return {id + k.a * w + k.b * w2, (id + k.b * w + k.c * w2) * param.v};
}

SE3Param SE3Param::wrapped() const {
  const double theta = omega.norm();
  if (theta <= std::numbers::pi) return *this;
  const double two_pi = 2.0 * std::numbers::pi;
  const double reduced = theta - two_pi * std::round(theta / two_pi);
  SE3Param out;
  out.omega = omega * (reduced / theta);
  // keep the translation of the rigid motion, not the twist's v
  const Eigen::Vector3d t = se3_exp(*this).translation;
  const ExpCoefficients k = exp_coefficients(out.omega.norm());
  const Eigen::Matrix3d w = skew(out.omega);
  const Eigen::Matrix3d v_mat = Eigen::Matrix3d::Identity() + k.b * w + k.c * w * w;
  out.v = v_mat.partialPivLu().solve(t);
  return out;
}

Eigen::Vector3d apply_deformation(const Eigen::Vector3d& p, const SE3Param& param) {
  const RigidMotion m = se3_exp(param);
  return m.rotation * p + m.translation;
}

namespace {

Var polynomial(const Var& s, std::initializer_list<double> coeffs_high_to_low) {
  Var acc;
  for (double c : coeffs_high_to_low) {
    acc = acc.defined() ? diff::add_scalar(diff::mul(acc, s), c) : diff::constant(Tensor(s.rows(), 1, c));
  }
  return acc;
}

}  // namespace

Var se3_apply(const Var& p, const Var& xi) {
  if (p.cols() != 3 || xi.cols() != 6) throw Error(ErrorKind::dimension, "se3_apply expects n x 3 points and n x 6 twists");
  const Var omega = diff::slice_cols(xi, 0, 3);
  const Var v = diff::slice_cols(xi, 3, 6);
  const Var s = diff::sum_cols(diff::square(omega));  // theta^2
  const std::size_t n = s.rows();

  Tensor small(n, 1), mid(n, 1), large(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double theta = std::sqrt(s.value()[i]);
    small[i] = theta < kSmallAngle;
    mid[i] = theta >= kSmallAngle && theta < 1.0;
    large[i] = theta >= 1.0;
  }
  const Var ones = diff::constant(Tensor(n, 1, 1.0));
  const Var zeros = diff::constant(Tensor(n, 1, 0.0));

  // The unused branch of each where() sees a harmless substitute argument so
  // that neither it nor its derivatives produce inf/NaN.
  const Var s_exact = diff::where(small, ones, s);
  const Var theta = diff::sqrt(s_exact);
  const Var a_exact = diff::div(diff::sin(theta), theta);
  const Var half_sin = diff::sin(theta, 0.5);
  const Var b_exact = diff::div(diff::scale(diff::square(half_sin), 2.0), s_exact);

  const Var s_small = diff::where(small, s, zeros);
  const Var a = diff::where(small, polynomial(s_small, {-1.0 / 6.0, 1.0}), a_exact);
  const Var b = diff::where(small, polynomial(s_small, {-1.0 / 24.0, 0.5}), b_exact);

  std::vector<double> series;
  for (int k = kSeriesTerms - 1; k >= 0; --k) series.push_back(series_coefficient(k));
  const Var s_mid = diff::where(mid, s, zeros);
  Var c_mid;
  for (double coef : series) {
    c_mid = c_mid.defined() ? diff::add_scalar(diff::mul(c_mid, s_mid), coef) : diff::constant(Tensor(n, 1, coef));
  }
  const Var s_large = diff::where(large, s, ones);
  const Var theta_large = diff::sqrt(s_large);
  const Var c_large = diff::div(diff::sub(theta_large, diff::sin(theta_large)), diff::mul(theta_large, s_large));
  const Var c = diff::where(small, polynomial(s_small, {-1.0 / 120.0, 1.0 / 6.0}), diff::where(mid, c_mid, c_large));

  const Var wp = diff::cross_rows(omega, p);
  const Var wwp = diff::cross_rows(omega, wp);
  const Var wv = diff::cross_rows(omega, v);
  const Var wwv = diff::cross_rows(omega, wv);
  const Var rotated = diff::add(diff::add(p, diff::mul(a, wp)), diff::mul(b, wwp));
  const Var translation = diff::add(diff::add(v, diff::mul(b, wv)), diff::mul(c, wwv));
  return diff::add(rotated, translation);
}

}  // namespace imface::fields
