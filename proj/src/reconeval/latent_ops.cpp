#include "imface/reconeval/latent_ops.hpp"

#include "imface/error.hpp"
#include "imface/reconeval/kdtree.hpp"

#include <cmath>

namespace imface::recon {

using diff::Tensor;
using diff::Var;

namespace {

std::vector<double> flatten(const std::vector<Vec3>& points, double scale) {
  std::vector<double> xyz;
  xyz.reserve(points.size() * 3);
  for (const Vec3& p : points) xyz.insert(xyz.end(), {p.x() * scale, p.y() * scale, p.z() * scale});
  return xyz;
}

Vec3 point_at(const std::vector<double>& xyz, std::size_t n, double scale) {
  return scale * Vec3(xyz[3 * n], xyz[3 * n + 1], xyz[3 * n + 2]);
}

Var lerp(const Var& a, const Var& b, double t) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorKind::dimension, "interpolated embeddings differ in size");
  Tensor out(a.rows(), a.cols());
  const double* pa = a.value().data();
  const double* pb = b.value().data();
  for (std::size_t n = 0; n < out.size(); ++n) out.data()[n] = (1.0 - t) * pa[n] + t * pb[n];
  return diff::constant(std::move(out));
}

}  // namespace

BatchField model_field(const model::ImFaceModel& m, const model::LatentCodes& codes, bool full) {
  const double unit = m.config.unit_mm;
  const double band = 6.0 * m.config.sigma_att();
  return [&m, codes, full, unit, band](const std::vector<double>& xyz) {
    std::vector<double> scaled(xyz.size());
    for (std::size_t n = 0; n < xyz.size(); ++n) scaled[n] = xyz[n] / unit;
    std::vector<double> f = model::evaluate_sdf(m, codes, scaled, full, band);
    for (double& v : f) v *= unit;
    return f;
  };
}

geom::TriangleMesh reconstruct(const model::ImFaceModel& m, const model::LatentCodes& codes, std::size_t resolution,
                               bool full) {
  return extract_surface(model_field(m, codes, full), make_grid(resolution, m.config.unit_mm));
}

CodeSubset parse_subset(const std::string& name) {
  if (name == "all") return CodeSubset::all;
  if (name == "exp") return CodeSubset::exp;
  if (name == "id") return CodeSubset::id;
  if (name == "detail") return CodeSubset::detail;
  throw Error(ErrorKind::config, "unknown embedding subset '" + name + "' (all, exp, id, detail)");
}

model::LatentCodes interpolate_codes(const model::LatentCodes& a, const model::LatentCodes& b, double t,
                                     CodeSubset subset) {
  if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorKind::config, "interpolation weight must lie in [0, 1]");
  auto pick = [&](const Var& x, const Var& y, CodeSubset s) {
    Var mixed = lerp(x, y, t);  // size check applies to every component
    return subset == CodeSubset::all || subset == s ? mixed : diff::constant(x.value());
  };
  return {pick(a.exp, b.exp, CodeSubset::exp), pick(a.id, b.id, CodeSubset::id),
          pick(a.detail, b.detail, CodeSubset::detail)};
}

std::vector<CorrespondencePair> correspondence_map(const model::ImFaceModel& m, const model::LatentCodes& codes_a,
                                                   const std::vector<Vec3>& points_a,
                                                   const model::LatentCodes& codes_b,
                                                   const std::vector<Vec3>& points_b) {
  if (points_a.empty() || points_b.empty()) return {};
  const double unit = m.config.unit_mm;
  const auto ta = model::evaluate_template_points(m, codes_a, flatten(points_a, 1.0 / unit));
  const auto tb = model::evaluate_template_points(m, codes_b, flatten(points_b, 1.0 / unit));
  std::vector<Vec3> anchors_b(points_b.size());
  for (std::size_t n = 0; n < points_b.size(); ++n) anchors_b[n] = point_at(tb, n, unit);
  const KDTree tree(std::move(anchors_b));

  std::vector<CorrespondencePair> out(points_a.size());
  for (std::size_t n = 0; n < points_a.size(); ++n) {
    const Vec3 anchor = point_at(ta, n, unit);
    const Neighbor hit = tree.nearest(anchor);
    out[n] = {points_a[n], points_b[std::size_t(hit.index)], anchor, hit.index, std::sqrt(hit.squared_distance)};
  }
  return out;
}

DeformationError ede_tde(const model::ImFaceModel& m, const model::LatentCodes& codes, const std::vector<Vec3>& points,
                         const std::vector<Vec3>& gt_neutral, const std::vector<Vec3>& gt_template) {
  if (points.empty()) throw Error(ErrorKind::data, "EDE/TDE need at least one point");
  if (gt_neutral.size() != points.size() || gt_template.size() != points.size())
    throw Error(ErrorKind::data, "EDE/TDE need a neutral and a template ground truth for every point");
  const double unit = m.config.unit_mm;
  const auto xyz = flatten(points, 1.0 / unit);
  const auto neutral = model::evaluate_exp_points(m, codes, xyz);
  const auto templ = model::evaluate_template_points(m, codes, xyz);
  DeformationError e;
  for (std::size_t n = 0; n < points.size(); ++n) {
    e.ede_mm += (point_at(neutral, n, unit) - gt_neutral[n]).norm();
    e.tde_mm += (point_at(templ, n, unit) - gt_template[n]).norm();
  }
  e.ede_mm /= double(points.size());
  e.tde_mm /= double(points.size());
  return e;
}

double mean_expression_displacement(const model::ImFaceModel& m, const model::LatentCodes& codes,
                                    const std::vector<Vec3>& points) {
  if (points.empty()) throw Error(ErrorKind::data, "no points to displace");
  const double unit = m.config.unit_mm;
  const auto neutral = model::evaluate_exp_points(m, codes, flatten(points, 1.0 / unit));
  double s = 0.0;
  for (std::size_t n = 0; n < points.size(); ++n) s += (point_at(neutral, n, unit) - points[n]).norm();
  return s / double(points.size());
}

GradientNorms gradient_norms(const model::ImFaceModel& m, const model::LatentCodes& codes,
                             const std::vector<Vec3>& points) {
  GradientNorms out;
  const double unit = m.config.unit_mm;
  const std::size_t chunk = 256;
  for (std::size_t b = 0; b < points.size(); b += chunk) {
    const std::size_t e = std::min(points.size(), b + chunk);
    Tensor t(e - b, 3);
    for (std::size_t n = b; n < e; ++n)
      for (int a = 0; a < 3; ++a) t(n - b, a) = points[n][a] / unit;
    diff::EnableGradGuard on;
    const Var p = diff::parameter(std::move(t));
    const auto c = model::condition(m, codes);
    const auto ev = model::base_eval(c, p);
    const Var gf = diff::grad(ev.sdf, {p})[0];
    const Var gi = diff::grad(ev.s0, {ev.p_id})[0];
    const Tensor nf = diff::row_norm(gf).value(), ni = diff::row_norm(gi).value();
    for (std::size_t n = 0; n < e - b; ++n) {
      out.expression.push_back(nf(n, 0));
      out.identity.push_back(ni(n, 0));
    }
  }
  return out;
}

Eigen::MatrixXd PCAResult::project(const Eigen::MatrixXd& rows) const {
  if (rows.cols() != mean.size()) throw Error(ErrorKind::dimension, "PCA projection dimension mismatch");
  return (rows.rowwise() - mean) * components.transpose();
}

Eigen::MatrixXd PCAResult::reconstruct(const Eigen::MatrixXd& coefficients) const {
  if (coefficients.cols() != components.rows()) throw Error(ErrorKind::dimension, "PCA coefficient count mismatch");
  return (coefficients * components).rowwise() + mean;
}

PCAResult pca_embeddings(const Eigen::MatrixXd& rows, std::size_t components) {
  const std::size_t n = std::size_t(rows.rows()), d = std::size_t(rows.cols());
  if (n == 0 || d == 0) throw Error(ErrorKind::data, "PCA over an empty embedding matrix");
  if (components == 0) components = std::min(n, d);
  if (components > n) throw Error(ErrorKind::data, "PCA asks for more components than there are samples");
  if (components > d) throw Error(ErrorKind::dimension, "PCA asks for more components than dimensions");
  if (!rows.allFinite()) throw Error(ErrorKind::numeric, "non-finite embedding in PCA input");

  PCAResult r;
  r.mean = rows.colwise().mean();
  const Eigen::MatrixXd centered = rows.rowwise() - r.mean;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::Index k = Eigen::Index(components);
  r.singular_values = svd.singularValues().head(k);
  r.components = svd.matrixV().leftCols(k).transpose();
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::Index at = 0;
    r.components.row(c).cwiseAbs().maxCoeff(&at);
    if (r.components(c, at) < 0.0) r.components.row(c) *= -1.0;
  }
  r.explained_variance = r.singular_values.array().square() / double(std::max<std::size_t>(1, n - 1));
  return r;
}

}  // namespace imface::recon
