// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [--only 1,2,...] [--work-dir DIR]

#include "geom_fixtures.hpp"
#include "gradient_probe.hpp"
#include "model_fixtures.hpp"

#include "imface/error.hpp"
#include "imface/fields/se3.hpp"
#include "imface/geomprep/bvh.hpp"
#include "imface/geomprep/delaunay.hpp"
#include "imface/geomprep/predicates.hpp"
#include "imface/geomprep/preprocess.hpp"
#include "imface/log.hpp"
#include "imface/losses/losses.hpp"
#include "imface/reconeval/kdtree.hpp"
#include "imface/reconeval/latent_ops.hpp"
#include "imface/reconeval/marching_cubes.hpp"
#include "imface/reconeval/metrics.hpp"
#include "imface/synthdata/synth.hpp"
#include "imface/training/fit.hpp"
#include "imface/training/trainer.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace imface;
namespace fs = std::filesystem;
using geom::Vec3;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

fs::path g_work;

// ---------------------------------------------------------------- 1
Outcome gradients() {
  using losses::LossWeights;
  auto m = testing::tiny_model(21);
  testing::activate_zero_heads(m, 22);
  const auto c0 = testing::random_codes(m.config, 23);
  const model::LatentCodes codes{diff::parameter(c0.exp.value()), diff::parameter(c0.id.value()),
                                 diff::parameter(c0.detail.value())};
  const auto batch = testing::synthetic_batch(10, 8, 24, true);
  auto params = m.base_parameters();
  for (const auto& p : m.detail_parameters()) params.push_back(p);
  const std::vector<std::pair<std::string, diff::Var>> embeddings{
      {"z_exp", codes.exp}, {"z_id", codes.id}, {"z_detail", codes.detail}};

  struct Case {
    const char* name;
    double LossWeights::*field;
    bool stage2;
    double tol;
  };
  const Case cases[] = {
      {"sdf", &LossWeights::sdf, false, 1e-4},           {"normal", &LossWeights::normal, false, 1e-4},
      {"eikonal", &LossWeights::eikonal, false, 1e-3},   {"emb", &LossWeights::emb, false, 1e-4},
      {"emb_detail", &LossWeights::emb_detail, false, 1e-4}, {"lmk_gen", &LossWeights::lmk_gen, false, 1e-4},
      {"lmk_cons", &LossWeights::lmk_cons, false, 1e-4}, {"residual", &LossWeights::residual, false, 1e-4},
      {"imp", &LossWeights::imp, false, 1e-4},           {"stage2 sdf", &LossWeights::sdf, true, 1e-4},
      {"stage2 normal", &LossWeights::normal, true, 1e-4}, {"stage2 eikonal", &LossWeights::eikonal, true, 1e-3},
  };
  bool ok = true;
  double worst_ratio = 0.0;
  std::string worst;
  std::uint64_t seed = 100;
  for (const auto& cs : cases) {
    LossWeights w{0, 0, 0, 0, 0, 0, 0, 0, 0};
    w.*cs.field = 1.0;
    auto loss = [&] {
      return cs.stage2 ? losses::stage2_terms(m, codes, batch, w).total() : losses::stage1_terms(m, codes, batch, w).total();
    };
    const bool prior = cs.field == &LossWeights::emb || cs.field == &LossWeights::emb_detail;
    const auto rp = testing::probe_gradients(loss, params, 20, seed++);
    const auto re = testing::probe_gradients(loss, embeddings, 20, seed++);
    ok = ok && rp.probes == (prior ? 0u : 20u) && re.probes > 0;
    for (const auto& r : {rp, re}) {
      ok = ok && r.worst < cs.tol;
      if (r.worst / cs.tol > worst_ratio) {
        worst_ratio = r.worst / cs.tol;
        worst = std::string(cs.name) + " " + r.worst_at + " rel err " + fmt("%.2e", r.worst);
      }
    }
  }
  return {ok, "12 terms x 20 probes; worst " + worst};
}

// ---------------------------------------------------------------- 2
Outcome se3() {
  using namespace fields;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0), log_angle(-8.0, std::log10(std::numbers::pi));
  auto vec = [&](double s) -> Eigen::Vector3d { return Eigen::Vector3d(u(rng), u(rng), u(rng)) * s; };
  double orth = 0.0, det = 0.0;
  for (int i = 0; i < 10000; ++i) {
    Eigen::Vector3d axis = vec(1.0);
    while (axis.norm() < 1e-3) axis = vec(1.0);
    const SE3Param p{axis.normalized() * std::pow(10.0, log_angle(rng)), vec(10.0)};
    const Eigen::Matrix3d r = se3_exp(p).rotation;
    orth = std::max(orth, (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff());
    det = std::max(det, std::fabs(r.determinant() - 1.0));
  }
  double jump = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d axis = vec(1.0).normalized(), v = vec(50.0);
    const RigidMotion a = se3_exp({axis * (kSmallAngle - 1e-13), v});
    const RigidMotion b = se3_exp({axis * (kSmallAngle + 1e-13), v});
    jump = std::max({jump, (a.rotation - b.rotation).cwiseAbs().maxCoeff(), (a.translation - b.translation).norm()});
  }
  bool zero_exact = true;
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d v = vec(100.0);
    const RigidMotion z = se3_exp({Eigen::Vector3d::Zero(), v});
    zero_exact = zero_exact && z.rotation == Eigen::Matrix3d::Identity() && z.translation == v;
  }
  const bool ok = orth < 1e-9 && det < 1e-9 && jump < 1e-10 && zero_exact;
  return {ok, "max|RtR-I| " + fmt("%.1e", orth) + ", max|det-1| " + fmt("%.1e", det) + ", switch jump " +
                  fmt("%.1e", jump) + ", omega=0 exact: " + (zero_exact ? "yes" : "no")};
}

// ---------------------------------------------------------------- 3
Outcome geometry() {
  const auto dome = testing::grid_heightfield(40, 60.0, [](double x, double y) {
    return 40.0 * std::exp(-(x * x + y * y) / (2.0 * 45.0 * 45.0)) - 5.0;
  });
  const geom::BVH bvh(dome);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-90, 90);
  double bvh_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p(u(rng), u(rng), 0.5 * u(rng));
    const auto fast = bvh.closest_point(p);
    const auto slow = geom::closest_point_brute_force(p, dome);
    bvh_err = std::max({bvh_err, std::fabs(fast.distance - slow.distance), (fast.point - slow.point).norm()});
  }

  std::vector<geom::Vec2> pts(400);
  std::uniform_real_distribution<double> w(-50, 50);
  for (auto& p : pts) p = geom::Vec2(w(rng), w(rng));
  const auto tris = geom::delaunay_2d(pts);
  std::size_t violations = 0;
  for (const auto& f : tris) {
    if (geom::orient2d_exact(pts[f[0]], pts[f[1]], pts[f[2]]) <= 0) ++violations;
    for (int q = 0; q < int(pts.size()); ++q)
      if (q != f[0] && q != f[1] && q != f[2] && geom::incircle_exact(pts[f[0]], pts[f[1]], pts[f[2]], pts[q]) > 0)
        ++violations;
  }
  const bool euler = tris.size() == 2 * pts.size() - 2 - geom::hull_boundary_count(pts, tris);

  std::uniform_real_distribution<double> c(-50, 50);
  std::vector<Vec3> a(500), b(500);
  for (auto& p : a) p = Vec3(c(rng), c(rng), c(rng));
  for (auto& p : b) p = Vec3(c(rng), c(rng), c(rng));
  auto one = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
    double s = 0.0;
    for (const Vec3& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& q : to) best = std::min(best, (p - q).squaredNorm());
      s += std::sqrt(best);
    }
    return s / double(from.size());
  };
  const double chamfer_err = std::fabs(recon::chamfer(a, b) - 0.5 * (one(a, b) + one(b, a)));

  const bool ok = bvh_err <= 1e-12 && violations == 0 && euler && chamfer_err <= 1e-12;
  return {ok, "BVH vs brute force max err " + fmt("%.1e", bvh_err) + " over 1000 queries; Delaunay " +
                  std::to_string(tris.size()) + " triangles, " + std::to_string(violations) +
                  " exact circumcircle violations; KD Chamfer err " + fmt("%.1e", chamfer_err)};
}

// ---------------------------------------------------------------- 4
Outcome sign_convention() {
  const auto plane = testing::grid_heightfield(8, 60.0, [](double, double) { return 0.0; });
  const geom::BVH bvh(plane);
  const auto normals = geom::vertex_normals(plane);
  const geom::SurfaceQuery q{&plane, &bvh, &normals};
  double worst = 0.0;
  for (double d : {1.0, 5.0, 20.0}) {
    worst = std::max(worst, std::fabs(geom::signed_distance_sample(Vec3(0, 0, -d), q).sdf + d));
    worst = std::max(worst, std::fabs(geom::signed_distance_sample(Vec3(0, 0, d), q).sdf - d));
  }
  return {worst <= 1e-9, "max |sdf(0,0,+-d) -+ d| = " + fmt("%.1e", worst) + " for d in {1, 5, 20} mm"};
}

// ---------------------------------------------------------------- 5
Outcome reduction() {
  auto m = testing::tiny_model(29);
  testing::randomize_detail_head(m, 30, 0.2);
  model::zero_detail_head(m);
  const auto codes = testing::random_codes(m.config, 31);
  const auto pts = testing::random_queries(100000, 32, 1.0);
  const auto base = model::evaluate_sdf(m, codes, pts.values(), false);
  const auto full = model::evaluate_sdf(m, codes, pts.values(), true);
  std::size_t differ = 0;
  for (std::size_t i = 0; i < base.size(); ++i) differ += base[i] != full[i];
  return {differ == 0 && base.size() == 100000,
          std::to_string(differ) + " of " + std::to_string(base.size()) + " queries differ bitwise"};
}

// ---------------------------------------------------------------- 8
Outcome kappa() {
  bool exact = true, mono = true;
  for (double tm : {0.0, 0.3, 0.6, 0.7, 0.9}) {
    exact = exact && losses::stage_blend_kappa(tm, tm) == 1.0 && losses::stage_blend_kappa(1.0, tm) == 0.0 &&
            losses::stage_blend_kappa((1.0 + tm) / 2.0, tm) == 0.5;
    double prev = 2.0;
    for (int i = 0; i < 1000; ++i) {
      const double k = losses::stage_blend_kappa(tm + (1.0 - tm) * double(i) / 999.0, tm);
      mono = mono && k <= prev;
      prev = k;
    }
  }
  return {exact && mono, std::string("T_m in {0, 0.3, 0.6, 0.7, 0.9}: endpoint and midpoint values exact: ") +
                             (exact ? "yes" : "no") + ", monotone on 1000 points: " + (mono ? "yes" : "no")};
}

// ---------------------------------------------------------------- 9
Outcome marching_cubes() {
  const double r = 50.0;
  recon::VoxelGrid g = recon::make_grid(64);
  const auto mesh = recon::extract_surface(
      [r](const std::vector<double>& xyz) {
        std::vector<double> f(xyz.size() / 3);
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = Vec3(xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]).norm() - r;
        return f;
      },
      g);
  double worst = 0.0;
  for (const Vec3& v : mesh.vertices) worst = std::max(worst, std::fabs(v.norm() - r));
  const double half = 0.5 * g.cell_diagonal();
  const bool ok = !mesh.empty() && worst < half && worst < g.cell_diagonal();
  return {ok, std::to_string(mesh.vertices.size()) + " vertices, max |radius - 50| " + fmt("%.4f", worst) +
                  " mm vs half cell diagonal " + fmt("%.4f", half) + " mm"};
}

// ---------------------------------------------------------------- 10
int run_cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" IMFACE_CLI "' -q " + args + " >/dev/null 2>>cli_errors.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

Outcome determinism() {
  const fs::path dir = g_work / "smoke";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "config.json") << R"({"epochs": 5, "batch_scans": 2, "points_per_scan": 256, "dense_points": 64,
    "model": {"width": 16, "detail_width": 16, "hyper_hidden": 8, "landmark_hidden": 32, "fusion_width": 8,
              "latent_exp": 8, "latent_id": 8, "latent_detail": 8}})";
  std::vector<std::string> metrics;
  for (const std::string tag : {"a", "b"}) {
    const std::vector<std::string> steps = {
        "synth --identities 2 --expressions 2 --grid-res 64 --n-near 1000 --n-uniform 1000 --seed 11 --out-dir " + tag + "/data",
        "train --data " + tag + "/data --out-dir " + tag + "/train --config config.json --seed 12",
        "fit --model " + tag + "/train/model --scan " + tag + "/data/id001_exp1.imfscan --steps 20 --points 512 --seed 13 --out " +
            tag + "/fit/codes.json",
        "reconstruct --checkpoint " + tag + "/train/model --codes " + tag + "/fit/codes.json --resolution 48 --out " + tag +
            "/fit/mesh.obj",
        "metrics --pred " + tag + "/fit/mesh.obj --gt " + tag + "/data/aligned/id001_exp1.obj --samples 10000 --out " + tag +
            "/metrics.json"};
    for (const auto& s : steps)
      if (run_cli(dir, s) != 0) return {false, "command failed: imface " + s + " (see " + (dir / "cli_errors.txt").string() + ")"};
    metrics.push_back(slurp(dir / tag / "metrics.json"));
  }
  const auto j = nlohmann::json::parse(metrics[0]);
  const double ch = j.at("chamfer_mm").get<double>();
  const bool ok = metrics[0] == metrics[1] && std::isfinite(ch);
  return {ok, std::string("metrics JSON ") + (metrics[0] == metrics[1] ? "identical" : "DIFFERENT") +
                  " across two runs; chamfer " + fmt("%.3f", ch) + " mm"};
}

}  // namespace

// ---------------------------------------------------------------- 6 and 7
// One campaign: 22 synthetic identities x 4 expressions; the first 20
// identities train, two expression scans of the other two are held out.
// The full schedule runs both stages; the model at the stage boundary serves
// as the stage-1-only baseline. A second stage-1 run without the landmark
// consistency term is the ablation for criterion 7.
namespace {

struct DeskResults {
  bool ran = false;
  std::string error;
  double s1_chamfer = 0, full_chamfer = 0;
  double neutral_disp = 0;
  double eik_exp = 0, eik_id = 0;
  double ede = 0, tde = 0, ablation_ede = 0, ablation_tde = 0;
  double minutes = 0;
};

nlohmann::json desk_config() {
  return {{"epochs", 300},
          {"seed", 1},
          {"model", {{"width", 32}, {"detail_width", 32}, {"hyper_hidden", 32}, {"landmark_hidden", 64}}}};
}

constexpr std::size_t kDeskTrainScans = 80;
const std::size_t kHeldOut[] = {81, 85};  // id020_exp1, id021_exp1
constexpr std::size_t kFitSteps = 200;

std::vector<Vec3> to_mm(const diff::Tensor& t, double unit, std::size_t stride) {
  std::vector<Vec3> v;
  for (std::size_t i = 0; i < t.rows(); i += stride) v.emplace_back(t(i, 0) * unit, t(i, 1) * unit, t(i, 2) * unit);
  return v;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

void progress(const char* what, const train::Trainer& t) {
  const auto& e = t.epochs().back();
  std::printf("    %s epoch %zu loss %.3f\n", what, e.epoch + 1, e.loss);
  std::fflush(stdout);
}

recon::DeformationError mean_ede_tde(const model::ImFaceModel& m, const train::Trainer& t) {
  recon::DeformationError sum;
  const auto& set = t.data();
  for (std::size_t s = 0; s < set.scans.size(); ++s) {
    const auto& sc = set.scans[s];
    const auto e = recon::ede_tde(m, t.embeddings().codes(s), to_mm(sc.dense, 100.0, 20),
                                  to_mm(sc.dense_neutral, 100.0, 20), to_mm(sc.dense_template, 100.0, 20));
    sum.ede_mm += e.ede_mm;
    sum.tde_mm += e.tde_mm;
  }
  sum.ede_mm /= double(set.scans.size());
  sum.tde_mm /= double(set.scans.size());
  return sum;
}

double heldout_chamfer(const model::ImFaceModel& m, const model::LatentCodes& init, bool detail,
                       const std::vector<synth::GeneratedScan>& gen, const char* tag) {
  double sum = 0.0;
  for (std::size_t h : kHeldOut) {
    train::FitConfig fc;
    fc.steps = kFitSteps;
    fc.use_detail = detail;
    fc.seed = 1;
    const auto fit = train::fit_latents(m, train::scan_samples(gen[h].record, 100.0), init, fc);
    const auto mesh = recon::reconstruct(m, fit.codes, 64, detail);
    const auto r = recon::evaluate_meshes(mesh, gen[h].aligned, recon::EvalOptions{});
    std::printf("    %s %s chamfer %.3f mm\n", tag, gen[h].name.c_str(), r.chamfer_mm);
    std::fflush(stdout);
    sum += r.chamfer_mm;
  }
  return sum / double(std::size(kHeldOut));
}

void run_desk(DeskResults& d) {
  if (d.ran) return;
  d.ran = true;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const fs::path dir = g_work / "desk";
    fs::create_directories(dir);
    synth::DatasetOptions opt;
    opt.identities = 22;
    opt.expressions = 4;
    opt.seed = 7;
    const auto gen = synth::generate_dataset(opt);
    std::vector<geom::ScanRecord> records;
    for (std::size_t i = 0; i < kDeskTrainScans; ++i) records.push_back(gen[i].record);
    const auto set = train::build_training_set(records, 100.0);

    train::TrainConfig cfg;
    train::from_json(desk_config(), cfg);
    train::Trainer full(cfg, set);
    const std::size_t spe = full.steps_per_epoch();
    bool snap = false;
    while (!full.done()) {
      if (!snap && full.stage2_now()) {
        full.save_outputs(dir / "stage1");
        snap = true;
      }
      full.run(spe);
      if (full.epoch() % 30 == 0) progress("full", full);
    }
    full.save_outputs(dir / "full");
    if (!snap) throw Error(ErrorKind::internal, "stage 2 never started");
    const auto s1 = model::load_model(dir / "stage1");
    const auto init = full.embeddings().mean_codes();

    d.s1_chamfer = heldout_chamfer(s1, init, false, gen, "stage1");
    d.full_chamfer = heldout_chamfer(full.model(), init, true, gen, "full");

    double disp = 0.0;
    std::size_t neutrals = 0;
    std::vector<double> ge, gi;
    for (std::size_t s = 0; s < set.scans.size(); ++s) {
      const auto& sc = set.scans[s];
      const auto codes = full.embeddings().codes(s);
      if (sc.is_neutral) {
        disp += recon::mean_expression_displacement(full.model(), codes, to_mm(sc.dense, 100.0, 4));
        ++neutrals;
      }
      std::vector<Vec3> near;
      for (std::size_t i = 0; i < sc.points.rows() && near.size() < 200; ++i)
        if (std::fabs(sc.sdf(i, 0)) < 0.05) near.emplace_back(sc.points(i, 0) * 100, sc.points(i, 1) * 100, sc.points(i, 2) * 100);
      const auto g = recon::gradient_norms(full.model(), codes, near);
      ge.insert(ge.end(), g.expression.begin(), g.expression.end());
      gi.insert(gi.end(), g.identity.begin(), g.identity.end());
    }
    d.neutral_disp = disp / double(std::max<std::size_t>(neutrals, 1));
    d.eik_exp = median(ge);
    d.eik_id = median(gi);
    const auto e = mean_ede_tde(full.model(), full);
    d.ede = e.ede_mm;
    d.tde = e.tde_mm;

    train::TrainConfig acfg = cfg;
    acfg.stages = train::Stages::stage1;
    acfg.epochs = cfg.stage1_epochs();
    acfg.weights.lmk_cons = 0.0;
    train::Trainer ablation(acfg, set);
    while (!ablation.done()) {
      ablation.run(spe);
      if (ablation.epoch() % 30 == 0) progress("ablation", ablation);
    }
    ablation.save_outputs(dir / "ablation");
    const auto a = mean_ede_tde(ablation.model(), ablation);
    d.ablation_ede = a.ede_mm;
    d.ablation_tde = a.tde_mm;
  } catch (const std::exception& ex) {
    d.error = ex.what();
  }
  d.minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
}

Outcome desk_training(DeskResults& d) {
  run_desk(d);
  if (!d.error.empty()) return {false, "desk run failed: " + d.error};
  const bool a = d.s1_chamfer < 2.0, b = d.full_chamfer < d.s1_chamfer, c = d.neutral_disp < 0.5,
             e = d.eik_exp >= 0.9 && d.eik_exp <= 1.1 && d.eik_id >= 0.9 && d.eik_id <= 1.1;
  auto mark = [](bool ok) { return ok ? "ok" : "FAIL"; };
  return {a && b && c && e, std::string("(a) stage-1 held-out chamfer ") + fmt("%.3f", d.s1_chamfer) + " mm [" + mark(a) +
                                "]; (b) with stage 2 " + fmt("%.3f", d.full_chamfer) + " mm [" + mark(b) +
                                "]; (c) neutral |E(p)-p| " + fmt("%.3f", d.neutral_disp) + " mm [" + mark(c) +
                                "]; (d) median |grad| exp " + fmt("%.3f", d.eik_exp) + " id " + fmt("%.3f", d.eik_id) +
                                " [" + mark(e) + "]; campaign " + fmt("%.0f", d.minutes) + " min"};
}

Outcome desk_correspondence(DeskResults& d) {
  run_desk(d);
  if (!d.error.empty()) return {false, "desk run failed: " + d.error};
  const bool ok = d.tde < d.ablation_tde && d.tde < 3.0;
  return {ok, "full EDE " + fmt("%.3f", d.ede) + " TDE " + fmt("%.3f", d.tde) + " mm; without landmark consistency EDE " +
                  fmt("%.3f", d.ablation_ede) + " TDE " + fmt("%.3f", d.ablation_tde) + " mm"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  g_work = fs::temp_directory_path() / "imface_acceptance";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string t; std::getline(ss, t, ',');) only.insert(std::stoi(t));
    } else if (a == "--work-dir" && i + 1 < argc) {
      g_work = argv[++i];
    } else {
      std::fprintf(stderr, "usage: acceptance [--only 1,2,...] [--work-dir DIR]\n");
      return 2;
    }
  }
  fs::create_directories(g_work);
  set_log_level(LogLevel::warn);

  DeskResults desk;  // criteria 6 and 7 share one training campaign
  const std::vector<std::pair<int, std::pair<const char*, std::function<Outcome()>>>> criteria = {
      {1, {"gradient correctness", gradients}},
      {2, {"SE(3) algebra", se3}},
      {3, {"geometry oracles", geometry}},
      {4, {"sign convention", sign_convention}},
      {5, {"reduction invariant", reduction}},
      {6, {"desk-scale training", [&] { return desk_training(desk); }}},
      {7, {"correspondence (EDE/TDE)", [&] { return desk_correspondence(desk); }}},
      {8, {"kappa schedule", kappa}},
      {9, {"marching cubes", marching_cubes}},
      {10, {"determinism", determinism}},
  };
  int failed = 0;
  for (const auto& [id, entry] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = entry.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("[%s] %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, entry.first, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
