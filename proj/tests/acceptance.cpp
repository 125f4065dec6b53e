// Acceptance checks 1-9. One PASS/FAIL line per criterion; exit status 1 if
// any criterion fails.

#include "support.hpp"

#include "tapestry/bake.hpp"
#include "tapestry/fixtures.hpp"
#include "tapestry/frames_io.hpp"
#include "tapestry/fusion.hpp"
#include "tapestry/generator.hpp"
#include "tapestry/metrics.hpp"
#include "tapestry/pipeline.hpp"
#include "tapestry/render.hpp"
#include "tapestry/util.hpp"
#include "tapestry/visibility.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <functional>
#include <map>

using namespace tapestry;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_binary_file(e.path());
  return files;
}

Outcome trajectory_exactness() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> radius(0.5, 6.0);
  std::uniform_real_distribution<double> height(-3.0, 3.0);
  std::uniform_int_distribution<int> frames(2, 120);
  double pos_err = 0.0;
  double aim_err = 0.0;
  std::size_t poses = 0;
  for (int i = 0; i < 1000; ++i) {
    const double r = radius(rng);
    const double z = height(rng);
    const int t_count = frames(rng);
    const OrbitTrajectory traj = orbit_trajectory(r, z, t_count, {64, 48}, 0.8);
    if (static_cast<int>(traj.poses.size()) != t_count) return {false, fmt::format("triple {} has wrong frame count", i)};
    for (int t = 0; t < t_count; ++t) {
      const double a = 2.0 * M_PI * t / t_count;
      const Vec3 expected(r * std::cos(a), r * std::sin(a), z);
      const CameraPose& pose = traj.poses[t];
      pos_err = std::max(pos_err, (pose.position - expected).cwiseAbs().maxCoeff());
      aim_err = std::max(aim_err, (pose.forward() - (-expected).normalized()).norm());
      ++poses;
    }
  }
  const double elapsed = seconds_since(start);
  return {pos_err <= 1e-9 && aim_err <= 1e-6 && elapsed < 1.0,
          fmt::format("{} poses, max position error {:.2e}, max aim error {:.2e}, {:.3f} s", poses, pos_err, aim_err,
                      elapsed)};
}

Outcome weight_formulas() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2);
  double angle_err = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 n = test::random_unit(rng);
    const Vec3 v = test::random_unit(rng);
    const double c = std::max(0.0, n.dot(v) / (n.norm() * v.norm()));
    angle_err = std::max(angle_err, std::abs(angle_weight(n, v) - std::pow(c, 4.0)));
  }

  const Resolution res{12, 9};
  Grid<float> constant(res, 2.5f);
  Grid<float> affine(res);
  Grid<float> step(res);
  for (int y = 0; y < res.height; ++y) {
    for (int x = 0; x < res.width; ++x) {
      affine(x, y) = 3.0f + 0.25f * x - 0.5f * y;
      step(x, y) = x < 6 ? 1.0f : 2.0f;
    }
  }
  double constant_max = 0.0;
  double affine_max = 0.0;
  for (int y = 1; y + 1 < res.height; ++y) {
    for (int x = 1; x + 1 < res.width; ++x) {
      constant_max = std::max(constant_max, depth_penalty(constant, x, y, 8.0));
      affine_max = std::max(affine_max, depth_penalty(affine, x, y, 8.0));
    }
  }
  for (int x : {0, res.width - 1})
    for (int y = 0; y < res.height; ++y) constant_max = std::max(constant_max, depth_penalty(constant, x, y, 8.0));
  bool step_ok = true;
  for (int y = 0; y < res.height; ++y) step_ok = step_ok && depth_penalty(step, 5, y, 1.0) == 1.0 && depth_penalty(step, 6, y, 1.0) == 1.0;

  // S identity on every sample of a real bake, including the partial weight grid.
  const TriangleMesh sphere = fixtures::uv_sphere(32, 17);
  const TextureAtlas reference = fixtures::checker_atlas({128, 128}, 8);
  const OrbitTrajectory traj = orbit_trajectory(2.0, 1.0, 3, {96, 96}, compute_fov(std::sqrt(5.0), 1.0, 1.1));
  const auto frames = render_turntable(sphere, &reference, traj, 0.0);
  const Baker baker(sphere, BakeConfig{{128, 128}, 8.0});
  std::size_t samples = 0;
  std::size_t identity_failures = 0;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    std::vector<std::optional<BakeWeights>> weights;
    const PartialBake partial = baker.bake_frame(*frames[t].color, frames[t], traj.poses[t], &weights);
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (!weights[k]) continue;
      ++samples;
      const BakeWeights& w = *weights[k];
      const double texel_weight = partial.weight[baker.layout().texels[k].texel];
      if (w.similarity != w.angle * (1.0 - w.depth) || texel_weight != w.similarity || w.angle < 0 || w.angle > 1 ||
          w.depth < 0 || w.depth > 1)
        ++identity_failures;
    }
  }
  const double elapsed = seconds_since(start);
  const bool pass = angle_err <= 1e-9 && constant_max == 0.0 && affine_max == 0.0 && step_ok && samples > 0 &&
                    identity_failures == 0 && elapsed < 1.0;
  return {pass, fmt::format("angle max error {:.2e}; penalty constant {} affine {} unit step {}; S identity on {} "
                            "samples, {} failures; {:.3f} s",
                            angle_err, constant_max, affine_max, step_ok ? "1" : "not 1", samples,
                            identity_failures, elapsed)};
}

Outcome visibility_equivalence() {
  const auto start = std::chrono::steady_clock::now();
  const TriangleMesh sphere = fixtures::uv_sphere(100, 51);
  const VisibilityIndex index(sphere);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  std::size_t hits = 0;
  std::size_t edge_ties = 0;
  std::size_t mismatches = 0;
  double dist_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 origin = 3.0 * test::random_unit(rng);
    const Vec3 dir = (Vec3(u(rng), u(rng), u(rng)) - origin).normalized();
    const auto bvh = index.nearest_hit(origin, dir);
    const test::OracleHit oracle = test::brute_force_hit(sphere, origin, dir);
    if (!bvh || oracle.face < 0) {
      if (bvh.has_value() != (oracle.face >= 0)) ++mismatches;
      continue;
    }
    ++hits;
    dist_err = std::max(dist_err, std::abs(bvh->distance - oracle.t));
    if (bvh->face == oracle.face) continue;
    // Shared-edge rays: accept only if the oracle also hits the BVH's face at the same distance.
    TriangleMesh single;
    single.positions = sphere.positions;
    single.faces = {sphere.faces[bvh->face]};
    const test::OracleHit other = test::brute_force_hit(single, origin, dir);
    if (other.face == 0 && std::abs(other.t - oracle.t) <= 1e-9 && oracle.bary.minCoeff() < 1e-9)
      ++edge_ties;
    else
      ++mismatches;
  }
  const double elapsed = seconds_since(start);
  return {sphere.faces.size() == 10000 && mismatches == 0 && dist_err <= 1e-6 && elapsed < 10.0,
          fmt::format("{} triangles, {} hits of 1000 rays, {} face mismatches, {} shared-edge ties, max distance "
                      "error {:.2e}, {:.2f} s",
                      sphere.faces.size(), hits, mismatches, edge_ties, dist_err, elapsed)};
}

Outcome closed_loop_bake() {
  const auto start = std::chrono::steady_clock::now();
  const TriangleMesh sphere = fixtures::uv_sphere(128, 65);
  const TextureAtlas reference = fixtures::checker_atlas({1024, 1024}, 16);
  TrajectoryParams params;
  params.frame_count = 61;
  params.resolution = {512, 512};
  const OrbitTrajectory traj = params.build();
  const auto gbuffers = render_turntable(sphere, &reference, traj, 0.0);
  std::vector<ImageRgb> oracle_frames;
  for (const GBuffer& g : gbuffers) oracle_frames.push_back(*g.color);

  const Baker baker(sphere, BakeConfig{{1024, 1024}, 8.0});
  const TextureAtlas baked = baker.bake_video(oracle_frames, gbuffers, traj);
  const double cov = coverage(baked, baker.layout().occupancy(), 0.05);
  const BakeEvaluation eval = evaluate_bake(sphere, baked, oracle_frames, traj);
  const double elapsed = seconds_since(start);
  const bool psnr_ok = eval.frames.mean_psnr >= 30.0;
  const bool coverage_ok = cov >= 0.95;
  return {psnr_ok && coverage_ok && elapsed < 120.0,
          fmt::format("masked PSNR {:.2f} dB ({}), coverage {:.4f} ({}), {:.1f} s", eval.frames.mean_psnr,
                      psnr_ok ? ">= 30" : "< 30", cov, coverage_ok ? ">= 0.95" : "< 0.95", elapsed)};
}

Outcome fusion_algebra() {
  std::mt19937_64 rng(5);
  const Resolution res{48, 32};
  double comm = 0.0;
  double assoc = 0.0;
  bool identity = true;
  bool self = true;
  for (int trial = 0; trial < 20; ++trial) {
    const TextureAtlas a = test::random_atlas(rng, res);
    const TextureAtlas b = test::random_atlas(rng, res);
    const TextureAtlas c = test::random_atlas(rng, res);
    const TextureAtlas ab = fuse(a, b);
    const TextureAtlas ba = fuse(b, a);
    const TextureAtlas left = fuse(fuse(a, b), c);
    const TextureAtlas right = fuse(a, fuse(b, c));
    const TextureAtlas zero(res);
    const TextureAtlas az = fuse(a, zero);
    const TextureAtlas za = fuse(zero, a);
    const TextureAtlas aa = fuse(a, a);
    for (std::size_t i = 0; i < a.color.size(); ++i) {
      comm = std::max({comm, (ab.color[i] - ba.color[i]).cwiseAbs().maxCoeff(), std::abs(ab.confidence[i] - ba.confidence[i])});
      assoc = std::max({assoc, (left.color[i] - right.color[i]).cwiseAbs().maxCoeff(),
                        std::abs(left.confidence[i] - right.confidence[i])});
      if (a.confidence[i] > 0) {
        identity = identity && az.color[i] == a.color[i] && za.color[i] == a.color[i];
        self = self && aa.color[i] == a.color[i];
      }
      identity = identity && az.confidence[i] == a.confidence[i] && za.confidence[i] == a.confidence[i];
      self = self && aa.confidence[i] == 2.0 * a.confidence[i];
    }
  }
  return {comm <= 1e-6 && assoc <= 1e-6 && identity && self,
          fmt::format("commutativity {:.2e}, associativity {:.2e}, zero identity {}, self-fusion {}", comm, assoc,
                      identity ? "exact" : "broken", self ? "exact" : "broken")};
}

Outcome inpainting_progress() {
  const auto start = std::chrono::steady_clock::now();
  std::string detail;
  bool pass = true;

  {
    const TriangleMesh mug = fixtures::mug(64);
    const TextureAtlas reference = fixtures::checker_atlas({512, 512}, 16);
    OracleGenerator oracle(mug, reference);
    BakePlan plan;
    plan.trajectory.frame_count = 61;
    plan.trajectory.resolution = {256, 256};
    plan.max_iterations = 2;
    std::vector<TextureAtlas> masters;
    const ProgressiveResult out =
        progressive_texture(mug, oracle, plan, BakeConfig{{256, 256}, 8.0}, {},
                            [&](const IterationArtifacts& a) { masters.push_back(a.master); });
    const auto& h = out.report.history;
    const bool increased = h.size() == 2 && h[1].coverage > h[0].coverage;
    std::size_t decreases = 0;
    for (std::size_t k = 1; k < masters.size(); ++k)
      for (std::size_t i = 0; i < masters[k].confidence.size(); ++i)
        decreases += masters[k].confidence[i] < masters[k - 1].confidence[i];
    pass = pass && plan.candidates.size() == 24 && increased && decreases == 0;
    detail += fmt::format("coverage {}", h.empty() ? std::string("none") : fmt::format("{:.4f}", h[0].coverage));
    if (h.size() > 1)
      detail += fmt::format(" -> {:.4f} (rotation {}:{})", h[1].coverage, h[1].rotation.yaw_degrees,
                            h[1].rotation.pitch_degrees);
    detail += fmt::format(", {} confidence decreases", decreases);
  }

  {
    // In-loop selection versus exhaustive candidate scoring on a smaller setup.
    const TriangleMesh mug = fixtures::mug(32);
    const TextureAtlas reference = fixtures::checker_atlas({64, 64}, 8);
    OracleGenerator oracle(mug, reference);
    BakePlan plan;
    plan.trajectory.frame_count = 8;
    plan.trajectory.resolution = {64, 64};
    plan.max_iterations = 2;
    const BakeConfig bake{{64, 64}, 8.0};
    std::optional<TextureAtlas> first_master;
    std::optional<IterationRecord> second;
    std::optional<OrbitTrajectory> second_trajectory;
    progressive_texture(mug, oracle, plan, bake, {}, [&](const IterationArtifacts& a) {
      if (a.record.iteration == 1) first_master = a.master;
      if (a.record.iteration == 2) {
        second = a.record;
        second_trajectory = a.trajectory;
      }
    });
    bool match = first_master && second && second->candidate_index &&
                 second->candidate_scores.size() == plan.candidates.size();
    std::size_t best = 0;
    std::vector<std::size_t> brute;
    if (match) {
      const UvLayout layout = rasterize_uv_layout(mug, bake.atlas_resolution);
      for (const Rotation& r : plan.candidates) {
        brute.push_back(test::brute_force_score(mug, layout, *first_master, r.yaw_degrees, r.pitch_degrees,
                                                *second_trajectory,
                                                plan.confidence_threshold));
        if (brute.back() > brute[best]) best = brute.size() - 1;
      }
      match = brute == second->candidate_scores && best == *second->candidate_index;
    }
    pass = pass && match;
    detail += fmt::format("; selection vs brute force on 24 candidates: {} (index {}, score {})",
                          match ? "identical" : "different", best, brute.empty() ? 0 : brute[best]);
  }
  detail += fmt::format(", {:.1f} s", seconds_since(start));
  return {pass, detail};
}

Outcome hemisphere_argmax() {
  const auto start = std::chrono::steady_clock::now();
  const TriangleMesh sphere = fixtures::uv_sphere(32, 17);
  const Resolution res{128, 128};
  const TextureAtlas east = fixtures::paint_atlas(sphere, res, [](const Vec3& p, const Vec3&) {
    return fixtures::SurfaceTexel{Vec3::Ones(), p.x() > 0.0 ? 1.0 : 0.0};
  });
  const std::vector<Rotation> candidates = rotation_grid({0, 90, 180, 270}, {0});
  // The trajectory is a single view from the first pose of the default orbit (camera on +x).
  TrajectoryParams params;
  params.frame_count = 4;
  params.resolution = {128, 128};
  OrbitTrajectory single_view = params.build();
  single_view.poses.resize(1);
  single_view.frame_count = 1;

  const RotationChoice choice = select_base_rotation(sphere, east, candidates, single_view, 0.05);
  const UvLayout layout = rasterize_uv_layout(sphere, res);
  std::vector<std::size_t> brute;
  std::size_t best = 0;
  for (const Rotation& r : candidates) {
    brute.push_back(test::brute_force_score(sphere, layout, east, r.yaw_degrees, r.pitch_degrees, single_view, 0.05));
    if (brute.back() > brute[best]) best = brute.size() - 1;
  }
  const RotationChoice orbit = select_base_rotation(sphere, east, candidates, params.build(), 0.05);
  const double elapsed = seconds_since(start);
  const bool pass = choice.rotation.yaw_degrees == 180.0 && choice.index == best && brute == choice.scores && elapsed < 30.0;
  return {pass, fmt::format("single-view scores [{}] select {} deg, brute force [{}]; full default orbit scores [{}]; "
                            "{:.2f} s",
                            fmt::join(choice.scores, ", "), choice.rotation.yaw_degrees, fmt::join(brute, ", "),
                            fmt::join(orbit.scores, ", "), elapsed)};
}

Outcome metric_values() {
  const Resolution res{32, 32};
  const double p = psnr(Grid<Vec3>(res, Vec3::Zero()), Grid<Vec3>(res, Vec3::Constant(0.1)));
  std::mt19937_64 rng(8);
  const TextureAtlas random = test::random_atlas(rng, res, 0.0);
  const double self = ssim(random.color, random.color);
  double closed_err = 0.0;
  const double c1 = 0.01 * 0.01;
  for (auto [a, b] : {std::pair{0.2, 0.7}, std::pair{0.0, 1.0}, std::pair{0.5, 0.5}, std::pair{0.9, 0.1},
                      std::pair{0.33, 0.34}}) {
    const double closed = (2 * a * b + c1) / (a * a + b * b + c1);
    closed_err = std::max(closed_err, std::abs(ssim(Grid<Vec3>(res, Vec3::Constant(a)), Grid<Vec3>(res, Vec3::Constant(b))) - closed));
  }
  return {std::abs(p - 20.0) <= 1e-9 && self == 1.0 && closed_err <= 1e-9,
          fmt::format("PSNR(0.1 difference) {:.12f} dB, SSIM(X, X) {}, constant-pair SSIM max error {:.2e}", p, self,
                      closed_err)};
}

Outcome determinism() {
  test::TempDir dir;
  save_obj(fixtures::uv_sphere(48, 25), dir / "sphere.obj");
  PipelineConfig config;
  config.mesh = dir / "sphere.obj";
  config.trajectory.frame_count = 61;
  config.trajectory.resolution = {128, 128};
  config.atlas_resolution = {512, 512};

  config.output = dir / "condition";
  cmd_condition(config);
  const auto condition_first = snapshot(config.output);
  ::setenv("TAPESTRY_THREADS", "3", 1);
  cmd_condition(config);
  const bool condition_same = snapshot(config.output) == condition_first;
  ::unsetenv("TAPESTRY_THREADS");

  const TriangleMesh mesh = load_normalized_mesh(config.mesh, true);
  const TextureAtlas reference = fixtures::checker_atlas({256, 256}, 8);
  std::vector<ImageRgb> colors;
  for (const GBuffer& g : render_turntable(mesh, &reference, load_trajectory(config.output / "trajectory.json"), 0.0))
    colors.push_back(*g.color);
  write_color_frames(config.output, colors);

  const fs::path frames = config.output;
  config.output = dir / "atlas";
  cmd_bake(config, frames);
  const auto bake_first = snapshot(config.output);
  ::setenv("TAPESTRY_THREADS", "3", 1);
  cmd_bake(config, frames);
  const bool bake_same = snapshot(config.output) == bake_first;
  ::unsetenv("TAPESTRY_THREADS");
  return {condition_same && bake_same,
          fmt::format("condition rerun {} ({} files), bake rerun {} ({} files)", condition_same ? "identical" : "differs",
                      condition_first.size(), bake_same ? "identical" : "differs", bake_first.size())};
}

} // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"trajectory exactness", trajectory_exactness},
      {"weight formulas", weight_formulas},
      {"visibility oracle equivalence", visibility_equivalence},
      {"closed-loop bake fidelity", closed_loop_bake},
      {"fusion algebra", fusion_algebra},
      {"inpainting progress", inpainting_progress},
      {"hemisphere argmax", hemisphere_argmax},
      {"metric correctness", metric_values},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, fmt::format("error: {}", e.what())};
    }
    failures += !o.pass;
    fmt::print("{} {}. {}: {}\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail);
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
