#include "tapestry/fusion.hpp"

#include "tapestry/error.hpp"
#include "tapestry/util.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <atomic>
#include <cmath>

namespace tapestry {

OrbitTrajectory TrajectoryParams::build(double bound_radius) const {
  const double distance = std::hypot(radius, height);
  const double fov = fov_y ? *fov_y : compute_fov(distance, bound_radius, fov_margin);
  return orbit_trajectory(radius, height, frame_count, resolution, fov, std::nullopt, bound_radius);
}

void BakePlan::validate() const {
  if (!(coverage_target > 0.0 && coverage_target <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "coverage_target must lie in (0, 1]");
  }
  if (max_iterations < 1) fail(ErrorCode::InvalidArgument, "max_iterations must be at least 1");
  if (!(confidence_threshold > 0.0)) fail(ErrorCode::InvalidArgument, "confidence_threshold must be positive");
  if (iterations.empty() && candidates.empty() && max_iterations > 1) {
    fail(ErrorCode::InvalidArgument, "plan needs rotation candidates or a fixed rotation list");
  }
}

double coverage(const TextureAtlas& atlas, const Mask& occupancy, double threshold) {
  if (atlas.resolution() != occupancy.resolution()) {
    fail(ErrorCode::ResolutionMismatch, "coverage: atlas and occupancy resolutions differ");
  }
  std::size_t occupied = 0;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < occupancy.size(); ++i) {
    if (!occupancy[i]) continue;
    ++occupied;
    if (atlas.confidence[i] >= threshold) ++covered;
  }
  if (occupied == 0) fail(ErrorCode::InvalidArgument, "coverage: no UV-mapped texels");
  return static_cast<double>(covered) / static_cast<double>(occupied);
}

std::size_t score_rotation(const TriangleMesh& mesh, const TextureAtlas& atlas, const Rotation& rotation,
                           const OrbitTrajectory& trajectory, double threshold, const UvLayout* layout) {
  require_uvs(mesh, "score_rotation");
  std::optional<UvLayout> own;
  if (!layout || layout->resolution() != atlas.resolution()) {
    own = rasterize_uv_layout(mesh, atlas.resolution());
    layout = &*own;
  }
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < layout->texels.size(); ++i) {
    if (atlas.confidence[layout->texels[i].texel] < threshold) pending.push_back(i);
  }
  if (pending.empty()) return 0;

  const TriangleMesh rotated = rotate_mesh(mesh, rotation);
  const VisibilityIndex index(rotated);
  std::vector<std::uint8_t> exposed(pending.size(), 0);
  parallel_for(pending.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const TexelSample& s = layout->texels[pending[k]];
      Vec3 p = Vec3::Zero();
      Vec3 n = Vec3::Zero();
      for (int c = 0; c < 3; ++c) {
        p += s.barycentric[c] * rotated.corner_position(s.face, c);
        n += s.barycentric[c] * rotated.corner_normal(s.face, c);
      }
      if (n.squaredNorm() == 0.0) continue;
      n.normalize();
      for (const CameraPose& pose : trajectory.poses) {
        const Vec3 to_cam = pose.position - p;
        const double dist = to_cam.norm();
        if (!(dist > 0.0) || angle_weight(n, to_cam / dist) <= kExposureAngleWeight) continue;
        if (texel_visible(index, p, s.face, pose)) {
          exposed[k] = 1;
          break;
        }
      }
    }
  });
  std::size_t count = 0;
  for (std::uint8_t e : exposed) count += e;
  return count;
}

RotationChoice select_base_rotation(const TriangleMesh& mesh, const TextureAtlas& atlas,
                                    const std::vector<Rotation>& candidates, const OrbitTrajectory& trajectory,
                                    double threshold, const UvLayout* layout) {
  if (candidates.empty()) fail(ErrorCode::InvalidArgument, "select_base_rotation: no candidates");
  std::optional<UvLayout> own;
  if (!layout || layout->resolution() != atlas.resolution()) {
    own = rasterize_uv_layout(mesh, atlas.resolution());
    layout = &*own;
  }
  RotationChoice choice;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    choice.scores.push_back(score_rotation(mesh, atlas, candidates[i], trajectory, threshold, layout));
    if (choice.scores[i] > choice.scores[choice.index]) choice.index = i;
  }
  choice.rotation = candidates[choice.index];
  return choice;
}

TextureAtlas fuse(const TextureAtlas& a, const TextureAtlas& b, ConfidenceUpdate update) {
  if (a.resolution() != b.resolution()) {
    fail(ErrorCode::ResolutionMismatch,
         fmt::format("fuse: atlas resolutions differ ({}x{} vs {}x{})", a.resolution().width,
                     a.resolution().height, b.resolution().width, b.resolution().height));
  }
  TextureAtlas out(a.resolution());
  for (std::size_t i = 0; i < out.confidence.size(); ++i) {
    const double ca = a.confidence[i];
    const double cb = b.confidence[i];
    const double total = ca + cb;
    if (total > 0.0) {
      out.color[i] = a.color[i] + (cb / total) * (b.color[i] - a.color[i]);
    }
    out.confidence[i] = update == ConfidenceUpdate::Additive ? total : std::max(ca, cb);
  }
  return out;
}

ProgressiveResult progressive_texture(const TriangleMesh& mesh, AppearanceGenerator& generator,
                                      const BakePlan& plan, const BakeConfig& bake_config,
                                      const std::string& prompt, const IterationObserver& observer) {
  plan.validate();
  require_uvs(mesh, "progressive_texture");
  const double bound = std::max(bounding_radius(mesh), 1e-9);
  const UvLayout layout = rasterize_uv_layout(mesh, bake_config.atlas_resolution);
  const Mask occupancy = layout.occupancy();

  ProgressiveResult result{TextureAtlas(bake_config.atlas_resolution), {}};
  double previous = 0.0;
  for (int iteration = 1; iteration <= plan.max_iterations; ++iteration) {
    IterationRecord record;
    record.iteration = iteration;
    TrajectoryParams params = plan.trajectory;
    if (!plan.iterations.empty()) {
      if (iteration > static_cast<int>(plan.iterations.size())) break;
      const PlannedIteration& planned = plan.iterations[iteration - 1];
      record.rotation = planned.rotation;
      if (planned.trajectory) params = *planned.trajectory;
    }
    const OrbitTrajectory trajectory = params.build(bound);
    if (plan.iterations.empty() && iteration > 1) {
      const RotationChoice choice = select_base_rotation(mesh, result.atlas, plan.candidates, trajectory,
                                                         plan.confidence_threshold, &layout);
      record.rotation = choice.rotation;
      record.candidate_index = choice.index;
      record.candidate_scores = choice.scores;
      if (choice.scores[choice.index] == 0) {
        spdlog::info("iteration {}: no candidate rotation exposes under-confident texels; stopping", iteration);
        break;
      }
    }

    const TriangleMesh rotated = rotate_mesh(mesh, record.rotation);
    GenerationRequest request;
    request.iteration = iteration;
    request.trajectory = trajectory;
    request.base_rotation = record.rotation;
    request.prompt = prompt;
    request.conditioning = iteration == 1
                               ? render_turntable(rotated, nullptr, trajectory, plan.confidence_threshold)
                               : render_turntable(rotated, &result.atlas, trajectory, plan.confidence_threshold);

    GenerationResponse response;
    try {
      response = generator.generate(request);
      validate_response(request, response);
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("iteration {}: {}", iteration, e.what()));
    }
    record.generation_seconds = response.seconds;
    record.provider = response.provider;

    const Baker baker(rotated, bake_config);
    const TextureAtlas partial = baker.bake_video(response.frames, request.conditioning, trajectory);
    result.atlas = fuse(result.atlas, partial, plan.update);
    record.coverage = coverage(result.atlas, occupancy, plan.confidence_threshold);
    if (iteration > 1 && record.coverage <= previous) {
      spdlog::warn("iteration {}: coverage did not increase ({:.4f} -> {:.4f})", iteration, previous,
                   record.coverage);
    }
    previous = record.coverage;
    result.report.history.push_back(record);
    result.report.covered_fraction = record.coverage;
    if (observer) observer({result.report.history.back(), trajectory, request, response, partial, result.atlas});
    if (record.coverage >= plan.coverage_target) break;
  }
  return result;
}

namespace {

nlohmann::ordered_json rotation_json(const Rotation& r) {
  nlohmann::ordered_json j;
  const auto& q = r.quaternion;
  j["quaternion"] = {q.w(), q.x(), q.y(), q.z()};
  j["yaw_degrees"] = r.yaw_degrees;
  j["pitch_degrees"] = r.pitch_degrees;
  if (r.yaw_index) j["yaw_index"] = *r.yaw_index;
  if (r.pitch_index) j["pitch_index"] = *r.pitch_index;
  return j;
}

Rotation rotation_from(const nlohmann::json& j) {
  Rotation r;
  if (j.contains("quaternion")) {
    const auto& q = j.at("quaternion");
    r = Rotation::from_quaternion(Eigen::Quaterniond(q.at(0).get<double>(), q.at(1).get<double>(),
                                                     q.at(2).get<double>(), q.at(3).get<double>()));
    r.yaw_degrees = j.value("yaw_degrees", 0.0);
    r.pitch_degrees = j.value("pitch_degrees", 0.0);
  } else {
    r = Rotation::from_yaw_pitch(j.value("yaw_degrees", 0.0), j.value("pitch_degrees", 0.0));
  }
  if (j.contains("yaw_index")) r.yaw_index = j.at("yaw_index").get<int>();
  if (j.contains("pitch_index")) r.pitch_index = j.at("pitch_index").get<int>();
  return r;
}

nlohmann::ordered_json trajectory_params_json(const TrajectoryParams& p) {
  nlohmann::ordered_json j;
  j["radius"] = p.radius;
  j["height"] = p.height;
  j["frame_count"] = p.frame_count;
  j["resolution"] = {p.resolution.width, p.resolution.height};
  j["fov_y"] = p.fov_y ? nlohmann::ordered_json(*p.fov_y) : nlohmann::ordered_json("auto");
  j["fov_margin"] = p.fov_margin;
  return j;
}

TrajectoryParams trajectory_params_from(const nlohmann::json& j, TrajectoryParams p = {}) {
  p.radius = j.value("radius", p.radius);
  p.height = j.value("height", p.height);
  p.frame_count = j.value("frame_count", p.frame_count);
  if (j.contains("resolution")) p.resolution = {j["resolution"].at(0).get<int>(), j["resolution"].at(1).get<int>()};
  if (j.contains("fov_y")) {
    if (j["fov_y"].is_number()) p.fov_y = j["fov_y"].get<double>();
    else p.fov_y.reset();
  }
  p.fov_margin = j.value("fov_margin", p.fov_margin);
  return p;
}

} // namespace

std::string plan_to_json(const BakePlan& plan) {
  nlohmann::ordered_json j;
  j["coverage_target"] = plan.coverage_target;
  j["confidence_threshold"] = plan.confidence_threshold;
  j["max_iterations"] = plan.max_iterations;
  j["confidence_update"] = plan.update == ConfidenceUpdate::Additive ? "additive" : "max";
  j["trajectory"] = trajectory_params_json(plan.trajectory);
  auto iterations = nlohmann::ordered_json::array();
  for (const PlannedIteration& it : plan.iterations) {
    nlohmann::ordered_json e;
    e["rotation"] = rotation_json(it.rotation);
    if (it.trajectory) e["trajectory"] = trajectory_params_json(*it.trajectory);
    iterations.push_back(std::move(e));
  }
  j["iterations"] = std::move(iterations);
  auto candidates = nlohmann::ordered_json::array();
  for (const Rotation& r : plan.candidates) candidates.push_back(rotation_json(r));
  j["candidates"] = std::move(candidates);
  return j.dump(2) + "\n";
}

BakePlan plan_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    BakePlan plan;
    plan.coverage_target = j.value("coverage_target", plan.coverage_target);
    plan.confidence_threshold = j.value("confidence_threshold", plan.confidence_threshold);
    plan.max_iterations = j.value("max_iterations", plan.max_iterations);
    const std::string update = j.value("confidence_update", std::string("additive"));
    if (update != "additive" && update != "max") fail(ErrorCode::InvalidArgument, "confidence_update must be additive or max");
    plan.update = update == "max" ? ConfidenceUpdate::Max : ConfidenceUpdate::Additive;
    if (j.contains("trajectory")) plan.trajectory = trajectory_params_from(j["trajectory"]);
    if (j.contains("iterations")) {
      for (const auto& e : j["iterations"]) {
        PlannedIteration it;
        it.rotation = rotation_from(e.at("rotation"));
        if (e.contains("trajectory")) it.trajectory = trajectory_params_from(e["trajectory"], plan.trajectory);
        plan.iterations.push_back(std::move(it));
      }
    }
    if (j.contains("candidates")) {
      plan.candidates.clear();
      for (const auto& c : j["candidates"]) plan.candidates.push_back(rotation_from(c));
    }
    plan.validate();
    return plan;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("malformed plan: ") + e.what());
  }
}

std::string report_to_json(const CoverageReport& report) {
  nlohmann::ordered_json j;
  j["covered_fraction"] = report.covered_fraction;
  auto history = nlohmann::ordered_json::array();
  for (const IterationRecord& r : report.history) {
    nlohmann::ordered_json e;
    e["iteration"] = r.iteration;
    e["coverage"] = r.coverage;
    e["rotation"] = rotation_json(r.rotation);
    e["candidate_index"] = r.candidate_index ? nlohmann::ordered_json(*r.candidate_index) : nlohmann::ordered_json(nullptr);
    e["candidate_scores"] = r.candidate_scores;
    e["provider"] = r.provider;
    e["generation_seconds"] = r.generation_seconds;
    history.push_back(std::move(e));
  }
  j["history"] = std::move(history);
  return j.dump(2) + "\n";
}

std::string report_table(const CoverageReport& report) {
  std::string out = fmt::format("{:>9}  {:>8}  {:>8}  {:>8}  {:>10}\n", "iteration", "yaw", "pitch", "coverage", "gen [s]");
  for (const IterationRecord& r : report.history) {
    out += fmt::format("{:>9}  {:>8.1f}  {:>8.1f}  {:>8.4f}  {:>10.2f}\n", r.iteration, r.rotation.yaw_degrees,
                       r.rotation.pitch_degrees, r.coverage, r.generation_seconds);
  }
  return out;
}

} // namespace tapestry
