#include "tapestry/pipeline.hpp"

#include "tapestry/error.hpp"
#include "tapestry/fixtures.hpp"
#include "tapestry/frames_io.hpp"
#include "tapestry/render.hpp"
#include "tapestry/util.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <charconv>
#include <cmath>
#include <numbers>
#include <random>
#include <unistd.h>

namespace tapestry {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kReferenceCheckerCells = 16;

void require(bool ok, const std::string& message) {
  if (!ok) fail(ErrorCode::InvalidArgument, message);
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += fmt::format(".partial-{}", ::getpid());
  write_text_file(tmp, text);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorCode::Io, fmt::format("cannot write '{}'", path.string()));
  }
}

std::unique_ptr<AppearanceGenerator> make_generator(const PipelineConfig& config, const TriangleMesh& mesh) {
  const GeneratorConfig& g = config.generator;
  ExchangeOptions options;
  options.timeout = std::chrono::milliseconds(static_cast<long long>(std::llround(g.timeout_seconds * 1000.0)));
  options.poll_interval = std::chrono::milliseconds(static_cast<long long>(std::llround(g.poll_seconds * 1000.0)));
  switch (g.kind) {
    case GeneratorKind::Oracle: {
      TextureAtlas reference = g.reference.empty()
                                   ? fixtures::checker_atlas(config.atlas_resolution, kReferenceCheckerCells)
                                   : read_atlas_or_texture(g.reference);
      return std::make_unique<OracleGenerator>(mesh, std::move(reference));
    }
    case GeneratorKind::Fs:
      return std::make_unique<FsGenerator>(g.exchange_dir, options);
    case GeneratorKind::Http:
      return std::make_unique<HttpGenerator>(g.endpoint, options);
  }
  fail(ErrorCode::InvalidArgument, "unknown generator");
}

void validate_generator(const GeneratorConfig& g) {
  require(g.timeout_seconds > 0.0, "generator timeout must be positive");
  require(g.poll_seconds > 0.0, "generator poll interval must be positive");
  if (g.kind == GeneratorKind::Fs) require(!g.exchange_dir.empty(), "fs generator needs an exchange directory");
  if (g.kind == GeneratorKind::Http) require(!g.endpoint.empty(), "http generator needs an endpoint");
}

ordered_json rotation_record(const Rotation& r) {
  const auto& q = r.quaternion;
  return {{"quaternion", {q.w(), q.x(), q.y(), q.z()}}, {"yaw_degrees", r.yaw_degrees},
          {"pitch_degrees", r.pitch_degrees}};
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

// Base rotation stored next to a frame set: rotation.json (run responses) or
// the initial rotation of a dataset sample.
std::optional<Rotation> stored_rotation(const fs::path& frames_dir) {
  const auto read = [](const fs::path& file, const char* key) -> std::optional<Rotation> {
    if (!fs::exists(file)) return std::nullopt;
    try {
      const auto j = nlohmann::json::parse(read_text_file(file));
      const auto& r = key ? j.at(key) : j;
      const auto& q = r.at("quaternion");
      Rotation rot = Rotation::from_quaternion(
          Eigen::Quaterniond(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(), q.at(3).get<double>()));
      rot.yaw_degrees = r.value("yaw_degrees", 0.0);
      rot.pitch_degrees = r.value("pitch_degrees", 0.0);
      return rot;
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::InvalidArgument, fmt::format("'{}': {}", file.string(), e.what()));
    }
  };
  if (auto r = read(frames_dir / "rotation.json", nullptr)) return r;
  return read(frames_dir / "sample.json", "initial_rotation");
}

} // namespace

GeneratorKind generator_kind_from_string(const std::string& name) {
  if (name == "oracle") return GeneratorKind::Oracle;
  if (name == "fs") return GeneratorKind::Fs;
  if (name == "http") return GeneratorKind::Http;
  fail(ErrorCode::InvalidArgument, fmt::format("unknown generator '{}' (oracle, fs, http)", name));
}

std::string to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::Oracle: return "oracle";
    case GeneratorKind::Fs: return "fs";
    case GeneratorKind::Http: return "http";
  }
  return "?";
}

void PipelineConfig::validate() const {
  const TrajectoryParams& t = trajectory;
  require(t.radius > 0.0, "trajectory radius must be positive");
  require(std::isfinite(t.height), "trajectory height must be finite");
  require(t.frame_count >= 2, "frame count must be at least 2");
  require(t.resolution.valid(), "frame resolution must be positive");
  if (t.fov_y) require(*t.fov_y > 0.0 && *t.fov_y < std::numbers::pi, "fov_y must lie in (0, pi)");
  require(t.fov_margin > 0.0, "fov margin must be positive");
  require(atlas_resolution.valid(), "atlas resolution must be positive");
  require(penalty_scale >= 0.0, "penalty scale must be non-negative");
  require(confidence_threshold > 0.0, "confidence threshold must be positive");
  require(coverage_target > 0.0 && coverage_target <= 1.0, "coverage target must lie in (0, 1]");
  require(max_iterations >= 1, "max iterations must be at least 1");
  require(!candidate_yaws.empty() && !candidate_pitches.empty(), "rotation candidate grid is empty");
  require(radius_range.lo > 0.0 && radius_range.lo <= radius_range.hi, "radius range must be positive and ordered");
  require(height_range.lo <= height_range.hi, "height range must be ordered");
}

BakeConfig PipelineConfig::bake_config() const { return BakeConfig{atlas_resolution, penalty_scale}; }

BakePlan PipelineConfig::bake_plan() const {
  if (plan) {
    BakePlan p = plan_from_json(read_text_file(*plan));
    p.validate();
    return p;
  }
  BakePlan p;
  p.candidates = rotation_grid(candidate_yaws, candidate_pitches);
  p.trajectory = trajectory;
  p.coverage_target = coverage_target;
  p.confidence_threshold = confidence_threshold;
  p.max_iterations = max_iterations;
  p.update = update;
  p.validate();
  return p;
}

Rotation parse_rotation(const std::string& text) {
  const auto colon = text.find(':');
  const auto number = [&](std::string_view s) {
    double v = 0.0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size() || !std::isfinite(v)) {
      fail(ErrorCode::InvalidArgument, fmt::format("rotation '{}' is not yaw:pitch in degrees", text));
    }
    return v;
  };
  const std::string_view all(text);
  if (colon == std::string::npos) return Rotation::from_yaw_pitch(number(all), 0.0);
  return Rotation::from_yaw_pitch(number(all.substr(0, colon)), number(all.substr(colon + 1)));
}

TriangleMesh load_normalized_mesh(const fs::path& path, bool require_bakeable) {
  LoadedMesh loaded = load_mesh(path);
  if (loaded.normals_synthesized) spdlog::info("{}: synthesized vertex normals", path.string());
  if (require_bakeable && !loaded.bakeable) {
    fail(ErrorCode::NotBakeable, fmt::format("{}: mesh has no complete UV coordinates", path.string()));
  }
  return normalize_mesh(loaded.mesh);
}

ConditionResult cmd_condition(const PipelineConfig& config) {
  config.validate();
  const TriangleMesh mesh = load_normalized_mesh(config.mesh, false);
  const OrbitTrajectory trajectory = config.trajectory.build();
  const std::vector<GBuffer> frames = render_turntable(mesh, nullptr, trajectory, 0.0);

  StagedDirectory out(config.output);
  const double near = trajectory.poses.front().near;
  const double far = trajectory.poses.front().far;
  write_frames(out.path(), frames, near, far);
  save_trajectory(trajectory, out.path() / "trajectory.json");
  out.commit();
  spdlog::info("wrote {} conditioning frames to {}", frames.size(), config.output.string());
  return {trajectory, frames.size()};
}

BakeResult cmd_bake(const PipelineConfig& config, const fs::path& frames_dir, const std::optional<Rotation>& rotation) {
  config.validate();
  TriangleMesh mesh = load_normalized_mesh(config.mesh, true);
  const std::optional<Rotation> base = rotation ? rotation : stored_rotation(frames_dir);
  if (base) mesh = rotate_mesh(mesh, *base);
  const fs::path trajectory_file = frames_dir / "trajectory.json";
  if (!fs::exists(trajectory_file)) {
    fail(ErrorCode::Io, fmt::format("'{}' does not exist", trajectory_file.string()));
  }
  const OrbitTrajectory trajectory = load_trajectory(trajectory_file);
  const std::vector<ImageRgb> colors = read_color_frames(frames_dir);
  if (colors.empty()) {
    fail(ErrorCode::InvalidArgument, fmt::format("no color frames under '{}'", (frames_dir / "frames" / "color").string()));
  }
  if (colors.size() != trajectory.size()) {
    fail(ErrorCode::InvalidArgument,
         fmt::format("{} color frames but the trajectory has {} poses", colors.size(), trajectory.size()));
  }

  const std::vector<GBuffer> gbuffers = render_turntable(mesh, nullptr, trajectory, 0.0);
  const Baker baker(mesh, config.bake_config());
  BakeResult result{baker.bake_video(colors, gbuffers, trajectory), 0.0};
  const Mask occupancy = baker.layout().occupancy();
  result.coverage = coverage(result.atlas, occupancy, config.confidence_threshold);

  std::size_t occupied = 0;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < occupancy.size(); ++i) {
    if (!occupancy[i]) continue;
    ++occupied;
    if (result.atlas.confidence[i] >= config.confidence_threshold) ++covered;
  }

  StagedDirectory out(config.output);
  const AtlasFiles files = write_atlas(result.atlas, out.path(), true);
  ordered_json summary;
  summary["coverage"] = result.coverage;
  summary["confidence_threshold"] = config.confidence_threshold;
  summary["occupied_texels"] = occupied;
  summary["covered_texels"] = covered;
  summary["frame_count"] = colors.size();
  summary["atlas_resolution"] = {config.atlas_resolution.width, config.atlas_resolution.height};
  summary["penalty_scale"] = config.penalty_scale;
  summary["confidence_max"] = files.confidence_max;
  if (base) summary["rotation"] = rotation_record(*base);
  write_text_file(out.path() / "coverage.json", dump(summary));
  out.commit();
  spdlog::info("baked {} frames, coverage {:.4f}", colors.size(), result.coverage);
  return result;
}

ProgressiveResult cmd_run(const PipelineConfig& config) {
  config.validate();
  validate_generator(config.generator);
  const BakePlan plan = config.bake_plan();
  const TriangleMesh mesh = load_normalized_mesh(config.mesh, true);
  auto generator = make_generator(config, mesh);

  StagedDirectory out(config.output);
  const auto observer = [&](const IterationArtifacts& a) {
    const fs::path dir = out.path() / "iterations" / fmt::format("{:02}", a.record.iteration);
    const CameraPose& first = a.trajectory.poses.front();
    write_frames(dir / "conditioning", a.request.conditioning, first.near, first.far);
    save_trajectory(a.trajectory, dir / "conditioning" / "trajectory.json");
    write_color_frames(dir / "response", a.response.frames);
    save_trajectory(a.trajectory, dir / "response" / "trajectory.json");
    write_text_file(dir / "response" / "rotation.json", dump(rotation_record(a.record.rotation)));
    write_atlas(a.partial, dir / "partial", false);
    write_atlas(a.master, dir / "master", false);
    ordered_json record;
    record["iteration"] = a.record.iteration;
    record["rotation"] = rotation_record(a.record.rotation);
    record["coverage"] = a.record.coverage;
    record["provider"] = a.record.provider;
    write_text_file(dir / "iteration.json", dump(record));
  };
  ProgressiveResult result = progressive_texture(mesh, *generator, plan, config.bake_config(), config.prompt, observer);

  write_atlas(result.atlas, out.path() / "atlas", true);
  write_text_file(out.path() / "report.json", report_to_json(result.report));
  write_text_file(out.path() / "report.txt", report_table(result.report));
  write_text_file(out.path() / "plan.json", plan_to_json(plan));
  out.commit();
  fmt::print("{}", report_table(result.report));
  return result;
}

BakeEvaluation cmd_eval(const PipelineConfig& config, const fs::path& atlas, const fs::path& reference) {
  config.validate();
  if (!fs::exists(atlas)) fail(ErrorCode::Io, fmt::format("atlas '{}' does not exist", atlas.string()));
  if (!fs::exists(reference)) fail(ErrorCode::Io, fmt::format("reference '{}' does not exist", reference.string()));
  TriangleMesh mesh = load_normalized_mesh(config.mesh, true);
  const TextureAtlas baked = read_atlas_or_texture(atlas);

  BakeEvaluation eval;
  if (fs::is_directory(reference / "frames" / "color")) {
    if (const auto base = stored_rotation(reference)) mesh = rotate_mesh(mesh, *base);
    const fs::path trajectory_file = reference / "trajectory.json";
    const OrbitTrajectory trajectory =
        fs::exists(trajectory_file) ? load_trajectory(trajectory_file) : config.trajectory.build();
    const std::vector<ImageRgb> frames = read_color_frames(reference);
    if (frames.size() != trajectory.size()) {
      fail(ErrorCode::InvalidArgument,
           fmt::format("{} reference frames but the trajectory has {} poses", frames.size(), trajectory.size()));
    }
    eval = evaluate_bake(mesh, baked, frames, trajectory, config.confidence_threshold);
  } else {
    eval = evaluate_bake(mesh, baked, read_atlas_or_texture(reference), config.trajectory.build(),
                         config.confidence_threshold);
  }

  StagedDirectory out(config.output);
  write_text_file(out.path() / "report.txt", evaluation_text(eval));
  write_text_file(out.path() / "report.json", evaluation_json(eval));
  out.commit();
  fmt::print("mean psnr {:.4f} dB, mean ssim {:.6f}, coverage {:.4f}\n", eval.frames.mean_psnr, eval.frames.mean_ssim,
             eval.coverage);
  return eval;
}

double seeded_uniform(std::uint64_t seed, std::uint64_t asset_index, SampleStream stream, std::size_t draw) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(asset_index), static_cast<std::uint32_t>(asset_index >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::mt19937_64 engine(seq);
  engine.discard(draw);
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

Rotation seeded_rotation(std::uint64_t seed, std::uint64_t asset_index) {
  const double u1 = seeded_uniform(seed, asset_index, SampleStream::Rotation, 0);
  const double u2 = seeded_uniform(seed, asset_index, SampleStream::Rotation, 1);
  const double u3 = seeded_uniform(seed, asset_index, SampleStream::Rotation, 2);
  const double tau = 2.0 * std::numbers::pi;
  const double a = std::sqrt(1.0 - u1);
  const double b = std::sqrt(u1);
  const Eigen::Quaterniond q(b * std::cos(tau * u3), a * std::sin(tau * u2), a * std::cos(tau * u2),
                             b * std::sin(tau * u3));
  return Rotation::from_quaternion(q.normalized());
}

namespace {

std::pair<fs::path, fs::path> split_asset(const std::string& asset) {
  const auto colon = asset.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == asset.size()) return {asset, {}};
  return {asset.substr(0, colon), asset.substr(colon + 1)};
}

void build_dataset_entry(const PipelineConfig& config, std::size_t index, const std::string& asset,
                         const fs::path& dir) {
  const auto [mesh_path, texture_path] = split_asset(asset);
  const Rotation rotation = seeded_rotation(config.seed, index);
  const TriangleMesh mesh = rotate_mesh(load_normalized_mesh(mesh_path, true), rotation);
  const TextureAtlas atlas = texture_path.empty()
                                 ? fixtures::checker_atlas(config.atlas_resolution, kReferenceCheckerCells)
                                 : read_atlas_or_texture(texture_path);
  const auto lerp = [](const Range& r, double u) { return r.lo + u * (r.hi - r.lo); };
  TrajectoryParams params = config.trajectory;
  params.radius = lerp(config.radius_range, seeded_uniform(config.seed, index, SampleStream::Radius));
  params.height = lerp(config.height_range, seeded_uniform(config.seed, index, SampleStream::Height));
  params.fov_y.reset();
  const OrbitTrajectory trajectory = params.build();

  std::vector<GBuffer> frames = render_turntable(mesh, &atlas, trajectory, 0.0);
  for (GBuffer& g : frames) g.inpaint.reset();

  StagedDirectory out(dir);
  write_frames(out.path(), frames, trajectory.poses.front().near, trajectory.poses.front().far);
  save_trajectory(trajectory, out.path() / "trajectory.json");
  ordered_json sample;
  sample["asset"] = asset;
  sample["index"] = index;
  sample["seed"] = config.seed;
  sample["radius"] = params.radius;
  sample["height"] = params.height;
  sample["fov_y"] = trajectory.fov_y();
  sample["initial_rotation"] = rotation_record(rotation);
  write_text_file(out.path() / "sample.json", dump(sample));
  out.commit();
}

} // namespace

std::vector<DatasetEntry> cmd_dataset(const PipelineConfig& config, const std::vector<std::string>& assets) {
  config.validate();
  if (assets.empty()) fail(ErrorCode::InvalidArgument, "dataset needs at least one asset");
  fs::create_directories(config.output);
  std::vector<DatasetEntry> entries;
  for (std::size_t i = 0; i < assets.size(); ++i) {
    DatasetEntry entry{assets[i], fmt::format("{:04}", i), false, {}};
    try {
      build_dataset_entry(config, i, assets[i], config.output / entry.directory);
      entry.ok = true;
      spdlog::info("asset {} ({}) done", i, assets[i]);
    } catch (const Error& e) {
      entry.message = e.what();
      spdlog::warn("asset {} ({}) skipped: {}", i, assets[i], e.what());
    }
    entries.push_back(std::move(entry));
  }
  ordered_json index = ordered_json::array();
  for (const DatasetEntry& e : entries) {
    index.push_back({{"asset", e.asset}, {"directory", e.directory}, {"ok", e.ok}, {"message", e.message}});
  }
  write_text_atomic(config.output / "index.json", dump(index));
  return entries;
}

BakePlan cmd_plan(const PipelineConfig& config, const fs::path& out, const std::optional<fs::path>& base,
                  const std::vector<Rotation>& rotations) {
  config.validate();
  BakePlan plan = base ? plan_from_json(read_text_file(*base)) : config.bake_plan();
  if (!rotations.empty()) {
    plan.iterations.clear();
    for (const Rotation& r : rotations) plan.iterations.push_back({r, std::nullopt});
  }
  plan.validate();
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_text_atomic(out, plan_to_json(plan));
  return plan;
}

} // namespace tapestry
