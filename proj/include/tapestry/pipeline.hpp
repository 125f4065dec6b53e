#pragma once

#include "tapestry/bake.hpp"
#include "tapestry/fusion.hpp"
#include "tapestry/metrics.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tapestry {

enum class GeneratorKind { Oracle, Fs, Http };

GeneratorKind generator_kind_from_string(const std::string& name);
std::string to_string(GeneratorKind kind);

struct GeneratorConfig {
  GeneratorKind kind = GeneratorKind::Oracle;
  /// Oracle reference texture: atlas directory or image. Empty selects a checkerboard.
  std::filesystem::path reference;
  std::filesystem::path exchange_dir;
  std::string endpoint;
  double timeout_seconds = 1800.0;
  double poll_seconds = 0.2;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct PipelineConfig {
  std::filesystem::path mesh;
  std::filesystem::path output;
  TrajectoryParams trajectory;
  Resolution atlas_resolution{1024, 1024};
  double penalty_scale = 8.0;
  double confidence_threshold = 0.05;
  double coverage_target = 0.98;
  int max_iterations = 4;
  std::vector<double> candidate_yaws{0, 45, 90, 135, 180, 225, 270, 315};
  std::vector<double> candidate_pitches{0, -45, 45};
  ConfidenceUpdate update = ConfidenceUpdate::Additive;
  GeneratorConfig generator;
  std::string prompt;
  std::optional<std::filesystem::path> plan;
  std::uint64_t seed = 0;
  Range radius_range{1.5, 2.5};
  Range height_range{0.0, 1.5};

  /// Throws InvalidArgument on out-of-range values.
  void validate() const;
  BakeConfig bake_config() const;
  /// Plan from the plan file if one is set, otherwise from the flat fields.
  BakePlan bake_plan() const;
};

/// Parses "yaw:pitch" in degrees; a bare "yaw" means pitch 0.
Rotation parse_rotation(const std::string& text);

/// Loads and normalizes the mesh. `require_bakeable` rejects meshes without UVs.
TriangleMesh load_normalized_mesh(const std::filesystem::path& path, bool require_bakeable);

struct ConditionResult {
  OrbitTrajectory trajectory;
  std::size_t frame_count = 0;
};

/// <output>/frames/{normal,position,depth,mask}/NNNN.png and <output>/trajectory.json.
ConditionResult cmd_condition(const PipelineConfig& config);

struct BakeResult {
  TextureAtlas atlas;
  double coverage = 0.0;
};

/// Bakes <frames_dir>/frames/color against <frames_dir>/trajectory.json into
/// the atlas directory <output>, with a coverage.json summary. Without an
/// explicit rotation, <frames_dir>/rotation.json or the initial rotation in
/// <frames_dir>/sample.json is applied to the mesh when present.
BakeResult cmd_bake(const PipelineConfig& config, const std::filesystem::path& frames_dir,
                    const std::optional<Rotation>& rotation = std::nullopt);

/// Progressive texturing. <output>/iterations/NN/ holds each pass's
/// conditioning, response and atlases; <output>/atlas the final atlas;
/// <output>/report.{json,txt} the coverage history.
ProgressiveResult cmd_run(const PipelineConfig& config);

/// Compares `atlas` against a reference atlas/texture, or a directory holding
/// frames/color reference renders (with its trajectory.json and stored base
/// rotation, as for cmd_bake). Writes <output>/report.{txt,json}.
BakeEvaluation cmd_eval(const PipelineConfig& config, const std::filesystem::path& atlas,
                        const std::filesystem::path& reference);

struct DatasetEntry {
  std::string asset;
  std::string directory;
  bool ok = false;
  std::string message;
};

/// Assets are "mesh" or "mesh:texture". Each asset gets seeded r, z and an
/// initial rotation, auto FOV, geometry frames and reference color frames
/// under <output>/NNNN/. Failures are logged and skipped.
std::vector<DatasetEntry> cmd_dataset(const PipelineConfig& config, const std::vector<std::string>& assets);

/// Writes the plan built from the config to `out`. With `base`, that plan is
/// loaded first and `rotations`, when non-empty, replaces its iterations.
BakePlan cmd_plan(const PipelineConfig& config, const std::filesystem::path& out,
                  const std::optional<std::filesystem::path>& base, const std::vector<Rotation>& rotations);

/// Seed splitting for dataset sampling: stream `stream` of asset `asset_index`.
enum class SampleStream : std::uint32_t { Radius = 1, Height = 2, Rotation = 3 };
double seeded_uniform(std::uint64_t seed, std::uint64_t asset_index, SampleStream stream, std::size_t draw = 0);
/// Uniformly distributed rotation from the Rotation stream.
Rotation seeded_rotation(std::uint64_t seed, std::uint64_t asset_index);

} // namespace tapestry
