#pragma once

#include "tapestry/atlas.hpp"
#include "tapestry/bake.hpp"
#include "tapestry/camera.hpp"
#include "tapestry/generator.hpp"
#include "tapestry/mesh.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace tapestry {

struct TrajectoryParams {
  double radius = 2.0;
  double height = 1.0;
  int frame_count = kDefaultFrameCount;
  Resolution resolution{512, 512};
  std::optional<double> fov_y;  // automatic from the bounding sphere when empty
  double fov_margin = 1.1;

  OrbitTrajectory build(double bound_radius = 1.0) const;
};

enum class ConfidenceUpdate { Additive, Max };

struct PlannedIteration {
  Rotation rotation;
  std::optional<TrajectoryParams> trajectory;  // falls back to the plan trajectory
};

/// Progressive refinement plan. With `iterations` empty the base rotation of
/// every pass after the first is chosen greedily from `candidates`; otherwise
/// the listed rotations are used in order.
struct BakePlan {
  std::vector<PlannedIteration> iterations;
  std::vector<Rotation> candidates = default_rotation_candidates();
  TrajectoryParams trajectory;
  double coverage_target = 0.98;
  double confidence_threshold = 0.05;
  int max_iterations = 4;
  ConfidenceUpdate update = ConfidenceUpdate::Additive;

  void validate() const;
};

struct IterationRecord {
  int iteration = 0;
  Rotation rotation;
  std::optional<std::size_t> candidate_index;
  std::vector<std::size_t> candidate_scores;
  double coverage = 0.0;
  double generation_seconds = 0.0;
  std::string provider;
};

struct CoverageReport {
  double covered_fraction = 0.0;
  std::vector<IterationRecord> history;
};

/// Fraction of occupied texels whose confidence reaches the threshold.
double coverage(const TextureAtlas& atlas, const Mask& occupancy, double threshold);

/// Minimum angle weight for a texel to count as exposed by a view.
inline constexpr double kExposureAngleWeight = 0.05;

/// Number of distinct occupied texels with confidence below the threshold that
/// are visible, with angle weight above kExposureAngleWeight, from at least one
/// pose of the trajectory after rotating the mesh.
std::size_t score_rotation(const TriangleMesh& mesh, const TextureAtlas& atlas, const Rotation& rotation,
                           const OrbitTrajectory& trajectory, double threshold,
                           const UvLayout* layout = nullptr);

struct RotationChoice {
  std::size_t index = 0;
  Rotation rotation;
  std::vector<std::size_t> scores;
};

/// Highest score wins; ties go to the lowest candidate index.
RotationChoice select_base_rotation(const TriangleMesh& mesh, const TextureAtlas& atlas,
                                    const std::vector<Rotation>& candidates, const OrbitTrajectory& trajectory,
                                    double threshold, const UvLayout* layout = nullptr);

/// Confidence-weighted mean of colors; confidences add (or take the max).
TextureAtlas fuse(const TextureAtlas& a, const TextureAtlas& b,
                  ConfidenceUpdate update = ConfidenceUpdate::Additive);

struct IterationArtifacts {
  const IterationRecord& record;
  const OrbitTrajectory& trajectory;
  const GenerationRequest& request;
  const GenerationResponse& response;
  const TextureAtlas& partial;
  const TextureAtlas& master;
};

using IterationObserver = std::function<void(const IterationArtifacts&)>;

struct ProgressiveResult {
  TextureAtlas atlas;
  CoverageReport report;
};

ProgressiveResult progressive_texture(const TriangleMesh& mesh, AppearanceGenerator& generator,
                                      const BakePlan& plan, const BakeConfig& bake_config,
                                      const std::string& prompt = {},
                                      const IterationObserver& observer = {});

std::string plan_to_json(const BakePlan& plan);
BakePlan plan_from_json(const std::string& text);
std::string report_to_json(const CoverageReport& report);
std::string report_table(const CoverageReport& report);

} // namespace tapestry
