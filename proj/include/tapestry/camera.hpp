#pragma once

#include "tapestry/geometry.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tapestry {

/// Pinhole camera with square pixels. Camera axes follow the x-right, y-down,
/// z-forward convention; `rotation` maps world directions into that frame.
struct CameraPose {
  Vec3 position = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
  double fov_y = 0.0;
  Resolution resolution;
  double near = 0.0;
  double far = 0.0;

  Vec3 right() const { return rotation.row(0).transpose(); }
  Vec3 down() const { return rotation.row(1).transpose(); }
  Vec3 forward() const { return rotation.row(2).transpose(); }

  /// Focal length in pixels, derived from the vertical field of view.
  double focal_px() const;
  Vec2 principal_point() const {
    return {0.5 * resolution.width, 0.5 * resolution.height};
  }

  Mat4 world_to_camera() const;
  static CameraPose from_world_to_camera(const Mat4& m, double fov_y, Resolution res,
                                         double near, double far);

  /// Throws InvalidArgument when an invariant is violated.
  void validate() const;
};

/// Builds a pose at `eye` looking at `target` with the given world up vector.
CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& world_up, double fov_y,
                   Resolution resolution, double near, double far);

struct Projection {
  Vec2 pixel = Vec2::Zero();  // continuous pixel coordinates; pixel (i, j) has its center at (i+0.5, j+0.5)
  double depth = 0.0;         // distance along the forward axis
  bool in_front = false;      // false when the point is at or behind the camera plane

  bool inside(Resolution res) const {
    return in_front && pixel.x() >= 0.0 && pixel.y() >= 0.0 && pixel.x() < res.width &&
           pixel.y() < res.height;
  }
};

Projection project(const CameraPose& pose, const Vec3& world_point);
Vec3 unproject(const CameraPose& pose, const Vec2& pixel, double depth);

struct ClipRange {
  double near = 0.0;
  double far = 0.0;
};

/// Default clip range around a bounding sphere seen from `distance`.
ClipRange default_clip_range(double distance, double bound_radius);

struct OrbitTrajectory {
  double radius = 0.0;
  double height = 0.0;
  int frame_count = 0;
  std::vector<CameraPose> poses;

  double fov_y() const { return poses.empty() ? 0.0 : poses.front().fov_y; }
  Resolution resolution() const { return poses.empty() ? Resolution{} : poses.front().resolution; }
  std::size_t size() const { return poses.size(); }
};

inline constexpr int kDefaultFrameCount = 61;

/// Position of frame `t` on the circular orbit (r cos(2 pi t / T), r sin(2 pi t / T), z).
Vec3 orbit_position(double radius, double height, int frame_count, double t);

/// All poses look at the origin with +z up. Without an explicit clip range the
/// default range around a sphere of `bound_radius` is used.
OrbitTrajectory orbit_trajectory(double radius, double height, int frame_count,
                                 Resolution resolution, double fov_y,
                                 std::optional<ClipRange> clip = std::nullopt,
                                 double bound_radius = 1.0);

/// 2 atan(bound_radius * margin / camera_distance).
double compute_fov(double camera_distance, double bound_radius, double margin);

/// Trajectory file: JSON with scalar parameters and per-frame row-major
/// world-to-camera matrices plus the camera position.
std::string trajectory_to_json(const OrbitTrajectory& trajectory);
OrbitTrajectory trajectory_from_json(const std::string& text);
void save_trajectory(const OrbitTrajectory& trajectory, const std::filesystem::path& path);
OrbitTrajectory load_trajectory(const std::filesystem::path& path);

} // namespace tapestry
