#include "tapestry/camera.hpp"

#include "tapestry/error.hpp"
#include "tapestry/util.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cmath>

namespace tapestry {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double CameraPose::focal_px() const {
  return 0.5 * resolution.height / std::tan(0.5 * fov_y);
}

Mat4 CameraPose::world_to_camera() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = -rotation * position;
  return m;
}

CameraPose CameraPose::from_world_to_camera(const Mat4& m, double fov_y, Resolution res,
                                            double near, double far) {
  CameraPose pose;
  pose.rotation = m.topLeftCorner<3, 3>();
  pose.position = -pose.rotation.transpose() * m.topRightCorner<3, 1>();
  pose.fov_y = fov_y;
  pose.resolution = res;
  pose.near = near;
  pose.far = far;
  pose.validate();
  return pose;
}

void CameraPose::validate() const {
  if (!position.allFinite() || !rotation.allFinite()) {
    fail(ErrorCode::InvalidArgument, "camera pose is not finite");
  }
  if ((rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6 ||
      std::abs(rotation.determinant() - 1.0) > 1e-6) {
    fail(ErrorCode::InvalidArgument, "camera rotation is not a right-handed orthonormal basis");
  }
  if (!(fov_y > 0.0 && fov_y < kPi)) fail(ErrorCode::InvalidArgument, "fov_y must lie in (0, pi)");
  if (!(near > 0.0 && near < far)) fail(ErrorCode::InvalidArgument, "require 0 < near < far");
  if (!resolution.valid()) fail(ErrorCode::InvalidArgument, "resolution must be positive");
}

CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& world_up, double fov_y,
                   Resolution resolution, double near, double far) {
  const Vec3 f = target - eye;
  if (!(f.norm() > 0.0)) fail(ErrorCode::InvalidArgument, "look_at: eye coincides with target");
  const Vec3 forward = f.normalized();
  const Vec3 r = forward.cross(world_up);
  if (r.norm() < 1e-12) {
    fail(ErrorCode::InvalidArgument, "look_at: view direction is parallel to the up vector");
  }
  const Vec3 right = r.normalized();
  const Vec3 down = forward.cross(right);
  CameraPose pose;
  pose.position = eye;
  pose.rotation.row(0) = right.transpose();
  pose.rotation.row(1) = down.transpose();
  pose.rotation.row(2) = forward.transpose();
  pose.fov_y = fov_y;
  pose.resolution = resolution;
  pose.near = near;
  pose.far = far;
  pose.validate();
  return pose;
}

Projection project(const CameraPose& pose, const Vec3& world_point) {
  const Vec3 c = pose.rotation * (world_point - pose.position);
  Projection p;
  p.depth = c.z();
  p.in_front = c.z() > 0.0;
  if (p.in_front) {
    const double f = pose.focal_px();
    p.pixel = pose.principal_point() + f * Vec2(c.x() / c.z(), c.y() / c.z());
  }
  return p;
}

Vec3 unproject(const CameraPose& pose, const Vec2& pixel, double depth) {
  const double f = pose.focal_px();
  const Vec2 d = (pixel - pose.principal_point()) / f;
  const Vec3 c(d.x() * depth, d.y() * depth, depth);
  return pose.rotation.transpose() * c + pose.position;
}

ClipRange default_clip_range(double distance, double bound_radius) {
  ClipRange clip{distance - 1.5 * bound_radius, distance + 1.5 * bound_radius};
  clip.near = std::max(clip.near, 1e-3 * distance);
  return clip;
}

Vec3 orbit_position(double radius, double height, int frame_count, double t) {
  const double phase = 2.0 * kPi * t / frame_count;
  return {radius * std::cos(phase), radius * std::sin(phase), height};
}

OrbitTrajectory orbit_trajectory(double radius, double height, int frame_count,
                                 Resolution resolution, double fov_y,
                                 std::optional<ClipRange> clip, double bound_radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    fail(ErrorCode::InvalidArgument, "orbit radius must be positive (camera on the z axis is degenerate)");
  }
  if (!std::isfinite(height)) fail(ErrorCode::InvalidArgument, "orbit height must be finite");
  if (frame_count < 2) fail(ErrorCode::InvalidArgument, "orbit needs at least 2 frames");
  const double distance = std::hypot(radius, height);
  const ClipRange range = clip.value_or(default_clip_range(distance, bound_radius));

  OrbitTrajectory traj;
  traj.radius = radius;
  traj.height = height;
  traj.frame_count = frame_count;
  traj.poses.reserve(frame_count);
  for (int t = 0; t < frame_count; ++t) {
    traj.poses.push_back(look_at(orbit_position(radius, height, frame_count, t), Vec3::Zero(),
                                 Vec3::UnitZ(), fov_y, resolution, range.near, range.far));
  }
  return traj;
}

double compute_fov(double camera_distance, double bound_radius, double margin) {
  const double inflated = bound_radius * margin;
  if (!(inflated > 0.0)) fail(ErrorCode::InvalidArgument, "bound radius and margin must be positive");
  if (!(camera_distance > inflated)) {
    fail(ErrorCode::InvalidArgument,
         fmt::format("camera distance {} lies inside the inflated bounding sphere {}",
                     camera_distance, inflated));
  }
  return 2.0 * std::atan(inflated / camera_distance);
}

std::string trajectory_to_json(const OrbitTrajectory& trajectory) {
  nlohmann::ordered_json j;
  const Resolution res = trajectory.resolution();
  j["radius"] = trajectory.radius;
  j["height"] = trajectory.height;
  j["frame_count"] = trajectory.frame_count;
  j["fov_y"] = trajectory.fov_y();
  j["resolution"] = {res.width, res.height};
  j["near"] = trajectory.poses.empty() ? 0.0 : trajectory.poses.front().near;
  j["far"] = trajectory.poses.empty() ? 0.0 : trajectory.poses.front().far;
  auto frames = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < trajectory.poses.size(); ++t) {
    const Mat4 m = trajectory.poses[t].world_to_camera();
    std::vector<double> rows;
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) rows.push_back(m(r, c));
    }
    const Vec3& c = trajectory.poses[t].position;
    frames.push_back({{"t", t}, {"world_to_camera", rows}, {"position", {c.x(), c.y(), c.z()}}});
  }
  j["frames"] = std::move(frames);
  return j.dump(2) + "\n";
}

OrbitTrajectory trajectory_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    OrbitTrajectory traj;
    traj.radius = j.at("radius").get<double>();
    traj.height = j.at("height").get<double>();
    traj.frame_count = j.at("frame_count").get<int>();
    const double fov = j.at("fov_y").get<double>();
    const Resolution res{j.at("resolution").at(0).get<int>(), j.at("resolution").at(1).get<int>()};
    const double near = j.at("near").get<double>();
    const double far = j.at("far").get<double>();
    const auto& frames = j.at("frames");
    if (static_cast<int>(frames.size()) != traj.frame_count) {
      fail(ErrorCode::InvalidArgument, "trajectory frame list does not match frame_count");
    }
    for (const auto& f : frames) {
      const auto& v = f.at("world_to_camera");
      if (v.size() != 16) fail(ErrorCode::InvalidArgument, "world_to_camera must have 16 entries");
      Mat4 m;
      for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) m(r, c) = v.at(r * 4 + c).get<double>();
      }
      CameraPose pose = CameraPose::from_world_to_camera(m, fov, res, near, far);
      if (f.contains("position")) {
        const auto& c = f.at("position");
        const Vec3 position(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
        if ((position - pose.position).norm() > 1e-9 * (1.0 + position.norm())) {
          fail(ErrorCode::InvalidArgument, "trajectory frame position disagrees with its matrix");
        }
        pose.position = position;
      }
      traj.poses.push_back(pose);
    }
    return traj;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("malformed trajectory file: ") + e.what());
  }
}

void save_trajectory(const OrbitTrajectory& trajectory, const std::filesystem::path& path) {
  write_text_file(path, trajectory_to_json(trajectory));
}

OrbitTrajectory load_trajectory(const std::filesystem::path& path) {
  return trajectory_from_json(read_text_file(path));
}

} // namespace tapestry
