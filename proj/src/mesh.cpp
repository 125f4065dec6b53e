#include "tapestry/mesh.hpp"

#include "tapestry/error.hpp"

#include <fmt/format.h>

#include <cmath>

namespace tapestry {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool finite(const Vec3& v) { return v.allFinite(); }

} // namespace

bool TriangleMesh::has_uvs() const {
  if (uvs.empty() || faces.empty()) return false;
  for (const Face& f : faces) {
    for (const FaceCorner& c : f) {
      if (c.uv == kNoIndex) return false;
    }
  }
  return true;
}

void TriangleMesh::validate() const {
  if (faces.empty()) fail(ErrorCode::EmptyMesh, "mesh has zero faces");
  for (const Vec3& p : positions) {
    if (!finite(p)) fail(ErrorCode::MalformedGeometry, "non-finite vertex position");
  }
  for (const Vec3& n : normals) {
    if (!finite(n)) fail(ErrorCode::MalformedGeometry, "non-finite normal");
    if (std::abs(n.norm() - 1.0) > 1e-4) {
      fail(ErrorCode::MalformedGeometry, "normal is not unit length");
    }
  }
  for (const Vec2& uv : uvs) {
    if (!uv.allFinite()) fail(ErrorCode::MalformedGeometry, "non-finite uv");
  }
  for (std::size_t i = 0; i < faces.size(); ++i) {
    for (const FaceCorner& c : faces[i]) {
      if (c.position >= positions.size()) {
        fail(ErrorCode::MalformedGeometry,
             fmt::format("face {} position index {} out of range", i, c.position));
      }
      if (c.normal >= normals.size()) {
        fail(ErrorCode::MalformedGeometry,
             fmt::format("face {} normal index {} out of range", i, c.normal));
      }
      if (c.uv != kNoIndex && c.uv >= uvs.size()) {
        fail(ErrorCode::MalformedGeometry,
             fmt::format("face {} uv index {} out of range", i, c.uv));
      }
    }
  }
}

void require_uvs(const TriangleMesh& mesh, const char* operation) {
  if (!mesh.has_uvs()) {
    fail(ErrorCode::NotBakeable,
         fmt::format("{} requires a mesh with UV coordinates on every face", operation));
  }
}

Rotation Rotation::from_yaw_pitch(double yaw_deg, double pitch_deg) {
  Rotation r;
  const Eigen::AngleAxisd yaw(yaw_deg * kPi / 180.0, Vec3::UnitZ());
  const Eigen::AngleAxisd pitch(pitch_deg * kPi / 180.0, Vec3::UnitY());
  r.quaternion = (Eigen::Quaterniond(yaw) * Eigen::Quaterniond(pitch)).normalized();
  r.yaw_degrees = yaw_deg;
  r.pitch_degrees = pitch_deg;
  return r;
}

Rotation Rotation::from_quaternion(const Eigen::Quaterniond& q) {
  const double n = q.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    fail(ErrorCode::InvalidArgument, "rotation quaternion must be finite and non-zero");
  }
  Rotation r;
  r.quaternion = q.normalized();
  return r;
}

Rotation Rotation::inverse() const {
  Rotation r;
  r.quaternion = quaternion.conjugate();
  r.yaw_degrees = -yaw_degrees;
  r.pitch_degrees = -pitch_degrees;
  return r;
}

Rotation Rotation::then(const Rotation& next) const {
  Rotation r;
  r.quaternion = (next.quaternion * quaternion).normalized();
  return r;
}

bool Rotation::is_identity(double tol) const {
  return std::abs(std::abs(quaternion.w()) - 1.0) <= tol;
}

std::vector<Rotation> rotation_grid(const std::vector<double>& yaws,
                                    const std::vector<double>& pitches) {
  std::vector<Rotation> out;
  out.reserve(yaws.size() * pitches.size());
  for (std::size_t p = 0; p < pitches.size(); ++p) {
    for (std::size_t y = 0; y < yaws.size(); ++y) {
      Rotation r = Rotation::from_yaw_pitch(yaws[y], pitches[p]);
      r.yaw_index = static_cast<int>(y);
      r.pitch_index = static_cast<int>(p);
      out.push_back(r);
    }
  }
  return out;
}

std::vector<Rotation> default_rotation_candidates() {
  std::vector<double> yaws;
  for (int i = 0; i < 8; ++i) yaws.push_back(45.0 * i);
  return rotation_grid(yaws, {0.0, -45.0, 45.0});
}

void compute_vertex_normals(TriangleMesh& mesh) {
  std::vector<Vec3> acc(mesh.positions.size(), Vec3::Zero());
  for (const Face& f : mesh.faces) {
    const Vec3& a = mesh.positions[f[0].position];
    const Vec3& b = mesh.positions[f[1].position];
    const Vec3& c = mesh.positions[f[2].position];
    const Vec3 n = (b - a).cross(c - a);
    for (const FaceCorner& corner : f) acc[corner.position] += n;
  }
  for (Vec3& n : acc) {
    const double len = n.norm();
    n = len > 0.0 ? Vec3(n / len) : Vec3::UnitZ();
  }
  mesh.normals = std::move(acc);
  for (Face& f : mesh.faces) {
    for (FaceCorner& c : f) c.normal = c.position;
  }
}

double bounding_radius(const TriangleMesh& mesh) {
  double r = 0.0;
  for (const Vec3& p : mesh.positions) r = std::max(r, p.norm());
  return r;
}

TriangleMesh normalize_mesh(const TriangleMesh& mesh) {
  if (mesh.positions.empty()) fail(ErrorCode::DegenerateMesh, "mesh has no vertices");
  Vec3 lo = mesh.positions.front();
  Vec3 hi = lo;
  for (const Vec3& p : mesh.positions) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 center = 0.5 * (lo + hi);
  double radius = 0.0;
  for (const Vec3& p : mesh.positions) radius = std::max(radius, (p - center).norm());
  if (!(radius > 1e-12)) {
    fail(ErrorCode::DegenerateMesh, "all vertices coincide; cannot normalize");
  }
  TriangleMesh out = mesh;
  for (Vec3& p : out.positions) p = (p - center) / radius;
  return out;
}

TriangleMesh rotate_mesh(const TriangleMesh& mesh, const Rotation& rotation) {
  TriangleMesh out = mesh;
  const Mat3 m = rotation.matrix();
  for (Vec3& p : out.positions) p = m * p;
  for (Vec3& n : out.normals) n = (m * n).normalized();
  return out;
}

} // namespace tapestry
