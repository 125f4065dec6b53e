#pragma once

#include "tapestry/geometry.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <vector>

namespace tapestry {

inline constexpr std::uint32_t kNoIndex = std::numeric_limits<std::uint32_t>::max();

struct FaceCorner {
  std::uint32_t position = kNoIndex;
  std::uint32_t normal = kNoIndex;
  std::uint32_t uv = kNoIndex;

  bool operator==(const FaceCorner&) const = default;
};

using Face = std::array<FaceCorner, 3>;

/// Indexed triangle mesh. Positions, normals and UVs are indexed independently
/// per corner, like Wavefront OBJ. UVs follow the OBJ convention (v grows up).
struct TriangleMesh {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
  std::vector<Vec2> uvs;
  std::vector<Face> faces;

  /// True when every corner of every face references a UV.
  bool has_uvs() const;

  Vec3 corner_position(std::size_t face, int corner) const {
    return positions[faces[face][corner].position];
  }
  Vec3 corner_normal(std::size_t face, int corner) const {
    return normals[faces[face][corner].normal];
  }
  Vec2 corner_uv(std::size_t face, int corner) const {
    return uvs[faces[face][corner].uv];
  }

  /// Throws MalformedGeometry / EmptyMesh when an invariant is violated.
  void validate() const;
};

/// Throws NotBakeable if the mesh lacks complete UV coordinates.
void require_uvs(const TriangleMesh& mesh, const char* operation);

/// Rigid rotation about the origin. When drawn from the candidate grid the
/// yaw/pitch indices and angles are kept for reporting.
struct Rotation {
  Eigen::Quaterniond quaternion = Eigen::Quaterniond::Identity();
  std::optional<int> yaw_index;
  std::optional<int> pitch_index;
  double yaw_degrees = 0.0;
  double pitch_degrees = 0.0;

  static Rotation identity() { return {}; }
  /// Pitch about +y first, then yaw about the +z (world up) axis.
  static Rotation from_yaw_pitch(double yaw_degrees, double pitch_degrees);
  static Rotation from_quaternion(const Eigen::Quaterniond& q);

  Mat3 matrix() const { return quaternion.toRotationMatrix(); }
  Rotation inverse() const;
  Rotation then(const Rotation& next) const;
  bool is_identity(double tol = 1e-12) const;
};

/// Default candidate grid: yaw 0..315 step 45 crossed with pitch {0, -45, 45},
/// pitch-major, so the level orientations come first.
std::vector<Rotation> default_rotation_candidates();
std::vector<Rotation> rotation_grid(const std::vector<double>& yaws_degrees,
                                    const std::vector<double>& pitches_degrees);

struct LoadedMesh {
  TriangleMesh mesh;
  bool bakeable = false;
  bool normals_synthesized = false;
};

/// Loads Wavefront OBJ (.obj) or binary glTF (.glb) by extension.
LoadedMesh load_mesh(const std::filesystem::path& path);
LoadedMesh load_obj(const std::filesystem::path& path);
LoadedMesh load_obj_from_string(const std::string& text);
LoadedMesh load_glb(const std::filesystem::path& path);
LoadedMesh load_glb_from_bytes(const std::string& bytes);

void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path);

/// Replaces normals with area-weighted per-position normals and re-indexes
/// every corner's normal to its position index.
void compute_vertex_normals(TriangleMesh& mesh);

/// Centers the bounding box on the origin and scales the farthest vertex to radius 1.
TriangleMesh normalize_mesh(const TriangleMesh& mesh);
TriangleMesh rotate_mesh(const TriangleMesh& mesh, const Rotation& rotation);

double bounding_radius(const TriangleMesh& mesh);

} // namespace tapestry
