#pragma once

#include "tapestry/geometry.hpp"
#include "tapestry/mesh.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace tapestry {

struct RayHit {
  std::int32_t face = -1;
  double distance = std::numeric_limits<double>::infinity();
  double u = 0.0;  // barycentric weight of corner 1
  double v = 0.0;  // barycentric weight of corner 2
};

/// Bounding-volume hierarchy over mesh triangles (binned SAH, up to 4
/// triangles per leaf). Immutable after construction.
class VisibilityIndex {
 public:
  explicit VisibilityIndex(const TriangleMesh& mesh);

  /// Nearest hit with distance in (t_min, t_max). `direction` need not be unit;
  /// distances are in units of its length.
  std::optional<RayHit> nearest_hit(const Vec3& origin, const Vec3& direction, double t_min = 0.0,
                                    double t_max = std::numeric_limits<double>::infinity()) const;

  /// True when any triangle other than `ignore_face` is hit in (t_min, t_max).
  bool occluded(const Vec3& origin, const Vec3& direction, double t_min, double t_max,
                std::int32_t ignore_face = -1) const;

  std::size_t triangle_count() const { return triangles_.size(); }
  std::size_t node_count() const { return nodes_.size(); }
  int depth() const { return depth_; }

 private:
  struct Triangle {
    Vec3 a;
    Vec3 edge1;
    Vec3 edge2;
    std::int32_t face;
  };
  struct Node {
    Eigen::AlignedBox3d box;
    std::int32_t first = 0;  // first triangle (leaf) or right child (interior)
    std::int32_t count = 0;  // 0 for interior nodes; left child is this + 1
  };

  std::int32_t build(std::int32_t begin, std::int32_t end, std::vector<Vec3>& centroids, int depth);

  std::vector<Triangle> triangles_;
  std::vector<Node> nodes_;
  int depth_ = 0;
};

/// Barycentric slack on triangle edges, so a ray through an edge shared by
/// two faces hits at least one of them.
inline constexpr double kEdgeTolerance = 1e-12;

/// Moller-Trumbore intersection without back-face culling.
bool intersect_triangle(const Vec3& origin, const Vec3& direction, const Vec3& a, const Vec3& edge1,
                        const Vec3& edge2, double& t, double& u, double& v);

} // namespace tapestry
