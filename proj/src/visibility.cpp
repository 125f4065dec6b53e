#include "tapestry/visibility.hpp"

#include "tapestry/error.hpp"

#include <algorithm>
#include <cmath>

namespace tapestry {

namespace {

constexpr int kLeafSize = 4;
constexpr int kBins = 12;
constexpr int kMaxStack = 128;

double surface_area(const Eigen::AlignedBox3d& b) {
  if (b.isEmpty()) return 0.0;
  const Vec3 d = b.sizes();
  return 2.0 * (d.x() * d.y() + d.y() * d.z() + d.z() * d.x());
}

// Slab test; returns entry distance or +inf on miss.
inline double hit_box(const Eigen::AlignedBox3d& box, const Vec3& origin, const Vec3& inv_dir,
                      double t_min, double t_max) {
  double lo = t_min;
  double hi = t_max;
  for (int k = 0; k < 3; ++k) {
    double t0 = (box.min()[k] - origin[k]) * inv_dir[k];
    double t1 = (box.max()[k] - origin[k]) * inv_dir[k];
    if (std::isnan(t0) || std::isnan(t1)) {
      // Ray parallel to and on a slab boundary: treat as inside that slab.
      if (origin[k] < box.min()[k] || origin[k] > box.max()[k]) return std::numeric_limits<double>::infinity();
      continue;
    }
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1 * (1.0 + 4e-16));
    if (lo > hi) return std::numeric_limits<double>::infinity();
  }
  return lo;
}

} // namespace

bool intersect_triangle(const Vec3& origin, const Vec3& direction, const Vec3& a, const Vec3& edge1,
                        const Vec3& edge2, double& t, double& u, double& v) {
  const Vec3 p = direction.cross(edge2);
  const double det = edge1.dot(p);
  if (det == 0.0 || !std::isfinite(det)) return false;
  const double inv_det = 1.0 / det;
  const Vec3 s = origin - a;
  u = s.dot(p) * inv_det;
  if (u < -kEdgeTolerance || u > 1.0 + kEdgeTolerance) return false;
  const Vec3 q = s.cross(edge1);
  v = direction.dot(q) * inv_det;
  if (v < -kEdgeTolerance || u + v > 1.0 + kEdgeTolerance) return false;
  t = edge2.dot(q) * inv_det;
  return true;
}

VisibilityIndex::VisibilityIndex(const TriangleMesh& mesh) {
  if (mesh.faces.empty()) fail(ErrorCode::EmptyMesh, "cannot index a mesh without faces");
  triangles_.reserve(mesh.faces.size());
  std::vector<Vec3> centroids;
  centroids.reserve(mesh.faces.size());
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    const Vec3 a = mesh.corner_position(i, 0);
    const Vec3 b = mesh.corner_position(i, 1);
    const Vec3 c = mesh.corner_position(i, 2);
    triangles_.push_back({a, b - a, c - a, static_cast<std::int32_t>(i)});
    centroids.push_back((a + b + c) / 3.0);
  }
  nodes_.reserve(2 * triangles_.size());
  build(0, static_cast<std::int32_t>(triangles_.size()), centroids, 1);
}

std::int32_t VisibilityIndex::build(std::int32_t begin, std::int32_t end, std::vector<Vec3>& centroids,
                                    int depth) {
  depth_ = std::max(depth_, depth);
  const std::int32_t node_index = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox3d box;
  Eigen::AlignedBox3d centroid_box;
  for (std::int32_t i = begin; i < end; ++i) {
    const Triangle& t = triangles_[i];
    box.extend(t.a).extend(t.a + t.edge1).extend(t.a + t.edge2);
    centroid_box.extend(centroids[i]);
  }
  // Padded so rays grazing a triangle edge on the box boundary still reach the triangle test.
  const double pad = 1e-9 * std::max(1.0, box.min().cwiseAbs().cwiseMax(box.max().cwiseAbs()).maxCoeff());
  nodes_[node_index].box = Eigen::AlignedBox3d(box.min().array() - pad, box.max().array() + pad);

  const std::int32_t count = end - begin;
  const auto make_leaf = [&] {
    nodes_[node_index].first = begin;
    nodes_[node_index].count = count;
    return node_index;
  };
  if (count <= kLeafSize || depth >= kMaxStack - 2) return make_leaf();

  int axis = 0;
  centroid_box.sizes().maxCoeff(&axis);
  const double lo = centroid_box.min()[axis];
  const double extent = centroid_box.max()[axis] - lo;
  if (!(extent > 0.0)) return make_leaf();

  const auto bin_of = [&](const Vec3& c) {
    return std::min(kBins - 1, static_cast<int>(kBins * (c[axis] - lo) / extent));
  };
  std::array<Eigen::AlignedBox3d, kBins> bin_box;
  std::array<int, kBins> bin_count{};
  for (std::int32_t i = begin; i < end; ++i) {
    const int b = bin_of(centroids[i]);
    const Triangle& t = triangles_[i];
    bin_box[b].extend(t.a).extend(t.a + t.edge1).extend(t.a + t.edge2);
    ++bin_count[b];
  }
  double best_cost = std::numeric_limits<double>::infinity();
  int best_split = -1;
  for (int split = 1; split < kBins; ++split) {
    Eigen::AlignedBox3d left;
    Eigen::AlignedBox3d right;
    int nl = 0;
    int nr = 0;
    for (int b = 0; b < split; ++b) {
      if (bin_count[b]) left.extend(bin_box[b]);
      nl += bin_count[b];
    }
    for (int b = split; b < kBins; ++b) {
      if (bin_count[b]) right.extend(bin_box[b]);
      nr += bin_count[b];
    }
    if (nl == 0 || nr == 0) continue;
    const double cost = surface_area(left) * nl + surface_area(right) * nr;
    if (cost < best_cost) {
      best_cost = cost;
      best_split = split;
    }
  }
  if (best_split < 0) return make_leaf();

  // Stable partition keeps the build deterministic.
  std::vector<std::int32_t> order(count);
  for (std::int32_t i = 0; i < count; ++i) order[i] = begin + i;
  const auto mid_it = std::stable_partition(order.begin(), order.end(), [&](std::int32_t i) {
    return bin_of(centroids[i]) < best_split;
  });
  std::vector<Triangle> tris(count);
  std::vector<Vec3> cents(count);
  for (std::int32_t i = 0; i < count; ++i) {
    tris[i] = triangles_[order[i]];
    cents[i] = centroids[order[i]];
  }
  std::copy(tris.begin(), tris.end(), triangles_.begin() + begin);
  std::copy(cents.begin(), cents.end(), centroids.begin() + begin);
  const std::int32_t mid = begin + static_cast<std::int32_t>(mid_it - order.begin());

  build(begin, mid, centroids, depth + 1);
  const std::int32_t right = build(mid, end, centroids, depth + 1);
  nodes_[node_index].first = right;
  nodes_[node_index].count = 0;
  return node_index;
}

std::optional<RayHit> VisibilityIndex::nearest_hit(const Vec3& origin, const Vec3& direction,
                                                   double t_min, double t_max) const {
  const Vec3 inv_dir = direction.cwiseInverse();
  RayHit best;
  best.distance = t_max;
  bool found = false;
  std::array<std::int32_t, kMaxStack> stack;
  int top = 0;
  if (hit_box(nodes_[0].box, origin, inv_dir, t_min, t_max) == std::numeric_limits<double>::infinity()) {
    return std::nullopt;
  }
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (node.count > 0) {
      for (std::int32_t i = node.first; i < node.first + node.count; ++i) {
        const Triangle& tri = triangles_[i];
        double t, u, v;
        if (!intersect_triangle(origin, direction, tri.a, tri.edge1, tri.edge2, t, u, v)) continue;
        if (t <= t_min) continue;
        // Equal distances resolve to the lower face index so results do not depend on tree layout.
        if (t < best.distance || (t == best.distance && found && tri.face < best.face)) {
          best = {tri.face, t, u, v};
          found = true;
        }
      }
      continue;
    }
    const std::int32_t left = static_cast<std::int32_t>(&node - nodes_.data()) + 1;
    const std::int32_t right = node.first;
    const double tl = hit_box(nodes_[left].box, origin, inv_dir, t_min, best.distance);
    const double tr = hit_box(nodes_[right].box, origin, inv_dir, t_min, best.distance);
    const bool hl = tl != std::numeric_limits<double>::infinity();
    const bool hr = tr != std::numeric_limits<double>::infinity();
    // Push the farther child first so the nearer one is visited next.
    if (hl && hr) {
      if (tl <= tr) {
        stack[top++] = right;
        stack[top++] = left;
      } else {
        stack[top++] = left;
        stack[top++] = right;
      }
    } else if (hl) {
      stack[top++] = left;
    } else if (hr) {
      stack[top++] = right;
    }
  }
  if (!found) return std::nullopt;
  return best;
}

bool VisibilityIndex::occluded(const Vec3& origin, const Vec3& direction, double t_min, double t_max,
                               std::int32_t ignore_face) const {
  const Vec3 inv_dir = direction.cwiseInverse();
  std::array<std::int32_t, kMaxStack> stack;
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (hit_box(node.box, origin, inv_dir, t_min, t_max) == std::numeric_limits<double>::infinity()) continue;
    if (node.count > 0) {
      for (std::int32_t i = node.first; i < node.first + node.count; ++i) {
        const Triangle& tri = triangles_[i];
        if (tri.face == ignore_face) continue;
        double t, u, v;
        if (intersect_triangle(origin, direction, tri.a, tri.edge1, tri.edge2, t, u, v) && t > t_min &&
            t < t_max) {
          return true;
        }
      }
      continue;
    }
    stack[top++] = node.first;
    stack[top++] = static_cast<std::int32_t>(&node - nodes_.data()) + 1;
  }
  return false;
}

} // namespace tapestry
