#pragma once

// Shared test helpers and independent reference implementations.

#include "tapestry/atlas.hpp"
#include "tapestry/bake.hpp"
#include "tapestry/camera.hpp"
#include "tapestry/geometry.hpp"
#include "tapestry/mesh.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>
#include <unistd.h>

namespace test {

using namespace tapestry;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("tapestry-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

struct OracleHit {
  int face = -1;
  double t = INFINITY;
  Vec3 bary = Vec3::Zero();  // weights of corners 0, 1, 2
};

// Plane intersection followed by signed sub-triangle areas. Ties keep the
// lower face index.
inline OracleHit brute_force_hit(const TriangleMesh& mesh, const Vec3& o, const Vec3& d) {
  OracleHit best;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Vec3 a = mesh.corner_position(f, 0);
    const Vec3 b = mesh.corner_position(f, 1);
    const Vec3 c = mesh.corner_position(f, 2);
    const Vec3 n = (b - a).cross(c - a);
    const double nn = n.squaredNorm();
    const double denom = n.dot(d);
    if (nn == 0.0 || std::abs(denom) < 1e-14 * std::sqrt(nn) * d.norm()) continue;
    const double t = n.dot(a - o) / denom;
    if (!(t > 0.0)) continue;
    const Vec3 p = o + t * d;
    const double wa = n.dot((b - p).cross(c - p)) / nn;
    const double wb = n.dot((c - p).cross(a - p)) / nn;
    const double wc = n.dot((a - p).cross(b - p)) / nn;
    constexpr double kEdge = -1e-12;
    if (wa < kEdge || wb < kEdge || wc < kEdge) continue;
    if (t < best.t) best = {static_cast<int>(f), t, Vec3(wa, wb, wc)};
  }
  return best;
}

// Hand-built pinhole: forward toward the target, image x along forward x up,
// image y pointing down, principal point at the image center.
struct PinholeOracle {
  Vec3 eye;
  Vec3 forward;
  Vec3 right;
  Vec3 up;
  double focal;
  double cx;
  double cy;

  PinholeOracle(const Vec3& eye_, const Vec3& target, const Vec3& world_up, double fov_y, Resolution res)
      : eye(eye_) {
    forward = (target - eye).normalized();
    right = forward.cross(world_up).normalized();
    up = right.cross(forward);
    focal = res.height / 2.0 / std::tan(fov_y / 2.0);
    cx = res.width / 2.0;
    cy = res.height / 2.0;
  }

  Vec2 project(const Vec3& p) const {
    const Vec3 q = p - eye;
    const double z = q.dot(forward);
    return {cx + focal * q.dot(right) / z, cy - focal * q.dot(up) / z};
  }

  Vec3 ray(double px, double py) const {
    return (forward * focal + right * (px - cx) - up * (py - cy)).normalized();
  }
};

// Bilinear atlas lookup written out longhand: texel (i, j) is centered at
// u = (i + 0.5) / W, v = 1 - (j + 0.5) / H, coordinates clamped at borders.
inline Vec3 oracle_atlas_color(const TextureAtlas& atlas, const Vec2& uv) {
  const int w = atlas.resolution().width;
  const int h = atlas.resolution().height;
  const double x = uv.x() * w - 0.5;
  const double y = (1.0 - uv.y()) * h - 0.5;
  const int i0 = static_cast<int>(std::floor(x));
  const int j0 = static_cast<int>(std::floor(y));
  const double fx = x - i0;
  const double fy = y - j0;
  auto at = [&](int i, int j) {
    i = std::min(std::max(i, 0), w - 1);
    j = std::min(std::max(j, 0), h - 1);
    return atlas.color(i, j);
  };
  return (1 - fx) * (1 - fy) * at(i0, j0) + fx * (1 - fy) * at(i0 + 1, j0) + (1 - fx) * fy * at(i0, j0 + 1) +
         fx * fy * at(i0 + 1, j0 + 1);
}

// Ray-cast color of pixel (x, y) through its center.
inline std::optional<Vec3> raycast_color(const TriangleMesh& mesh, const TextureAtlas& atlas,
                                         const PinholeOracle& cam, int x, int y) {
  const OracleHit hit = brute_force_hit(mesh, cam.eye, cam.ray(x + 0.5, y + 0.5));
  if (hit.face < 0) return std::nullopt;
  Vec2 uv = Vec2::Zero();
  for (int k = 0; k < 3; ++k) uv += hit.bary[k] * mesh.corner_uv(hit.face, k);
  return oracle_atlas_color(atlas, uv);
}

// Windowed SSIM evaluated directly at every fully contained 11 x 11 window.
inline double ssim_direct(const std::vector<double>& a, const std::vector<double>& b, int w, int h) {
  double g[11][11];
  double sum = 0.0;
  for (int j = 0; j < 11; ++j) {
    for (int i = 0; i < 11; ++i) {
      g[j][i] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
      sum += g[j][i];
    }
  }
  const double c1 = 0.0001;
  const double c2 = 0.0009;
  double total = 0.0;
  int count = 0;
  for (int y = 0; y + 11 <= h; ++y) {
    for (int x = 0; x + 11 <= w; ++x) {
      double ma = 0, mb = 0;
      for (int j = 0; j < 11; ++j)
        for (int i = 0; i < 11; ++i) {
          ma += g[j][i] / sum * a[(y + j) * w + x + i];
          mb += g[j][i] / sum * b[(y + j) * w + x + i];
        }
      double va = 0, vb = 0, cov = 0;
      for (int j = 0; j < 11; ++j)
        for (int i = 0; i < 11; ++i) {
          const double da = a[(y + j) * w + x + i] - ma;
          const double db = b[(y + j) * w + x + i] - mb;
          va += g[j][i] / sum * da * da;
          vb += g[j][i] / sum * db * db;
          cov += g[j][i] / sum * da * db;
        }
      total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return total / count;
}

inline TriangleMesh merge(const TriangleMesh& a, const TriangleMesh& b) {
  TriangleMesh m = a;
  const auto np = static_cast<std::uint32_t>(a.positions.size());
  const auto nn = static_cast<std::uint32_t>(a.normals.size());
  const auto nt = static_cast<std::uint32_t>(a.uvs.size());
  m.positions.insert(m.positions.end(), b.positions.begin(), b.positions.end());
  m.normals.insert(m.normals.end(), b.normals.begin(), b.normals.end());
  m.uvs.insert(m.uvs.end(), b.uvs.begin(), b.uvs.end());
  for (Face f : b.faces) {
    for (FaceCorner& c : f) {
      c.position += np;
      c.normal += nn;
      c.uv += nt;
    }
    m.faces.push_back(f);
  }
  return m;
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-9);
  return v.normalized();
}

inline TextureAtlas random_atlas(std::mt19937_64& rng, Resolution res, double zero_fraction = 0.2) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TextureAtlas atlas(res);
  for (std::size_t i = 0; i < atlas.color.size(); ++i) {
    if (u(rng) < zero_fraction) continue;
    atlas.confidence[i] = 5.0 * u(rng);
    atlas.color[i] = Vec3(u(rng), u(rng), u(rng));
  }
  return atlas;
}


// Rz(yaw) * Ry(pitch) from degrees.
inline Mat3 yaw_pitch_matrix(double yaw_degrees, double pitch_degrees) {
  const double y = yaw_degrees * M_PI / 180.0;
  const double p = pitch_degrees * M_PI / 180.0;
  Mat3 rz;
  rz << std::cos(y), -std::sin(y), 0, std::sin(y), std::cos(y), 0, 0, 0, 1;
  Mat3 ry;
  ry << std::cos(p), 0, std::sin(p), 0, 1, 0, -std::sin(p), 0, std::cos(p);
  return rz * ry;
}

// Candidate score by exhaustive search: every under-confident texel of the
// layout, every pose, every triangle as a potential occluder.
inline std::size_t brute_force_score(const TriangleMesh& mesh, const UvLayout& layout, const TextureAtlas& atlas,
                                     double yaw_degrees, double pitch_degrees, const OrbitTrajectory& trajectory,
                                     double threshold) {
  const Mat3 r = yaw_pitch_matrix(yaw_degrees, pitch_degrees);
  std::vector<std::array<Vec3, 3>> tris(mesh.faces.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f)
    for (int k = 0; k < 3; ++k) tris[f][k] = r * mesh.corner_position(f, k);

  const auto blocked = [&](const Vec3& o, const Vec3& target, int own) {
    const Vec3 d = target - o;
    const double limit = 1.0 - 1e-4;
    for (std::size_t f = 0; f < tris.size(); ++f) {
      if (static_cast<int>(f) == own) continue;
      const auto& [a, b, c] = tris[f];
      const Vec3 n = (b - a).cross(c - a);
      const double nn = n.squaredNorm();
      const double denom = n.dot(d);
      if (nn == 0.0 || denom == 0.0) continue;
      const double t = n.dot(a - o) / denom;
      if (!(t > 0.0 && t < limit)) continue;
      const Vec3 p = o + t * d;
      constexpr double kEdge = -1e-12;
      if (n.dot((b - p).cross(c - p)) / nn < kEdge || n.dot((c - p).cross(a - p)) / nn < kEdge ||
          n.dot((a - p).cross(b - p)) / nn < kEdge)
        continue;
      return true;
    }
    return false;
  };

  std::size_t count = 0;
  for (const TexelSample& s : layout.texels) {
    if (atlas.confidence[s.texel] >= threshold) continue;
    Vec3 p = Vec3::Zero();
    Vec3 n = Vec3::Zero();
    for (int k = 0; k < 3; ++k) {
      p += s.barycentric[k] * mesh.corner_position(s.face, k);
      n += s.barycentric[k] * mesh.corner_normal(s.face, k);
    }
    if (n.squaredNorm() == 0.0) continue;
    p = r * p;
    n = (r * n).normalized();
    for (const CameraPose& pose : trajectory.poses) {
      const double c = std::max(0.0, n.dot((pose.position - p).normalized()));
      if (c * c * c * c <= 0.05) continue;
      const PinholeOracle cam(pose.position, Vec3::Zero(), Vec3::UnitZ(), pose.fov_y, pose.resolution);
      if ((p - cam.eye).dot(cam.forward) <= 0.0) continue;
      const Vec2 px = cam.project(p);
      if (px.x() < 0 || px.y() < 0 || px.x() >= pose.resolution.width || px.y() >= pose.resolution.height) continue;
      if (!blocked(pose.position, p, s.face)) {
        ++count;
        break;
      }
    }
  }
  return count;
}

} // namespace test
