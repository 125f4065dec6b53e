#include "tapestry/fixtures.hpp"

#include "tapestry/bake.hpp"
#include "tapestry/error.hpp"

#include <cmath>
#include <numbers>

namespace tapestry::fixtures {

namespace {

constexpr double kPi = std::numbers::pi;

class Builder {
 public:
  explicit Builder(TriangleMesh& mesh) : mesh_(mesh) {}

  std::uint32_t vertex(const Vec3& p, const Vec3& n, const Vec2& uv) {
    mesh_.positions.push_back(p);
    mesh_.normals.push_back(n.normalized());
    mesh_.uvs.push_back(uv);
    return static_cast<std::uint32_t>(mesh_.positions.size() - 1);
  }

  void triangle(std::uint32_t a, std::uint32_t b, std::uint32_t c) {
    mesh_.faces.push_back({FaceCorner{a, a, a}, FaceCorner{b, b, b}, FaceCorner{c, c, c}});
  }

  // Grid of (nu + 1) x (nv + 1) vertices from a parametric surface over
  // [0,1]^2. `flip` reverses the winding.
  template <class Surface>
  void patch(int nu, int nv, Surface&& surface, bool flip = false) {
    std::vector<std::uint32_t> ids;
    for (int j = 0; j <= nv; ++j) {
      for (int i = 0; i <= nu; ++i) {
        const auto [p, n, uv] = surface(static_cast<double>(i) / nu, static_cast<double>(j) / nv);
        ids.push_back(vertex(p, n, uv));
      }
    }
    const auto at = [&](int i, int j) { return ids[static_cast<std::size_t>(j) * (nu + 1) + i]; };
    for (int j = 0; j < nv; ++j) {
      for (int i = 0; i < nu; ++i) {
        if (flip) {
          triangle(at(i, j), at(i + 1, j + 1), at(i + 1, j));
          triangle(at(i, j), at(i, j + 1), at(i + 1, j + 1));
        } else {
          triangle(at(i, j), at(i + 1, j), at(i + 1, j + 1));
          triangle(at(i, j), at(i + 1, j + 1), at(i, j + 1));
        }
      }
    }
  }

 private:
  TriangleMesh& mesh_;
};

struct SurfacePoint {
  Vec3 position;
  Vec3 normal;
  Vec2 uv;
};

Vec2 lerp_chart(double s, double t, double u0, double u1, double v0, double v1) {
  return {u0 + s * (u1 - u0), v0 + t * (v1 - v0)};
}

} // namespace

TriangleMesh quad(double half_size, double y) {
  TriangleMesh mesh;
  Builder b(mesh);
  const Vec3 n(0, -1, 0);
  const auto corner = [&](double x, double z) {
    return b.vertex({x, y, z}, n, {x / (2 * half_size) + 0.5, z / (2 * half_size) + 0.5});
  };
  const auto v0 = corner(-half_size, -half_size);
  const auto v1 = corner(half_size, -half_size);
  const auto v2 = corner(half_size, half_size);
  const auto v3 = corner(-half_size, half_size);
  b.triangle(v0, v1, v2);
  b.triangle(v0, v2, v3);
  return mesh;
}

TriangleMesh cube(double h) {
  TriangleMesh mesh;
  Builder b(mesh);
  // Each face: normal, two in-plane axes, chart slot in a 3 x 2 grid.
  struct Side {
    Vec3 n, s, t;
  };
  const Side sides[6] = {
      {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}},   {{-1, 0, 0}, {0, -1, 0}, {0, 0, 1}},
      {{0, 1, 0}, {-1, 0, 0}, {0, 0, 1}},  {{0, -1, 0}, {1, 0, 0}, {0, 0, 1}},
      {{0, 0, 1}, {1, 0, 0}, {0, 1, 0}},   {{0, 0, -1}, {1, 0, 0}, {0, -1, 0}},
  };
  constexpr double kPad = 0.02;
  for (int k = 0; k < 6; ++k) {
    const Side& side = sides[k];
    const double u0 = (k % 3) / 3.0 + kPad;
    const double u1 = (k % 3 + 1) / 3.0 - kPad;
    const double v0 = (k / 3) / 2.0 + kPad;
    const double v1 = (k / 3 + 1) / 2.0 - kPad;
    b.patch(1, 1, [&](double s, double t) {
      const Vec3 p = h * (side.n + (2 * s - 1) * side.s + (2 * t - 1) * side.t);
      return SurfacePoint{p, side.n, lerp_chart(s, t, u0, u1, v0, v1)};
    });
  }
  return mesh;
}

TriangleMesh uv_sphere(int segments, int rings, SphereUv mapping) {
  if (segments < 3 || rings < 2) fail(ErrorCode::InvalidArgument, "uv_sphere: need segments >= 3 and rings >= 2");
  TriangleMesh mesh;
  Builder b(mesh);
  const auto v_of = [&](double lat) {
    return mapping == SphereUv::LatLong ? lat / kPi + 0.5 : 0.5 * (std::sin(lat) + 1.0);
  };
  const auto point = [&](int i, int j) {
    const double lon = 2 * kPi * i / segments;
    const double lat = -kPi / 2 + kPi * j / rings;
    const Vec3 p(std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat));
    return b.vertex(p, p, {static_cast<double>(i) / segments, v_of(lat)});
  };
  std::vector<std::uint32_t> ids;
  for (int j = 1; j < rings; ++j) {
    for (int i = 0; i <= segments; ++i) ids.push_back(point(i, j));
  }
  const auto at = [&](int i, int j) { return ids[static_cast<std::size_t>(j - 1) * (segments + 1) + i]; };
  for (int i = 0; i < segments; ++i) {
    const double u = (i + 0.5) / segments;
    const auto south = b.vertex({0, 0, -1}, {0, 0, -1}, {u, 0.0});
    b.triangle(south, at(i + 1, 1), at(i, 1));
    for (int j = 1; j + 1 < rings; ++j) {
      b.triangle(at(i, j), at(i + 1, j), at(i + 1, j + 1));
      b.triangle(at(i, j), at(i + 1, j + 1), at(i, j + 1));
    }
    const auto north = b.vertex({0, 0, 1}, {0, 0, 1}, {u, 1.0});
    b.triangle(at(i, rings - 1), at(i + 1, rings - 1), north);
  }
  return mesh;
}

TriangleMesh mug(int segments) {
  if (segments < 8) fail(ErrorCode::InvalidArgument, "mug: need at least 8 segments");
  constexpr double kOuter = 0.5;
  constexpr double kInner = 0.45;
  constexpr double kTop = 0.6;
  constexpr double kBottom = -0.6;
  constexpr double kFloor = -0.5;
  constexpr double kHandleMajor = 0.3;
  constexpr double kHandleMinor = 0.07;

  TriangleMesh mesh;
  Builder b(mesh);
  const auto radial = [](double s) {
    const double a = 2 * kPi * s;
    return Vec3(std::cos(a), std::sin(a), 0.0);
  };
  const int rows = 8;

  // Outer wall.
  b.patch(segments, rows, [&](double s, double t) {
    const Vec3 r = radial(s);
    return SurfacePoint{kOuter * r + Vec3(0, 0, kBottom + t * (kTop - kBottom)), r,
                        lerp_chart(s, t, 0.02, 0.98, 0.70, 0.98)};
  });
  // Inner wall, facing the axis.
  b.patch(segments, rows, [&](double s, double t) {
    const Vec3 r = radial(s);
    return SurfacePoint{kInner * r + Vec3(0, 0, kFloor + t * (kTop - kFloor)), -r,
                        lerp_chart(s, t, 0.02, 0.98, 0.40, 0.68)};
  }, true);
  // Rim annulus.
  b.patch(segments, 1, [&](double s, double t) {
    const Vec3 r = radial(s);
    return SurfacePoint{(kInner + t * (kOuter - kInner)) * r + Vec3(0, 0, kTop), Vec3(0, 0, 1),
                        lerp_chart(s, t, 0.50, 0.98, 0.05, 0.17)};
  }, true);
  // Outer bottom (faces -z) and inner floor (faces +z) as disks.
  const auto disk = [&](double z, double radius, const Vec3& n, const Vec2& center, bool flip) {
    const auto hub = b.vertex({0, 0, z}, n, center);
    std::vector<std::uint32_t> ring;
    for (int i = 0; i <= segments; ++i) {
      const Vec3 r = radial(static_cast<double>(i) / segments);
      ring.push_back(b.vertex(radius * r + Vec3(0, 0, z), n, center + 0.09 * Vec2(r.x(), r.y())));
    }
    for (int i = 0; i < segments; ++i) {
      if (flip) {
        b.triangle(hub, ring[i + 1], ring[i]);
      } else {
        b.triangle(hub, ring[i], ring[i + 1]);
      }
    }
  };
  disk(kBottom, kOuter, {0, 0, -1}, {0.12, 0.11}, true);
  disk(kFloor, kInner, {0, 0, 1}, {0.35, 0.11}, false);
  // Handle: half torus in the xz plane, ends buried in the outer wall.
  const int tube = 12;
  b.patch(segments / 2, tube, [&](double s, double t) {
    const double theta = -kPi / 2 + kPi * s;
    const double phi = 2 * kPi * t;
    const Vec3 er(std::cos(theta), 0, std::sin(theta));
    const Vec3 center = Vec3(kOuter - 0.02, 0, 0) + kHandleMajor * er;
    const Vec3 n = std::cos(phi) * er + std::sin(phi) * Vec3(0, 1, 0);
    return SurfacePoint{center + kHandleMinor * n, n, lerp_chart(s, t, 0.02, 0.98, 0.22, 0.38)};
  });
  return normalize_mesh(mesh);
}

TextureAtlas checker_atlas(Resolution res, int cells, const Vec3& a, const Vec3& b) {
  if (!res.valid() || cells <= 0) fail(ErrorCode::InvalidArgument, "checker_atlas: invalid resolution or cell count");
  TextureAtlas atlas(res);
  for (int y = 0; y < res.height; ++y) {
    for (int x = 0; x < res.width; ++x) {
      const int cx = static_cast<int>(static_cast<long long>(x) * cells / res.width);
      const int cy = static_cast<int>(static_cast<long long>(y) * cells / res.height);
      atlas.color(x, y) = ((cx + cy) % 2 == 0) ? a : b;
      atlas.confidence(x, y) = 1.0;
    }
  }
  return atlas;
}

TextureAtlas paint_atlas(const TriangleMesh& mesh, Resolution res,
                         const std::function<SurfaceTexel(const Vec3&, const Vec3&)>& paint) {
  require_uvs(mesh, "paint_atlas");
  const UvLayout layout = rasterize_uv_layout(mesh, res);
  const TexelGeometry geometry = texel_geometry(mesh, layout);
  TextureAtlas atlas(res);
  for (std::size_t k = 0; k < layout.texels.size(); ++k) {
    const SurfaceTexel texel = paint(geometry.points[k], geometry.normals[k]);
    const std::uint32_t i = layout.texels[k].texel;
    atlas.confidence[i] = texel.confidence;
    atlas.color[i] = texel.confidence > 0.0 ? texel.color : Vec3::Zero();
  }
  return atlas;
}

} // namespace tapestry::fixtures
