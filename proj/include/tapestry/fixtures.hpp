#pragma once

#include "tapestry/atlas.hpp"
#include "tapestry/mesh.hpp"

#include <functional>

namespace tapestry::fixtures {

/// Square in the y = 0 plane with normal -y, side 2 * half_size, and the
/// identity UV map u = x / (2 h) + 0.5, v = z / (2 h) + 0.5. Seen from
/// (0, -d, 0) the image x axis runs along +x and the image up along +z.
TriangleMesh quad(double half_size = 0.5, double y = 0.0);

/// Axis-aligned cube of the given half extent, each face its own UV chart.
TriangleMesh cube(double half_extent = 0.5);

enum class SphereUv {
  LatLong,    // v linear in latitude
  EqualArea,  // v linear in sin(latitude): texel area proportional to surface area
};

/// Unit sphere with `segments` longitudes and `rings` latitude bands,
/// 2 * segments * (rings - 1) triangles. The u = 0 / 1 seam is split.
TriangleMesh uv_sphere(int segments, int rings, SphereUv mapping = SphereUv::LatLong);

/// Mug: open cylinder with wall thickness, bottom, rim and a half-torus
/// handle on the +x side. Every part has its own UV chart. Normalized.
TriangleMesh mug(int segments = 64);

/// Two-color checkerboard with `cells` squares per side, confidence 1 everywhere.
TextureAtlas checker_atlas(Resolution res, int cells, const Vec3& a = {0.9, 0.85, 0.2},
                           const Vec3& b = {0.1, 0.25, 0.7});

struct SurfaceTexel {
  Vec3 color = Vec3::Zero();
  double confidence = 0.0;
};

/// Atlas whose occupied texels are painted by a function of the texel's
/// world point and normal. Unoccupied texels stay empty.
TextureAtlas paint_atlas(const TriangleMesh& mesh, Resolution res,
                         const std::function<SurfaceTexel(const Vec3& point, const Vec3& normal)>& paint);

} // namespace tapestry::fixtures
