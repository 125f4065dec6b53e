#pragma once

#include "tapestry/atlas.hpp"
#include "tapestry/camera.hpp"
#include "tapestry/geometry.hpp"
#include "tapestry/mesh.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace tapestry {

/// Per-frame aligned rasters. Uncovered pixels hold zero normal/position,
/// infinite depth and a false mask.
struct GBuffer {
  Grid<Vec3f> normal;
  Grid<Vec3f> position;
  Grid<float> depth;
  Mask mask;
  std::optional<ImageRgb> color;
  std::optional<Mask> inpaint;

  GBuffer() = default;
  explicit GBuffer(Resolution res);

  Resolution resolution() const { return mask.resolution(); }
  std::size_t covered_pixels() const;

  /// Checks the mask/depth/normal/position coupling and inpaint => mask.
  void validate() const;
};

/// Interpolated UV and owning face per covered pixel (face -1 elsewhere).
struct TexelShadingCache {
  Grid<std::int32_t> face;
  Grid<Eigen::Vector2f> uv;
};

/// Raw rasterizer output: nearest face and its (perspective-correct)
/// barycentric coordinates per pixel.
struct RasterFragments {
  Grid<std::int32_t> face;
  Grid<Vec3> barycentric;
  Grid<double> depth;
};

/// Z-buffered, top-left-rule rasterization in triangle order with near-plane
/// clipping and no back-face culling. On exact depth ties the lower triangle
/// index is kept.
RasterFragments rasterize(const TriangleMesh& mesh, const CameraPose& pose);

GBuffer render_gbuffer(const TriangleMesh& mesh, const CameraPose& pose,
                       TexelShadingCache* cache = nullptr);

/// G-buffer plus atlas color (bilinear at interpolated UVs) and the inpaint
/// mask: covered pixels whose sampled confidence is below the threshold.
GBuffer render_color(const TriangleMesh& mesh, const TextureAtlas& atlas, const CameraPose& pose,
                     double confidence_threshold);

/// One buffer per pose, in frame order. Without an atlas only geometry is rendered.
std::vector<GBuffer> render_turntable(const TriangleMesh& mesh, const TextureAtlas* atlas,
                                      const OrbitTrajectory& trajectory,
                                      double confidence_threshold);

} // namespace tapestry
