#include "tapestry/bake.hpp"

#include "tapestry/error.hpp"
#include "tapestry/util.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace tapestry {

double angle_weight(const Vec3& normal, const Vec3& view_dir) {
  const double c = std::clamp(normal.dot(view_dir), 0.0, 1.0);
  const double c2 = c * c;
  return c2 * c2;
}

double depth_penalty(const Grid<float>& depth, int x, int y, double scale) {
  if (!depth.in_bounds(x, y)) fail(ErrorCode::InvalidArgument, "depth_penalty: pixel out of bounds");
  const double center = depth(x, y);
  if (!std::isfinite(center)) fail(ErrorCode::InvalidArgument, "depth_penalty: no depth at pixel");
  const auto at = [&](int nx, int ny) {
    if (!depth.in_bounds(nx, ny)) return center;
    const double d = depth(nx, ny);
    return std::isfinite(d) ? d : center;
  };
  const double laplacian = at(x + 1, y) + at(x - 1, y) + at(x, y + 1) + at(x, y - 1) - 4.0 * center;
  return std::clamp(scale * std::abs(laplacian), 0.0, 1.0);
}

Mask UvLayout::occupancy() const {
  Mask m(owner.resolution(), 0);
  for (std::size_t i = 0; i < owner.size(); ++i) m[i] = owner[i] >= 0 ? 1 : 0;
  return m;
}

namespace {

// Barycentric coordinates of p in the 2D triangle (a, b, c); nullopt if degenerate.
std::optional<Vec3> barycentric2(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& p) {
  const Vec2 v0 = b - a;
  const Vec2 v1 = c - a;
  const Vec2 v2 = p - a;
  const double den = v0.x() * v1.y() - v1.x() * v0.y();
  if (den == 0.0 || !std::isfinite(den)) return std::nullopt;
  const double v = (v2.x() * v1.y() - v1.x() * v2.y()) / den;
  const double w = (v0.x() * v2.y() - v2.x() * v0.y()) / den;
  return Vec3(1.0 - v - w, v, w);
}

Vec3 clamp_to_triangle(Vec3 b) {
  b = b.cwiseMax(0.0);
  const double s = b.sum();
  return s > 0.0 ? Vec3(b / s) : Vec3(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0);
}

} // namespace

UvLayout rasterize_uv_layout(const TriangleMesh& mesh, Resolution res) {
  require_uvs(mesh, "UV layout rasterization");
  if (!res.valid()) fail(ErrorCode::InvalidArgument, "atlas resolution must be positive");
  UvLayout layout;
  layout.owner = Grid<std::int32_t>(res, -1);
  Grid<Vec3> bary(res, Vec3::Zero());
  constexpr double kInsideEps = 1e-9;

  for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
    std::array<Vec2, 3> t;
    for (int k = 0; k < 3; ++k) t[k] = uv_to_texel(res, mesh.corner_uv(fi, k));
    const double min_x = std::min({t[0].x(), t[1].x(), t[2].x()});
    const double max_x = std::max({t[0].x(), t[1].x(), t[2].x()});
    const double min_y = std::min({t[0].y(), t[1].y(), t[2].y()});
    const double max_y = std::max({t[0].y(), t[1].y(), t[2].y()});
    const int x0 = std::max(0, static_cast<int>(std::ceil(min_x - kInsideEps)));
    const int x1 = std::min(res.width - 1, static_cast<int>(std::floor(max_x + kInsideEps)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(min_y - kInsideEps)));
    const int y1 = std::min(res.height - 1, static_cast<int>(std::floor(max_y + kInsideEps)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (layout.owner(x, y) >= 0) continue;
        const auto b = barycentric2(t[0], t[1], t[2], Vec2(x, y));
        if (!b || b->minCoeff() < -kInsideEps) continue;
        layout.owner(x, y) = static_cast<std::int32_t>(fi);
        bary(x, y) = clamp_to_triangle(*b);
      }
    }
  }

  // One-texel dilation.
  const Grid<std::int32_t> core = layout.owner;
  std::vector<std::uint8_t> dilated(res.pixel_count(), 0);
  constexpr int kOffsets[8][2] = {{0, -1}, {0, 1}, {-1, 0}, {1, 0}, {-1, -1}, {1, -1}, {-1, 1}, {1, 1}};
  for (int y = 0; y < res.height; ++y) {
    for (int x = 0; x < res.width; ++x) {
      if (core(x, y) >= 0) continue;
      for (const auto& o : kOffsets) {
        const int nx = x + o[0];
        const int ny = y + o[1];
        if (!core.in_bounds(nx, ny) || core(nx, ny) < 0) continue;
        const std::int32_t fi = core(nx, ny);
        std::array<Vec2, 3> t;
        for (int k = 0; k < 3; ++k) t[k] = uv_to_texel(res, mesh.corner_uv(fi, k));
        const auto b = barycentric2(t[0], t[1], t[2], Vec2(x, y));
        layout.owner(x, y) = fi;
        bary(x, y) = b ? clamp_to_triangle(*b) : Vec3(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0);
        dilated[core.index(x, y)] = 1;
        break;
      }
    }
  }

  for (std::size_t i = 0; i < layout.owner.size(); ++i) {
    if (layout.owner[i] < 0) continue;
    layout.texels.push_back({static_cast<std::uint32_t>(i), layout.owner[i], bary[i], dilated[i] != 0});
  }
  return layout;
}

TexelGeometry texel_geometry(const TriangleMesh& mesh, const UvLayout& layout) {
  TexelGeometry g;
  g.points.resize(layout.texels.size());
  g.normals.resize(layout.texels.size());
  for (std::size_t i = 0; i < layout.texels.size(); ++i) {
    const TexelSample& s = layout.texels[i];
    Vec3 p = Vec3::Zero();
    Vec3 n = Vec3::Zero();
    for (int k = 0; k < 3; ++k) {
      p += s.barycentric[k] * mesh.corner_position(s.face, k);
      n += s.barycentric[k] * mesh.corner_normal(s.face, k);
    }
    if (n.squaredNorm() == 0.0) {
      n = (mesh.corner_position(s.face, 1) - mesh.corner_position(s.face, 0))
              .cross(mesh.corner_position(s.face, 2) - mesh.corner_position(s.face, 0));
    }
    g.points[i] = p;
    g.normals[i] = n.squaredNorm() > 0.0 ? Vec3(n.normalized()) : Vec3::UnitZ();
  }
  return g;
}

bool texel_visible(const VisibilityIndex& index, const Vec3& point, std::int32_t face,
                   const CameraPose& pose) {
  if (!project(pose, point).inside(pose.resolution)) return false;
  const Vec3 to_point = point - pose.position;
  const double distance = to_point.norm();
  if (!(distance > 0.0)) return false;
  return !index.occluded(pose.position, to_point / distance, 0.0,
                         distance * (1.0 - kVisibilityEpsilon), face);
}

TextureAtlas PartialBake::normalized() const {
  TextureAtlas atlas(weight.resolution());
  for (std::size_t i = 0; i < weight.size(); ++i) {
    if (weight[i] > 0.0) {
      atlas.color[i] = weighted_color[i] / weight[i];
      atlas.confidence[i] = weight[i];
    }
  }
  return atlas;
}

Baker::Baker(const TriangleMesh& mesh, BakeConfig config, std::optional<VisibilityIndex> index)
    : mesh_(mesh),
      config_(config),
      index_(index ? std::move(*index) : VisibilityIndex(mesh)),
      layout_(rasterize_uv_layout(mesh, config.atlas_resolution)),
      geometry_(texel_geometry(mesh, layout_)) {
  if (!(config.penalty_scale >= 0.0)) fail(ErrorCode::InvalidArgument, "penalty_scale must be non-negative");
}

template <class Sink>
void Baker::visit_frame(const ImageRgb& color, const GBuffer& gbuffer, const CameraPose& pose,
                        Sink&& sink) const {
  const Resolution res = pose.resolution;
  if (color.resolution() != res || gbuffer.resolution() != res) {
    fail(ErrorCode::ResolutionMismatch,
         fmt::format("frame rasters ({}x{}, {}x{}) do not match the camera ({}x{})", color.width(),
                     color.height(), gbuffer.resolution().width, gbuffer.resolution().height,
                     res.width, res.height));
  }
  parallel_for(layout_.texels.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Vec3& p = geometry_.points[i];
      const Vec3 to_cam = pose.position - p;
      const double dist = to_cam.norm();
      if (!(dist > 0.0)) continue;
      const double a = angle_weight(geometry_.normals[i], to_cam / dist);
      if (a <= 0.0) continue;
      const Projection proj = project(pose, p);
      if (!proj.inside(res)) continue;
      const int px = static_cast<int>(proj.pixel.x());
      const int py = static_cast<int>(proj.pixel.y());
      if (!gbuffer.mask(px, py)) continue;
      if (!texel_visible(index_, p, layout_.texels[i].face, pose)) continue;
      const BakeWeights w = BakeWeights::combine(a, depth_penalty(gbuffer.depth, px, py, config_.penalty_scale));
      sink(i, w, w.similarity > 0.0 ? sample_bilinear(color, proj.pixel) : Vec3::Zero());
    }
  });
}

PartialBake Baker::bake_frame(const ImageRgb& color, const GBuffer& gbuffer, const CameraPose& pose,
                              std::vector<std::optional<BakeWeights>>* weights_out) const {
  PartialBake out(config_.atlas_resolution);
  if (weights_out) weights_out->assign(layout_.texels.size(), std::nullopt);
  visit_frame(color, gbuffer, pose, [&](std::size_t i, const BakeWeights& w, const Vec3& sample) {
    const std::uint32_t texel = layout_.texels[i].texel;
    out.weight[texel] = w.similarity;
    out.weighted_color[texel] = w.similarity * sample;
    if (weights_out) (*weights_out)[i] = w;
  });
  return out;
}

void Baker::accumulate(PartialBake& sum, const ImageRgb& color, const GBuffer& gbuffer,
                       const CameraPose& pose) const {
  if (sum.weight.resolution() != config_.atlas_resolution) {
    fail(ErrorCode::ResolutionMismatch, "accumulator resolution differs from the atlas resolution");
  }
  visit_frame(color, gbuffer, pose, [&](std::size_t i, const BakeWeights& w, const Vec3& sample) {
    const std::uint32_t texel = layout_.texels[i].texel;
    sum.weight[texel] += w.similarity;
    sum.weighted_color[texel] += w.similarity * sample;
  });
}

TextureAtlas Baker::bake_video(std::span<const ImageRgb> colors, std::span<const GBuffer> gbuffers,
                               const OrbitTrajectory& trajectory) const {
  if (colors.size() != trajectory.poses.size() || gbuffers.size() != trajectory.poses.size()) {
    fail(ErrorCode::InvalidArgument,
         fmt::format("bake_video: {} color frames and {} g-buffers for a {}-frame trajectory",
                     colors.size(), gbuffers.size(), trajectory.poses.size()));
  }
  PartialBake sum(config_.atlas_resolution);
  for (std::size_t t = 0; t < colors.size(); ++t) accumulate(sum, colors[t], gbuffers[t], trajectory.poses[t]);
  return sum.normalized();
}

PartialBake bake_frame(const TriangleMesh& mesh, const VisibilityIndex& index, const ImageRgb& color,
                       const GBuffer& gbuffer, const CameraPose& pose, Resolution atlas_resolution,
                       double penalty_scale) {
  const Baker baker(mesh, BakeConfig{atlas_resolution, penalty_scale}, index);
  return baker.bake_frame(color, gbuffer, pose);
}

TextureAtlas bake_video(const TriangleMesh& mesh, std::span<const ImageRgb> colors,
                        std::span<const GBuffer> gbuffers, const OrbitTrajectory& trajectory,
                        Resolution atlas_resolution, double penalty_scale) {
  const Baker baker(mesh, BakeConfig{atlas_resolution, penalty_scale});
  return baker.bake_video(colors, gbuffers, trajectory);
}

} // namespace tapestry
