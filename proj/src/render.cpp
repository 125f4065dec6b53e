#include "tapestry/render.hpp"

#include "tapestry/error.hpp"
#include "tapestry/util.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace tapestry {

GBuffer::GBuffer(Resolution res)
    : normal(res, Vec3f::Zero()),
      position(res, Vec3f::Zero()),
      depth(res, std::numeric_limits<float>::infinity()),
      mask(res, 0) {}

std::size_t GBuffer::covered_pixels() const {
  return static_cast<std::size_t>(std::count(mask.data().begin(), mask.data().end(), std::uint8_t{1}));
}

void GBuffer::validate() const {
  const Resolution res = resolution();
  if (normal.resolution() != res || position.resolution() != res || depth.resolution() != res) {
    fail(ErrorCode::ResolutionMismatch, "g-buffer rasters differ in resolution");
  }
  if ((color && color->resolution() != res) || (inpaint && inpaint->resolution() != res)) {
    fail(ErrorCode::ResolutionMismatch, "g-buffer color/inpaint resolution differs");
  }
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const bool covered = mask[i] != 0;
    if (covered != std::isfinite(depth[i])) fail(ErrorCode::InvalidArgument, "mask and depth disagree");
    if (covered != (normal[i].squaredNorm() > 0.0f)) fail(ErrorCode::InvalidArgument, "mask and normal disagree");
    if (inpaint && (*inpaint)[i] && !covered) fail(ErrorCode::InvalidArgument, "inpaint outside coverage");
  }
}

namespace {

struct ClipVertex {
  Vec3 cam;   // camera-space position
  Vec3 bary;  // barycentric weights w.r.t. the original triangle
};

// Sutherland-Hodgman against the plane z = near.
int clip_near(const std::array<ClipVertex, 3>& in, double near, std::array<ClipVertex, 4>& out) {
  int n = 0;
  for (int i = 0; i < 3; ++i) {
    const ClipVertex& a = in[i];
    const ClipVertex& b = in[(i + 1) % 3];
    const bool a_in = a.cam.z() >= near;
    const bool b_in = b.cam.z() >= near;
    if (a_in) out[n++] = a;
    if (a_in != b_in) {
      const double t = (near - a.cam.z()) / (b.cam.z() - a.cam.z());
      ClipVertex v{a.cam + t * (b.cam - a.cam), a.bary + t * (b.bary - a.bary)};
      v.cam.z() = near;
      out[n++] = v;
    }
  }
  return n;
}

inline double edge_raw(const Vec2& a, const Vec2& b, const Vec2& p) {
  return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

// Evaluated from a canonical endpoint order so that edge(a, b, p) is exactly
// -edge(b, a, p) and triangles sharing an edge agree on its sign.
inline double edge(const Vec2& a, const Vec2& b, const Vec2& p) {
  if (a.x() < b.x() || (a.x() == b.x() && a.y() < b.y())) return edge_raw(a, b, p);
  return -edge_raw(b, a, p);
}

// Top-left rule for y-down screen space with positive-area winding.
inline bool top_left(const Vec2& a, const Vec2& b) {
  const double dx = b.x() - a.x();
  const double dy = b.y() - a.y();
  return (dy == 0.0 && dx > 0.0) || dy < 0.0;
}

} // namespace

RasterFragments rasterize(const TriangleMesh& mesh, const CameraPose& pose) {
  const Resolution res = pose.resolution;
  RasterFragments out{Grid<std::int32_t>(res, -1), Grid<Vec3>(res, Vec3::Zero()),
                      Grid<double>(res, std::numeric_limits<double>::infinity())};
  const double f = pose.focal_px();
  const Vec2 pp = pose.principal_point();
  const Mat3& R = pose.rotation;

  std::vector<Vec3> cam(mesh.positions.size());
  for (std::size_t i = 0; i < cam.size(); ++i) cam[i] = R * (mesh.positions[i] - pose.position);

  std::array<ClipVertex, 4> poly;
  for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
    const Face& face = mesh.faces[fi];
    const std::array<ClipVertex, 3> tri{ClipVertex{cam[face[0].position], Vec3::UnitX()},
                                        ClipVertex{cam[face[1].position], Vec3::UnitY()},
                                        ClipVertex{cam[face[2].position], Vec3::UnitZ()}};
    if (tri[0].cam.z() > pose.far && tri[1].cam.z() > pose.far && tri[2].cam.z() > pose.far) continue;
    const int n = clip_near(tri, pose.near, poly);
    if (n < 3) continue;

    std::array<Vec2, 4> screen;
    std::array<double, 4> inv_z;
    for (int i = 0; i < n; ++i) {
      inv_z[i] = 1.0 / poly[i].cam.z();
      screen[i] = pp + f * Vec2(poly[i].cam.x() * inv_z[i], poly[i].cam.y() * inv_z[i]);
    }

    for (int k = 1; k + 1 < n; ++k) {
      std::array<int, 3> idx{0, k, k + 1};
      double area = edge(screen[idx[0]], screen[idx[1]], screen[idx[2]]);
      if (area == 0.0 || !std::isfinite(area)) continue;
      if (area < 0.0) {
        std::swap(idx[1], idx[2]);
        area = -area;
      }
      const Vec2& s0 = screen[idx[0]];
      const Vec2& s1 = screen[idx[1]];
      const Vec2& s2 = screen[idx[2]];
      const double min_x = std::min({s0.x(), s1.x(), s2.x()});
      const double max_x = std::max({s0.x(), s1.x(), s2.x()});
      const double min_y = std::min({s0.y(), s1.y(), s2.y()});
      const double max_y = std::max({s0.y(), s1.y(), s2.y()});
      const int x0 = std::max(0, static_cast<int>(std::floor(min_x - 0.5)));
      const int x1 = std::min(res.width - 1, static_cast<int>(std::ceil(max_x - 0.5)));
      const int y0 = std::max(0, static_cast<int>(std::floor(min_y - 0.5)));
      const int y1 = std::min(res.height - 1, static_cast<int>(std::ceil(max_y - 0.5)));
      if (x0 > x1 || y0 > y1) continue;
      const bool tl0 = top_left(s1, s2);
      const bool tl1 = top_left(s2, s0);
      const bool tl2 = top_left(s0, s1);

      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const Vec2 p(x + 0.5, y + 0.5);
          const double w0 = edge(s1, s2, p);
          const double w1 = edge(s2, s0, p);
          const double w2 = edge(s0, s1, p);
          if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
          if ((w0 == 0.0 && !tl0) || (w1 == 0.0 && !tl1) || (w2 == 0.0 && !tl2)) continue;
          const double q0 = w0 / area * inv_z[idx[0]];
          const double q1 = w1 / area * inv_z[idx[1]];
          const double q2 = w2 / area * inv_z[idx[2]];
          const double sum = q0 + q1 + q2;
          const double z = 1.0 / sum;
          if (z < pose.near * (1.0 - 1e-12) || z > pose.far) continue;
          double& zbuf = out.depth(x, y);
          if (!(z < zbuf)) continue;
          zbuf = z;
          out.face(x, y) = static_cast<std::int32_t>(fi);
          out.barycentric(x, y) =
              (q0 * poly[idx[0]].bary + q1 * poly[idx[1]].bary + q2 * poly[idx[2]].bary) / sum;
        }
      }
    }
  }
  return out;
}

namespace {

GBuffer gbuffer_from_fragments(const TriangleMesh& mesh, const RasterFragments& frags,
                               TexelShadingCache* cache) {
  const Resolution res = frags.face.resolution();
  GBuffer g(res);
  const bool with_uv = cache != nullptr && mesh.has_uvs();
  if (cache) {
    cache->face = Grid<std::int32_t>(res, -1);
    cache->uv = Grid<Eigen::Vector2f>(res, Eigen::Vector2f::Zero());
  }
  for (std::size_t i = 0; i < frags.face.size(); ++i) {
    const std::int32_t fi = frags.face[i];
    if (fi < 0) continue;
    const Vec3& b = frags.barycentric[i];
    Vec3 p = Vec3::Zero();
    Vec3 n = Vec3::Zero();
    for (int k = 0; k < 3; ++k) {
      p += b[k] * mesh.corner_position(fi, k);
      n += b[k] * mesh.corner_normal(fi, k);
    }
    if (n.squaredNorm() == 0.0) {
      // Opposing vertex normals cancel: fall back to the geometric normal.
      n = (mesh.corner_position(fi, 1) - mesh.corner_position(fi, 0))
              .cross(mesh.corner_position(fi, 2) - mesh.corner_position(fi, 0));
      if (n.squaredNorm() == 0.0) n = Vec3::UnitZ();
    }
    g.mask[i] = 1;
    g.depth[i] = static_cast<float>(frags.depth[i]);
    g.position[i] = p.cast<float>();
    g.normal[i] = n.normalized().cast<float>();
    if (cache) {
      cache->face[i] = fi;
      if (with_uv) {
        Vec2 uv = Vec2::Zero();
        for (int k = 0; k < 3; ++k) uv += b[k] * mesh.corner_uv(fi, k);
        cache->uv[i] = uv.cast<float>();
      }
    }
  }
  return g;
}

} // namespace

GBuffer render_gbuffer(const TriangleMesh& mesh, const CameraPose& pose, TexelShadingCache* cache) {
  return gbuffer_from_fragments(mesh, rasterize(mesh, pose), cache);
}

GBuffer render_color(const TriangleMesh& mesh, const TextureAtlas& atlas, const CameraPose& pose,
                     double confidence_threshold) {
  require_uvs(mesh, "render_color");
  atlas.validate();
  const RasterFragments frags = rasterize(mesh, pose);
  GBuffer g = gbuffer_from_fragments(mesh, frags, nullptr);
  ImageRgb color(g.resolution(), Vec3f::Zero());
  Mask inpaint(g.resolution(), 0);
  for (std::size_t i = 0; i < frags.face.size(); ++i) {
    const std::int32_t fi = frags.face[i];
    if (fi < 0) continue;
    const Vec3& b = frags.barycentric[i];
    Vec2 uv = Vec2::Zero();
    for (int k = 0; k < 3; ++k) uv += b[k] * mesh.corner_uv(fi, k);
    const AtlasSample s = sample_atlas(atlas, uv);
    color[i] = s.color.cast<float>();
    inpaint[i] = s.confidence < confidence_threshold ? 1 : 0;
  }
  g.color = std::move(color);
  g.inpaint = std::move(inpaint);
  return g;
}

std::vector<GBuffer> render_turntable(const TriangleMesh& mesh, const TextureAtlas* atlas,
                                      const OrbitTrajectory& trajectory,
                                      double confidence_threshold) {
  if (atlas) require_uvs(mesh, "render_turntable");
  std::vector<GBuffer> frames(trajectory.poses.size());
  parallel_for(frames.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      frames[t] = atlas ? render_color(mesh, *atlas, trajectory.poses[t], confidence_threshold)
                        : render_gbuffer(mesh, trajectory.poses[t]);
    }
  });
  return frames;
}

} // namespace tapestry
