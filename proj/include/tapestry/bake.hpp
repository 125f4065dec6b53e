#pragma once

#include "tapestry/atlas.hpp"
#include "tapestry/camera.hpp"
#include "tapestry/mesh.hpp"
#include "tapestry/render.hpp"
#include "tapestry/visibility.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace tapestry {

/// (clamp(dot(normal, view_dir), 0, 1))^4. Both vectors point away from the surface.
double angle_weight(const Vec3& normal, const Vec3& view_dir);

/// clamp(scale * |L(d)|, 0, 1) with L the 5-point Laplacian of the depth
/// raster at (x, y). Neighbors outside the image or the coverage (non-finite
/// depth) take the center value.
double depth_penalty(const Grid<float>& depth, int x, int y, double scale);

struct BakeWeights {
  double angle = 0.0;
  double depth = 0.0;
  double similarity = 0.0;

  static BakeWeights combine(double angle, double depth) { return {angle, depth, angle * (1.0 - depth)}; }
};

/// A texel of the atlas owned by a face, with barycentric coordinates of its
/// center on that face. Dilated texels sit just outside their face in UV space;
/// their barycentrics are clamped onto the face.
struct TexelSample {
  std::uint32_t texel = 0;
  std::int32_t face = -1;
  Vec3 barycentric = Vec3::Zero();
  bool dilated = false;
};

struct UvLayout {
  Grid<std::int32_t> owner;  // face index or -1
  std::vector<TexelSample> texels;

  Resolution resolution() const { return owner.resolution(); }
  Mask occupancy() const;
};

/// Rasterizes every face's UV triangle at texel centers (inclusive edges, the
/// first face wins) and then dilates face ownership by one texel.
UvLayout rasterize_uv_layout(const TriangleMesh& mesh, Resolution resolution);

struct TexelGeometry {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
};

TexelGeometry texel_geometry(const TriangleMesh& mesh, const UvLayout& layout);

/// Relative tolerance on the distance to the texel when testing for occluders.
inline constexpr double kVisibilityEpsilon = 1e-4;

/// The texel point projects inside the image and nothing other than its own
/// face lies between the camera and the point (up to kVisibilityEpsilon).
bool texel_visible(const VisibilityIndex& index, const Vec3& point, std::int32_t face,
                   const CameraPose& pose);

struct BakeConfig {
  Resolution atlas_resolution{1024, 1024};
  double penalty_scale = 8.0;
};

/// Back-projection of one frame: weight S per texel and the premultiplied
/// color S * sample.
struct PartialBake {
  Grid<Vec3> weighted_color;
  Grid<double> weight;

  explicit PartialBake(Resolution res) : weighted_color(res, Vec3::Zero()), weight(res, 0.0) {}
  /// color = weighted_color / weight where weight > 0, confidence = weight.
  TextureAtlas normalized() const;
};

/// Mesh-bound back-projection state: visibility index, UV layout and texel
/// geometry are built once and reused for every frame.
class Baker {
 public:
  Baker(const TriangleMesh& mesh, BakeConfig config,
        std::optional<VisibilityIndex> index = std::nullopt);

  /// `weights_out`, when given, receives the weights of every texel that was
  /// sampled (indexed like layout().texels).
  PartialBake bake_frame(const ImageRgb& color, const GBuffer& gbuffer, const CameraPose& pose,
                         std::vector<std::optional<BakeWeights>>* weights_out = nullptr) const;

  /// Confidence-weighted mean over frames, summed in frame order.
  TextureAtlas bake_video(std::span<const ImageRgb> colors, std::span<const GBuffer> gbuffers,
                          const OrbitTrajectory& trajectory) const;

  void accumulate(PartialBake& sum, const ImageRgb& color, const GBuffer& gbuffer,
                  const CameraPose& pose) const;

  const TriangleMesh& mesh() const { return mesh_; }
  const UvLayout& layout() const { return layout_; }
  const VisibilityIndex& index() const { return index_; }
  const TexelGeometry& geometry() const { return geometry_; }
  const BakeConfig& config() const { return config_; }

 private:
  template <class Sink>
  void visit_frame(const ImageRgb& color, const GBuffer& gbuffer, const CameraPose& pose, Sink&& sink) const;

  TriangleMesh mesh_;
  BakeConfig config_;
  VisibilityIndex index_;
  UvLayout layout_;
  TexelGeometry geometry_;
};

PartialBake bake_frame(const TriangleMesh& mesh, const VisibilityIndex& index, const ImageRgb& color,
                       const GBuffer& gbuffer, const CameraPose& pose, Resolution atlas_resolution,
                       double penalty_scale);

TextureAtlas bake_video(const TriangleMesh& mesh, std::span<const ImageRgb> colors,
                        std::span<const GBuffer> gbuffers, const OrbitTrajectory& trajectory,
                        Resolution atlas_resolution, double penalty_scale);

} // namespace tapestry
