#pragma once

#include "tapestry/geometry.hpp"

#include <filesystem>
#include <string>

namespace tapestry {

/// UV-space texture with a per-texel accumulated weight. Texels with zero
/// confidence hold black: that is the "unfilled" convention.
struct TextureAtlas {
  Grid<Vec3> color;
  Grid<double> confidence;

  TextureAtlas() = default;
  explicit TextureAtlas(Resolution res) : color(res, Vec3::Zero()), confidence(res, 0.0) {}

  Resolution resolution() const { return color.resolution(); }

  /// Throws ResolutionMismatch / InvalidArgument if an invariant is violated.
  void validate() const;
};

/// Texel (x, y) has its center at u = (x + 0.5) / W, v = 1 - (y + 0.5) / H.
inline Vec2 texel_center_uv(Resolution res, int x, int y) {
  return {(x + 0.5) / res.width, 1.0 - (y + 0.5) / res.height};
}

/// Continuous texel coordinates of a UV point (texel centers at integers).
inline Vec2 uv_to_texel(Resolution res, const Vec2& uv) {
  return {uv.x() * res.width - 0.5, (1.0 - uv.y()) * res.height - 0.5};
}

struct AtlasSample {
  Vec3 color = Vec3::Zero();
  double confidence = 0.0;
};

/// Bilinear lookup with clamp-to-edge addressing.
AtlasSample sample_atlas(const TextureAtlas& atlas, const Vec2& uv);

/// Bilinear lookup in an image; `pixel` uses continuous coordinates with pixel
/// centers at +0.5.
Vec3 sample_bilinear(const ImageRgb& image, const Vec2& pixel);

TextureAtlas atlas_from_image(const ImageRgb& image, double confidence = 1.0);
ImageRgb atlas_color_image(const TextureAtlas& atlas);

// Confidence grid file: 8-byte magic, uint32 width, uint32 height, then
// little-endian float32 values in row-major order.
inline constexpr char kConfidenceMagic[8] = {'T', 'P', 'C', 'O', 'N', 'F', '0', '1'};
std::string encode_confidence(const Grid<double>& confidence);
Grid<double> decode_confidence(const std::string& bytes);

struct AtlasFiles {
  std::filesystem::path color_png;
  std::filesystem::path color16_png;
  std::filesystem::path confidence_bin;
  std::filesystem::path confidence_preview_png;
  double confidence_max = 0.0;
};

/// Writes color.png, confidence.bin and confidence_preview.png (and
/// color16.png when requested) into `dir`.
AtlasFiles write_atlas(const TextureAtlas& atlas, const std::filesystem::path& dir,
                       bool with_color16 = false);
/// Reads color.png (or color16.png when present) and confidence.bin from
/// `dir`. Missing confidence means a fully trusted texture (confidence 1).
TextureAtlas read_atlas(const std::filesystem::path& dir);
/// Accepts either an atlas directory or a plain texture image.
TextureAtlas read_atlas_or_texture(const std::filesystem::path& path);

} // namespace tapestry
