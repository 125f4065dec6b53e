#include "tapestry/atlas.hpp"

#include "tapestry/error.hpp"
#include "tapestry/image_io.hpp"
#include "tapestry/util.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

namespace tapestry {

namespace fs = std::filesystem;

void TextureAtlas::validate() const {
  if (color.resolution() != confidence.resolution()) {
    fail(ErrorCode::ResolutionMismatch, "atlas color and confidence resolutions differ");
  }
  for (std::size_t i = 0; i < confidence.size(); ++i) {
    if (!(confidence[i] >= 0.0) || !std::isfinite(confidence[i])) {
      fail(ErrorCode::InvalidArgument, "atlas confidence must be finite and non-negative");
    }
  }
}

namespace {

template <class Fetch>
auto bilinear(Resolution res, const Vec2& coords, Fetch fetch) {
  const double fx = coords.x();
  const double fy = coords.y();
  const double x0f = std::floor(fx);
  const double y0f = std::floor(fy);
  const double tx = fx - x0f;
  const double ty = fy - y0f;
  const auto clampi = [](double v, int hi) { return static_cast<int>(std::clamp(v, 0.0, static_cast<double>(hi))); };
  const int x0 = clampi(x0f, res.width - 1);
  const int x1 = clampi(x0f + 1.0, res.width - 1);
  const int y0 = clampi(y0f, res.height - 1);
  const int y1 = clampi(y0f + 1.0, res.height - 1);
  using T = std::decay_t<decltype(fetch(0, 0))>;
  const T top = fetch(x0, y0) * (1.0 - tx) + fetch(x1, y0) * tx;
  const T bottom = fetch(x0, y1) * (1.0 - tx) + fetch(x1, y1) * tx;
  return T(top * (1.0 - ty) + bottom * ty);
}

} // namespace

AtlasSample sample_atlas(const TextureAtlas& atlas, const Vec2& uv) {
  const Resolution res = atlas.resolution();
  const Vec2 t = uv_to_texel(res, uv);
  AtlasSample s;
  s.color = bilinear(res, t, [&](int x, int y) { return atlas.color(x, y); });
  s.confidence = bilinear(res, t, [&](int x, int y) { return atlas.confidence(x, y); });
  return s;
}

Vec3 sample_bilinear(const ImageRgb& image, const Vec2& pixel) {
  const Vec2 c(pixel.x() - 0.5, pixel.y() - 0.5);
  return bilinear(image.resolution(), c, [&](int x, int y) { return Vec3(image(x, y).cast<double>()); });
}

TextureAtlas atlas_from_image(const ImageRgb& image, double confidence) {
  TextureAtlas atlas(image.resolution());
  for (std::size_t i = 0; i < image.size(); ++i) {
    atlas.color[i] = image[i].cast<double>();
    atlas.confidence[i] = confidence;
  }
  return atlas;
}

ImageRgb atlas_color_image(const TextureAtlas& atlas) {
  ImageRgb img(atlas.resolution());
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = atlas.color[i].cast<float>();
  return img;
}

static_assert(std::endian::native == std::endian::little, "confidence I/O assumes a little-endian host");

std::string encode_confidence(const Grid<double>& confidence) {
  std::string out(16 + confidence.size() * 4, '\0');
  std::memcpy(out.data(), kConfidenceMagic, 8);
  const std::uint32_t w = confidence.width();
  const std::uint32_t h = confidence.height();
  std::memcpy(out.data() + 8, &w, 4);
  std::memcpy(out.data() + 12, &h, 4);
  for (std::size_t i = 0; i < confidence.size(); ++i) {
    const float v = static_cast<float>(confidence[i]);
    std::memcpy(out.data() + 16 + 4 * i, &v, 4);
  }
  return out;
}

Grid<double> decode_confidence(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kConfidenceMagic, 8) != 0) {
    fail(ErrorCode::Io, "not a confidence grid file");
  }
  std::uint32_t w = 0;
  std::uint32_t h = 0;
  std::memcpy(&w, bytes.data() + 8, 4);
  std::memcpy(&h, bytes.data() + 12, 4);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() != 16 + 4 * n) fail(ErrorCode::Io, "confidence grid payload size mismatch");
  Grid<double> grid(Resolution{static_cast<int>(w), static_cast<int>(h)}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    float v;
    std::memcpy(&v, bytes.data() + 16 + 4 * i, 4);
    grid[i] = v;
  }
  return grid;
}

AtlasFiles write_atlas(const TextureAtlas& atlas, const fs::path& dir, bool with_color16) {
  fs::create_directories(dir);
  AtlasFiles files;
  files.color_png = dir / "color.png";
  files.confidence_bin = dir / "confidence.bin";
  files.confidence_preview_png = dir / "confidence_preview.png";
  const ImageRgb color = atlas_color_image(atlas);
  write_binary_file(files.color_png, encode_rgb8(color));
  if (with_color16) {
    files.color16_png = dir / "color16.png";
    write_binary_file(files.color16_png, encode_rgb16(color));
  }
  write_binary_file(files.confidence_bin, encode_confidence(atlas.confidence));
  double max = 0.0;
  for (std::size_t i = 0; i < atlas.confidence.size(); ++i) max = std::max(max, atlas.confidence[i]);
  files.confidence_max = max;
  std::vector<std::uint16_t> preview(atlas.confidence.size());
  for (std::size_t i = 0; i < preview.size(); ++i) {
    preview[i] = max > 0.0 ? quantize(atlas.confidence[i] / max, 0.0, 1.0, 16) : 0;
  }
  write_binary_file(files.confidence_preview_png, encode_png(atlas.resolution(), 1, 16, preview));
  return files;
}

TextureAtlas read_atlas(const fs::path& dir) {
  const fs::path color16 = dir / "color16.png";
  const fs::path color8 = dir / "color.png";
  if (!fs::exists(color8) && !fs::exists(color16)) {
    fail(ErrorCode::Io, fmt::format("no atlas color image in '{}'", dir.string()));
  }
  const ImageRgb color = read_rgb(fs::exists(color16) ? color16 : color8);
  TextureAtlas atlas = atlas_from_image(color, 1.0);
  const fs::path conf = dir / "confidence.bin";
  if (fs::exists(conf)) {
    Grid<double> grid = decode_confidence(read_binary_file(conf));
    if (grid.resolution() != atlas.resolution()) {
      fail(ErrorCode::ResolutionMismatch, "atlas color and confidence resolutions differ");
    }
    atlas.confidence = std::move(grid);
    for (std::size_t i = 0; i < atlas.confidence.size(); ++i) {
      if (atlas.confidence[i] <= 0.0) atlas.color[i] = Vec3::Zero();
    }
  }
  atlas.validate();
  return atlas;
}

TextureAtlas read_atlas_or_texture(const fs::path& path) {
  if (fs::is_directory(path)) return read_atlas(path);
  if (!fs::exists(path)) fail(ErrorCode::Io, fmt::format("texture '{}' does not exist", path.string()));
  return atlas_from_image(read_rgb(path), 1.0);
}

} // namespace tapestry
