#pragma once

#include "tapestry/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tapestry {

/// Decoded PNG with samples widened to 16 bits (8-bit files keep their 0..255 range).
struct PngImage {
  Resolution resolution;
  int channels = 0;   // 1 (gray) or 3 (rgb); alpha is dropped, palettes expanded
  int bit_depth = 0;  // 8 or 16
  std::vector<std::uint16_t> samples;

  double normalized(std::size_t pixel, int channel) const {
    const double max = bit_depth == 16 ? 65535.0 : 255.0;
    return samples[pixel * channels + channel] / max;
  }
};

/// Encodes with a fixed zlib level and no time chunk: equal pixels give equal bytes.
std::string encode_png(Resolution res, int channels, int bit_depth,
                       const std::vector<std::uint16_t>& samples);
PngImage decode_png(const std::string& bytes);

void write_png(const std::filesystem::path& path, Resolution res, int channels, int bit_depth,
               const std::vector<std::uint16_t>& samples);
PngImage read_png(const std::filesystem::path& path);

std::uint16_t quantize(double value, double lo, double hi, int bit_depth);

/// 8-bit sRGB-agnostic color PNG; values are clamped to [0, 1].
std::string encode_rgb8(const ImageRgb& image);
std::string encode_rgb16(const ImageRgb& image);
void write_rgb8(const std::filesystem::path& path, const ImageRgb& image);
ImageRgb to_rgb(const PngImage& png);
ImageRgb read_rgb(const std::filesystem::path& path);

} // namespace tapestry
