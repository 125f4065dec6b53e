#include "tapestry/image_io.hpp"

#include "tapestry/error.hpp"
#include "tapestry/util.hpp"

#include <fmt/format.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>

namespace tapestry {

namespace {

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err) *err = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

struct ReadCursor {
  const std::string* bytes;
  std::size_t offset;
};

void read_fn(png_structp png, png_bytep out, png_size_t len) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->offset + len > cur->bytes->size()) png_error(png, "truncated PNG stream");
  std::memcpy(out, cur->bytes->data() + cur->offset, len);
  cur->offset += len;
}

void write_fn(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), len);
}

void flush_fn(png_structp) {}

} // namespace

std::string encode_png(Resolution res, int channels, int bit_depth,
                       const std::vector<std::uint16_t>& samples) {
  if (!res.valid()) fail(ErrorCode::InvalidArgument, "cannot encode an empty image");
  if ((channels != 1 && channels != 3) || (bit_depth != 8 && bit_depth != 16)) {
    fail(ErrorCode::InvalidArgument, "unsupported PNG layout");
  }
  if (samples.size() != res.pixel_count() * channels) {
    fail(ErrorCode::InvalidArgument, "PNG sample buffer size mismatch");
  }
  std::string error;
  std::string out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn, png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::Io, "libpng initialisation failed");
  }
  const std::size_t bps = bit_depth / 8;
  const std::size_t row_bytes = static_cast<std::size_t>(res.width) * channels * bps;
  std::vector<png_byte> row(row_bytes);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::Io, "PNG encode failed: " + error);
  }
  png_set_write_fn(png, &out, write_fn, flush_fn);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, res.width, res.height, bit_depth,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < res.height; ++y) {
    const std::size_t base = static_cast<std::size_t>(y) * res.width * channels;
    for (std::size_t i = 0; i < static_cast<std::size_t>(res.width) * channels; ++i) {
      const std::uint16_t v = samples[base + i];
      if (bit_depth == 8) {
        row[i] = static_cast<png_byte>(v);
      } else {
        row[2 * i] = static_cast<png_byte>(v >> 8);  // PNG is big-endian
        row[2 * i + 1] = static_cast<png_byte>(v & 0xFF);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

PngImage decode_png(const std::string& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
    fail(ErrorCode::Io, "not a PNG stream");
  }
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn, png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::Io, "libpng initialisation failed");
  }
  ReadCursor cursor{&bytes, 0};
  PngImage img;
  std::vector<png_byte> row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::Io, "PNG decode failed: " + error);
  }
  png_set_read_fn(png, &cursor, read_fn);
  png_read_info(png, info);
  const int color_type = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  img.resolution = {static_cast<int>(png_get_image_width(png, info)),
                    static_cast<int>(png_get_image_height(png, info))};
  img.channels = channels;
  img.bit_depth = depth;
  if ((channels != 1 && channels != 3) || (depth != 8 && depth != 16)) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::Io, "unsupported PNG layout");
  }
  row.resize(png_get_rowbytes(png, info));
  img.samples.resize(img.resolution.pixel_count() * channels);
  for (int y = 0; y < img.resolution.height; ++y) {
    png_read_row(png, row.data(), nullptr);
    const std::size_t base = static_cast<std::size_t>(y) * img.resolution.width * channels;
    for (std::size_t i = 0; i < static_cast<std::size_t>(img.resolution.width) * channels; ++i) {
      img.samples[base + i] = depth == 8
                                  ? row[i]
                                  : static_cast<std::uint16_t>((row[2 * i] << 8) | row[2 * i + 1]);
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png(const std::filesystem::path& path, Resolution res, int channels, int bit_depth,
               const std::vector<std::uint16_t>& samples) {
  write_binary_file(path, encode_png(res, channels, bit_depth, samples));
}

PngImage read_png(const std::filesystem::path& path) {
  try {
    return decode_png(read_binary_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::uint16_t quantize(double value, double lo, double hi, int bit_depth) {
  const double max = bit_depth == 16 ? 65535.0 : 255.0;
  const double t = std::clamp((value - lo) / (hi - lo), 0.0, 1.0);
  return static_cast<std::uint16_t>(std::lround(t * max));
}

namespace {
std::string encode_rgb(const ImageRgb& image, int bit_depth) {
  std::vector<std::uint16_t> samples(image.size() * 3);
  for (std::size_t i = 0; i < image.size(); ++i) {
    for (int c = 0; c < 3; ++c) samples[3 * i + c] = quantize(image[i][c], 0.0, 1.0, bit_depth);
  }
  return encode_png(image.resolution(), 3, bit_depth, samples);
}
} // namespace

std::string encode_rgb8(const ImageRgb& image) { return encode_rgb(image, 8); }
std::string encode_rgb16(const ImageRgb& image) { return encode_rgb(image, 16); }

void write_rgb8(const std::filesystem::path& path, const ImageRgb& image) {
  write_binary_file(path, encode_rgb8(image));
}

ImageRgb to_rgb(const PngImage& png) {
  ImageRgb out(png.resolution);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (png.channels == 1) {
      const float v = static_cast<float>(png.normalized(i, 0));
      out[i] = Vec3f(v, v, v);
    } else {
      out[i] = Vec3f(static_cast<float>(png.normalized(i, 0)), static_cast<float>(png.normalized(i, 1)),
                     static_cast<float>(png.normalized(i, 2)));
    }
  }
  return out;
}

ImageRgb read_rgb(const std::filesystem::path& path) { return to_rgb(read_png(path)); }

} // namespace tapestry
