#include "tapestry/frames_io.hpp"

#include "tapestry/error.hpp"
#include "tapestry/image_io.hpp"
#include "tapestry/util.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cmath>

namespace tapestry {

namespace fs = std::filesystem;

std::string_view to_string(FrameKind kind) {
  switch (kind) {
    case FrameKind::Normal: return "normal";
    case FrameKind::Position: return "position";
    case FrameKind::Depth: return "depth";
    case FrameKind::Mask: return "mask";
    case FrameKind::Color: return "color";
    case FrameKind::Inpaint: return "inpaint";
  }
  return "unknown";
}

FrameKind frame_kind_from_string(std::string_view name) {
  for (FrameKind k : {FrameKind::Normal, FrameKind::Position, FrameKind::Depth, FrameKind::Mask,
                      FrameKind::Color, FrameKind::Inpaint}) {
    if (to_string(k) == name) return k;
  }
  fail(ErrorCode::InvalidArgument, fmt::format("unknown frame kind '{}'", name));
}

fs::path frame_path(const fs::path& root, FrameKind kind, std::size_t t) {
  return root / "frames" / std::string(to_string(kind)) / fmt::format("{:04}.png", t);
}

namespace {

std::string encode_vec16(const Grid<Vec3f>& grid, const Mask& mask, bool warn_clamp) {
  std::vector<std::uint16_t> samples(grid.size() * 3, 0);
  bool clamped = false;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!mask[i]) continue;
    for (int c = 0; c < 3; ++c) {
      const double v = grid[i][c];
      if (v < -1.0 || v > 1.0) clamped = true;
      samples[3 * i + c] = quantize(v, -1.0, 1.0, 16);
    }
  }
  if (clamped && warn_clamp) spdlog::warn("position values outside [-1, 1] were clamped");
  return encode_png(grid.resolution(), 3, 16, samples);
}

std::string encode_mask8(const Mask& mask) {
  std::vector<std::uint16_t> samples(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) samples[i] = mask[i] ? 255 : 0;
  return encode_png(mask.resolution(), 1, 8, samples);
}

} // namespace

std::string encode_frame(const GBuffer& frame, FrameKind kind, double near, double far) {
  switch (kind) {
    case FrameKind::Normal: return encode_vec16(frame.normal, frame.mask, false);
    case FrameKind::Position: return encode_vec16(frame.position, frame.mask, true);
    case FrameKind::Depth: {
      std::vector<std::uint16_t> samples(frame.depth.size(), 65535);
      for (std::size_t i = 0; i < samples.size(); ++i) {
        if (frame.mask[i]) samples[i] = quantize(frame.depth[i], near, far, 16);
      }
      return encode_png(frame.resolution(), 1, 16, samples);
    }
    case FrameKind::Mask: return encode_mask8(frame.mask);
    case FrameKind::Color:
      if (!frame.color) fail(ErrorCode::InvalidArgument, "frame has no color raster");
      return encode_rgb8(*frame.color);
    case FrameKind::Inpaint:
      if (!frame.inpaint) fail(ErrorCode::InvalidArgument, "frame has no inpaint raster");
      return encode_mask8(*frame.inpaint);
  }
  fail(ErrorCode::InvalidArgument, "unknown frame kind");
}

std::vector<FrameKind> write_frames(const fs::path& root, const std::vector<GBuffer>& frames,
                                    double near, double far) {
  std::vector<FrameKind> kinds(std::begin(kGeometryKinds), std::end(kGeometryKinds));
  if (!frames.empty() && frames.front().color) kinds.push_back(FrameKind::Color);
  if (!frames.empty() && frames.front().inpaint) kinds.push_back(FrameKind::Inpaint);
  for (FrameKind kind : kinds) {
    fs::create_directories(root / "frames" / std::string(to_string(kind)));
    for (std::size_t t = 0; t < frames.size(); ++t) {
      write_binary_file(frame_path(root, kind, t), encode_frame(frames[t], kind, near, far));
    }
  }
  return kinds;
}

void write_color_frames(const fs::path& root, const std::vector<ImageRgb>& frames) {
  fs::create_directories(root / "frames" / "color");
  for (std::size_t t = 0; t < frames.size(); ++t) {
    write_binary_file(frame_path(root, FrameKind::Color, t), encode_rgb8(frames[t]));
  }
}

std::size_t count_frames(const fs::path& root, FrameKind kind) {
  std::size_t t = 0;
  while (fs::exists(frame_path(root, kind, t))) ++t;
  return t;
}

std::vector<ImageRgb> read_color_frames(const fs::path& root) {
  const std::size_t n = count_frames(root, FrameKind::Color);
  std::vector<ImageRgb> out;
  out.reserve(n);
  for (std::size_t t = 0; t < n; ++t) out.push_back(read_rgb(frame_path(root, FrameKind::Color, t)));
  return out;
}

std::vector<Mask> read_mask_frames(const fs::path& root, FrameKind kind) {
  const std::size_t n = count_frames(root, kind);
  std::vector<Mask> out;
  for (std::size_t t = 0; t < n; ++t) {
    const PngImage png = read_png(frame_path(root, kind, t));
    Mask m(png.resolution, 0);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = png.samples[i * png.channels] > 0 ? 1 : 0;
    out.push_back(std::move(m));
  }
  return out;
}

} // namespace tapestry
