#pragma once

#include "tapestry/render.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace tapestry {

// Frame layout: <root>/frames/<kind>/<t:04>.png
//   normal, position  16-bit RGB, [-1, 1] -> [0, 65535]
//   depth             16-bit gray, [near, far] -> [0, 65535]; background 65535
//   mask, inpaint     8-bit gray, 0 or 255
//   color             8-bit RGB
enum class FrameKind { Normal, Position, Depth, Mask, Color, Inpaint };

std::string_view to_string(FrameKind kind);
FrameKind frame_kind_from_string(std::string_view name);
inline constexpr FrameKind kGeometryKinds[] = {FrameKind::Normal, FrameKind::Position,
                                               FrameKind::Depth, FrameKind::Mask};

std::filesystem::path frame_path(const std::filesystem::path& root, FrameKind kind, std::size_t t);

std::string encode_frame(const GBuffer& frame, FrameKind kind, double near, double far);

/// Writes every kind present in the buffers (color/inpaint only when set).
/// Returns the kinds written.
std::vector<FrameKind> write_frames(const std::filesystem::path& root,
                                    const std::vector<GBuffer>& frames, double near, double far);
void write_color_frames(const std::filesystem::path& root, const std::vector<ImageRgb>& frames);

/// Number of consecutive frames 0000.png, 0001.png, ... present for a kind.
std::size_t count_frames(const std::filesystem::path& root, FrameKind kind);

std::vector<ImageRgb> read_color_frames(const std::filesystem::path& root);
std::vector<Mask> read_mask_frames(const std::filesystem::path& root, FrameKind kind = FrameKind::Mask);

} // namespace tapestry
