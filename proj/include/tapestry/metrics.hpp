#pragma once

#include "tapestry/atlas.hpp"
#include "tapestry/camera.hpp"
#include "tapestry/geometry.hpp"
#include "tapestry/mesh.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tapestry {

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) over all channels of the masked pixels (all pixels when
/// `mask` is null), capped at kPsnrCap. Values are expected in [0, 1].
template <class Pixel>
double psnr(const Grid<Pixel>& a, const Grid<Pixel>& b, const Mask* mask = nullptr);

/// Mean SSIM of the Rec.601 luma with an 11x11 Gaussian window (sigma 1.5),
/// C1 = 0.01^2, C2 = 0.03^2, evaluated over fully contained windows.
template <class Pixel>
double ssim(const Grid<Pixel>& a, const Grid<Pixel>& b);

/// Closed form for two constant images of luma `a` and `b`.
double ssim_of_constants(double a, double b);

struct FramePairReport {
  std::vector<double> psnr;
  std::vector<double> ssim;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  std::size_t frame_count = 0;
};

/// Per-frame masked PSNR and full-frame SSIM.
FramePairReport compare_frames(const std::vector<ImageRgb>& candidate, const std::vector<ImageRgb>& reference,
                               const std::vector<Mask>& masks);

struct BakeEvaluation {
  FramePairReport frames;
  double coverage = 0.0;
};

/// Renders `baked` along the trajectory and compares with renders of the
/// reference atlas, masked to object pixels.
BakeEvaluation evaluate_bake(const TriangleMesh& mesh, const TextureAtlas& baked, const TextureAtlas& reference,
                             const OrbitTrajectory& trajectory, double confidence_threshold = 0.05);

/// Same, against precomputed reference frames.
BakeEvaluation evaluate_bake(const TriangleMesh& mesh, const TextureAtlas& baked,
                             const std::vector<ImageRgb>& reference_frames, const OrbitTrajectory& trajectory,
                             double confidence_threshold = 0.05);

/// One line per frame plus a summary footer.
std::string evaluation_text(const BakeEvaluation& eval);
/// Machine-readable report; LPIPS/FVD fields are reserved (null).
std::string evaluation_json(const BakeEvaluation& eval);

} // namespace tapestry
