#include "tapestry/metrics.hpp"

#include "tapestry/bake.hpp"
#include "tapestry/error.hpp"
#include "tapestry/fusion.hpp"
#include "tapestry/render.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <array>
#include <cmath>

namespace tapestry {

namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;
constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

template <class Pixel>
double luma(const Pixel& p) {
  return 0.299 * p.x() + 0.587 * p.y() + 0.114 * p.z();
}

std::array<double, kWindow> gaussian_kernel() {
  std::array<double, kWindow> k{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double x = i - kWindow / 2;
    k[i] = std::exp(-x * x / (2.0 * kSigma * kSigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable "valid" filtering of a w x h field into (w-10) x (h-10).
std::vector<double> filter_valid(const std::vector<double>& in, int w, int h, const std::array<double, kWindow>& k) {
  const int ow = w - kWindow + 1;
  const int oh = h - kWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < kWindow; ++i) s += k[i] * in[static_cast<std::size_t>(y) * w + x + i];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < kWindow; ++i) s += k[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

} // namespace

template <class Pixel>
double psnr(const Grid<Pixel>& a, const Grid<Pixel>& b, const Mask* mask) {
  if (a.resolution() != b.resolution() || (mask && mask->resolution() != a.resolution())) {
    fail(ErrorCode::ResolutionMismatch, "psnr: image resolutions differ");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    for (int c = 0; c < 3; ++c) {
      const double d = static_cast<double>(a[i][c]) - static_cast<double>(b[i][c]);
      sum += d * d;
    }
    n += 3;
  }
  if (n == 0) fail(ErrorCode::InvalidArgument, "psnr: empty mask");
  const double mse = sum / static_cast<double>(n);
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

template <class Pixel>
double ssim(const Grid<Pixel>& a, const Grid<Pixel>& b) {
  if (a.resolution() != b.resolution()) fail(ErrorCode::ResolutionMismatch, "ssim: image resolutions differ");
  const int w = a.width();
  const int h = a.height();
  if (w < kWindow || h < kWindow) fail(ErrorCode::InvalidArgument, "ssim: image smaller than the 11x11 window");
  const std::size_t n = a.size();
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = luma(a[i]);
    y[i] = luma(b[i]);
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto k = gaussian_kernel();
  const auto mx = filter_valid(x, w, h, k);
  const auto my = filter_valid(y, w, h, k);
  const auto mxx = filter_valid(xx, w, h, k);
  const auto myy = filter_valid(yy, w, h, k);
  const auto mxy = filter_valid(xy, w, h, k);
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = mxx[i] - mx[i] * mx[i];
    const double vy = myy[i] - my[i] * my[i];
    const double cxy = mxy[i] - mx[i] * my[i];
    total += ((2.0 * mx[i] * my[i] + kC1) * (2.0 * cxy + kC2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + kC1) * (vx + vy + kC2));
  }
  return total / static_cast<double>(mx.size());
}

template double psnr<Vec3f>(const Grid<Vec3f>&, const Grid<Vec3f>&, const Mask*);
template double psnr<Vec3>(const Grid<Vec3>&, const Grid<Vec3>&, const Mask*);
template double ssim<Vec3f>(const Grid<Vec3f>&, const Grid<Vec3f>&);
template double ssim<Vec3>(const Grid<Vec3>&, const Grid<Vec3>&);

double ssim_of_constants(double a, double b) {
  return (2.0 * a * b + kC1) / (a * a + b * b + kC1);
}

FramePairReport compare_frames(const std::vector<ImageRgb>& candidate, const std::vector<ImageRgb>& reference,
                               const std::vector<Mask>& masks) {
  if (candidate.size() != reference.size() || candidate.size() != masks.size()) {
    fail(ErrorCode::InvalidArgument,
         fmt::format("compare_frames: {} candidate, {} reference and {} mask frames", candidate.size(),
                     reference.size(), masks.size()));
  }
  FramePairReport report;
  report.frame_count = candidate.size();
  for (std::size_t t = 0; t < candidate.size(); ++t) {
    report.psnr.push_back(psnr(candidate[t], reference[t], &masks[t]));
    report.ssim.push_back(ssim(candidate[t], reference[t]));
    report.mean_psnr += report.psnr.back();
    report.mean_ssim += report.ssim.back();
  }
  if (report.frame_count) {
    report.mean_psnr /= static_cast<double>(report.frame_count);
    report.mean_ssim /= static_cast<double>(report.frame_count);
  }
  return report;
}

namespace {

double baked_coverage(const TriangleMesh& mesh, const TextureAtlas& baked, double threshold) {
  const UvLayout layout = rasterize_uv_layout(mesh, baked.resolution());
  return coverage(baked, layout.occupancy(), threshold);
}

} // namespace

BakeEvaluation evaluate_bake(const TriangleMesh& mesh, const TextureAtlas& baked,
                             const std::vector<ImageRgb>& reference_frames, const OrbitTrajectory& trajectory,
                             double confidence_threshold) {
  require_uvs(mesh, "evaluate_bake");
  const std::vector<GBuffer> renders = render_turntable(mesh, &baked, trajectory, confidence_threshold);
  std::vector<ImageRgb> candidate;
  std::vector<Mask> masks;
  for (const GBuffer& g : renders) {
    candidate.push_back(*g.color);
    masks.push_back(g.mask);
  }
  BakeEvaluation eval;
  eval.frames = compare_frames(candidate, reference_frames, masks);
  eval.coverage = baked_coverage(mesh, baked, confidence_threshold);
  return eval;
}

BakeEvaluation evaluate_bake(const TriangleMesh& mesh, const TextureAtlas& baked, const TextureAtlas& reference,
                             const OrbitTrajectory& trajectory, double confidence_threshold) {
  require_uvs(mesh, "evaluate_bake");
  std::vector<ImageRgb> reference_frames;
  for (const GBuffer& g : render_turntable(mesh, &reference, trajectory, confidence_threshold)) {
    reference_frames.push_back(*g.color);
  }
  return evaluate_bake(mesh, baked, reference_frames, trajectory, confidence_threshold);
}

std::string evaluation_text(const BakeEvaluation& eval) {
  std::string out = fmt::format("{:>6}  {:>9}  {:>8}\n", "frame", "psnr[dB]", "ssim");
  for (std::size_t t = 0; t < eval.frames.frame_count; ++t) {
    out += fmt::format("{:>6}  {:>9.4f}  {:>8.6f}\n", t, eval.frames.psnr[t], eval.frames.ssim[t]);
  }
  out += fmt::format("mean    {:>9.4f}  {:>8.6f}\nframes  {}\ncoverage {:.6f}\n", eval.frames.mean_psnr,
                     eval.frames.mean_ssim, eval.frames.frame_count, eval.coverage);
  return out;
}

std::string evaluation_json(const BakeEvaluation& eval) {
  nlohmann::ordered_json j;
  auto frames = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < eval.frames.frame_count; ++t) {
    frames.push_back({{"frame", t}, {"psnr", eval.frames.psnr[t]}, {"ssim", eval.frames.ssim[t]}});
  }
  j["frames"] = std::move(frames);
  j["summary"] = {{"frame_count", eval.frames.frame_count},
                  {"mean_psnr", eval.frames.mean_psnr},
                  {"mean_ssim", eval.frames.mean_ssim},
                  {"coverage", eval.coverage},
                  {"lpips", nullptr},
                  {"fvd", nullptr}};
  return j.dump(2) + "\n";
}

} // namespace tapestry
