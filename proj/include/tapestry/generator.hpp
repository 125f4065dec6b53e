#pragma once

#include "tapestry/atlas.hpp"
#include "tapestry/camera.hpp"
#include "tapestry/frames_io.hpp"
#include "tapestry/mesh.hpp"
#include "tapestry/render.hpp"

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tapestry {

/// Conditioning frames for one turntable generation. Refinement passes carry
/// color (partial texture) and inpaint rasters in every g-buffer.
struct GenerationRequest {
  int iteration = 1;
  OrbitTrajectory trajectory;
  std::vector<GBuffer> conditioning;
  Rotation base_rotation;
  std::string prompt;
  std::optional<std::filesystem::path> reference_image;

  std::vector<FrameKind> frame_kinds() const;
  /// Frame count, resolution and kind consistency.
  void validate() const;
};

struct GenerationResponse {
  std::vector<ImageRgb> frames;
  std::string provider;
  double seconds = 0.0;
};

class AppearanceGenerator {
 public:
  virtual ~AppearanceGenerator() = default;
  virtual GenerationResponse generate(const GenerationRequest& request) = 0;
  virtual std::string provider_id() const = 0;
  /// Oracle providers promise pixel-exact silhouettes.
  virtual bool strict_masks() const { return false; }
};

/// Largest tolerated fraction of pixels whose coverage differs between a
/// response and the conditioning masks (enforced for the oracle only).
inline constexpr double kMaskDisagreementLimit = 0.005;

/// Fraction of pixels where two coverage masks differ.
double mask_disagreement(const Mask& a, const Mask& b);

/// Throws MalformedResponse on count/resolution mismatch.
void validate_response(const GenerationRequest& request, const GenerationResponse& response);

/// Re-renders a reference-textured mesh along the request trajectory, rotated
/// by the request's base rotation.
GenerationResponse oracle_generate(const GenerationRequest& request, const TriangleMesh& reference_mesh,
                                   const TextureAtlas& reference_atlas);

class OracleGenerator final : public AppearanceGenerator {
 public:
  OracleGenerator(TriangleMesh reference_mesh, TextureAtlas reference_atlas);
  GenerationResponse generate(const GenerationRequest& request) override;
  std::string provider_id() const override { return "oracle"; }
  bool strict_masks() const override { return true; }
  int calls() const { return calls_; }

 private:
  TriangleMesh mesh_;
  TextureAtlas atlas_;
  int calls_ = 0;
};

// Request directory: frames/<kind>/<t>.png, trajectory.json, manifest.json.
std::string manifest_json(const GenerationRequest& request, const std::string& response_dir);
void write_request(const std::filesystem::path& dir, const GenerationRequest& request,
                   const std::string& response_dir = "../response");

struct ExchangeOptions {
  std::chrono::milliseconds timeout{std::chrono::minutes(30)};
  std::chrono::milliseconds poll_interval{200};
};

/// Writes <exchange>/request, then waits for <exchange>/response/DONE and
/// reads <exchange>/response/frames/color.
GenerationResponse fs_generate(const GenerationRequest& request, const std::filesystem::path& exchange_dir,
                               const ExchangeOptions& options);

class FsGenerator final : public AppearanceGenerator {
 public:
  FsGenerator(std::filesystem::path exchange_dir, ExchangeOptions options);
  GenerationResponse generate(const GenerationRequest& request) override;
  std::string provider_id() const override { return "fs"; }

 private:
  std::filesystem::path exchange_dir_;
  ExchangeOptions options_;
};

/// HTTP job protocol:
///   POST {endpoint}/jobs            multipart field "request" = zip of the request directory
///                                   -> {"id": "..."}
///   GET  {endpoint}/jobs/{id}       -> {"status": "queued|running|done|failed", "error": "..."}
///   GET  {endpoint}/jobs/{id}/result -> zip holding frames/color/<t>.png
GenerationResponse http_generate(const GenerationRequest& request, const std::string& endpoint,
                                 const ExchangeOptions& options);

/// Zip archive of the request directory layout.
std::string request_archive(const GenerationRequest& request);
/// Color frames from a response archive, in frame order.
std::vector<ImageRgb> frames_from_archive(const std::string& archive);

class HttpGenerator final : public AppearanceGenerator {
 public:
  HttpGenerator(std::string endpoint, ExchangeOptions options);
  GenerationResponse generate(const GenerationRequest& request) override;
  std::string provider_id() const override { return "http"; }

 private:
  std::string endpoint_;
  ExchangeOptions options_;
};

} // namespace tapestry
