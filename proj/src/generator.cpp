#include "tapestry/generator.hpp"

#include "tapestry/error.hpp"
#include "tapestry/image_io.hpp"
#include "tapestry/util.hpp"
#include "tapestry/zip.hpp"

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <map>
#include <thread>

namespace tapestry {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

std::vector<FrameKind> GenerationRequest::frame_kinds() const {
  std::vector<FrameKind> kinds(std::begin(kGeometryKinds), std::end(kGeometryKinds));
  if (!conditioning.empty() && conditioning.front().color) kinds.push_back(FrameKind::Color);
  if (!conditioning.empty() && conditioning.front().inpaint) kinds.push_back(FrameKind::Inpaint);
  return kinds;
}

void GenerationRequest::validate() const {
  if (conditioning.size() != trajectory.poses.size() || conditioning.empty()) {
    fail(ErrorCode::InvalidArgument,
         fmt::format("request has {} conditioning frames for a {}-frame trajectory", conditioning.size(),
                     trajectory.poses.size()));
  }
  const Resolution res = trajectory.resolution();
  const bool color = conditioning.front().color.has_value();
  const bool inpaint = conditioning.front().inpaint.has_value();
  for (const GBuffer& g : conditioning) {
    if (g.resolution() != res) fail(ErrorCode::ResolutionMismatch, "conditioning frame resolution mismatch");
    if (g.color.has_value() != color || g.inpaint.has_value() != inpaint) {
      fail(ErrorCode::InvalidArgument, "conditioning frames carry inconsistent kinds");
    }
  }
}

double mask_disagreement(const Mask& a, const Mask& b) {
  if (a.resolution() != b.resolution()) return 1.0;
  std::size_t diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += (a[i] != 0) != (b[i] != 0);
  return a.size() ? static_cast<double>(diff) / static_cast<double>(a.size()) : 0.0;
}

void validate_response(const GenerationRequest& request, const GenerationResponse& response) {
  if (response.frames.size() != request.conditioning.size()) {
    fail(ErrorCode::MalformedResponse,
         fmt::format("provider '{}' returned {} frames, expected {}", response.provider,
                     response.frames.size(), request.conditioning.size()));
  }
  const Resolution res = request.trajectory.resolution();
  for (std::size_t t = 0; t < response.frames.size(); ++t) {
    const Resolution got = response.frames[t].resolution();
    if (got != res) {
      fail(ErrorCode::MalformedResponse,
           fmt::format("provider '{}' frame {} is {}x{}, expected {}x{}", response.provider, t, got.width,
                       got.height, res.width, res.height));
    }
  }
}

namespace {

void warn_on_silhouette_drift(const GenerationRequest& request, const GenerationResponse& response) {
  for (std::size_t t = 0; t < response.frames.size(); ++t) {
    const ImageRgb& frame = response.frames[t];
    Mask painted(frame.resolution(), 0);
    for (std::size_t i = 0; i < frame.size(); ++i) painted[i] = frame[i].maxCoeff() > 0.0f ? 1 : 0;
    const double d = mask_disagreement(painted, request.conditioning[t].mask);
    if (d > kMaskDisagreementLimit) {
      spdlog::warn("provider '{}' frame {}: silhouette differs from conditioning on {:.2f}% of pixels",
                   response.provider, t, 100.0 * d);
    }
  }
}

} // namespace

GenerationResponse oracle_generate(const GenerationRequest& request, const TriangleMesh& reference_mesh,
                                   const TextureAtlas& reference_atlas) {
  request.validate();
  const auto start = Clock::now();
  const TriangleMesh mesh = request.base_rotation.is_identity()
                                ? reference_mesh
                                : rotate_mesh(reference_mesh, request.base_rotation);
  const std::vector<GBuffer> renders = render_turntable(mesh, &reference_atlas, request.trajectory, 0.0);
  GenerationResponse response;
  response.provider = "oracle";
  for (std::size_t t = 0; t < renders.size(); ++t) {
    const double d = mask_disagreement(renders[t].mask, request.conditioning[t].mask);
    if (d > kMaskDisagreementLimit) {
      fail(ErrorCode::GeometryMismatch,
           fmt::format("oracle frame {}: reference silhouette differs from conditioning on {:.2f}% of pixels",
                       t, 100.0 * d));
    }
    response.frames.push_back(*renders[t].color);
  }
  response.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  validate_response(request, response);
  return response;
}

OracleGenerator::OracleGenerator(TriangleMesh reference_mesh, TextureAtlas reference_atlas)
    : mesh_(std::move(reference_mesh)), atlas_(std::move(reference_atlas)) {
  require_uvs(mesh_, "oracle generator");
  atlas_.validate();
}

GenerationResponse OracleGenerator::generate(const GenerationRequest& request) {
  ++calls_;
  return oracle_generate(request, mesh_, atlas_);
}

std::string manifest_json(const GenerationRequest& request, const std::string& response_dir) {
  nlohmann::ordered_json j;
  const Resolution res = request.trajectory.resolution();
  j["prompt"] = request.prompt;
  j["trajectory"] = "trajectory.json";
  std::vector<std::string> kinds;
  for (FrameKind k : request.frame_kinds()) kinds.emplace_back(to_string(k));
  j["frame_kinds"] = kinds;
  j["frame_count"] = request.conditioning.size();
  j["resolution"] = {res.width, res.height};
  j["iteration"] = request.iteration;
  const auto& q = request.base_rotation.quaternion;
  j["base_rotation"] = {q.w(), q.x(), q.y(), q.z()};
  j["reference_image"] = request.reference_image ? nlohmann::ordered_json(request.reference_image->string())
                                                 : nlohmann::ordered_json(nullptr);
  j["response_dir"] = response_dir;
  return j.dump(2) + "\n";
}

void write_request(const fs::path& dir, const GenerationRequest& request, const std::string& response_dir) {
  request.validate();
  fs::create_directories(dir);
  const auto& pose = request.trajectory.poses.front();
  write_frames(dir, request.conditioning, pose.near, pose.far);
  save_trajectory(request.trajectory, dir / "trajectory.json");
  // Manifest goes last, via rename.
  write_text_file(dir / "manifest.json.tmp", manifest_json(request, response_dir));
  fs::rename(dir / "manifest.json.tmp", dir / "manifest.json");
}

GenerationResponse fs_generate(const GenerationRequest& request, const fs::path& exchange_dir,
                               const ExchangeOptions& options) {
  const auto start = Clock::now();
  const fs::path request_dir = exchange_dir / "request";
  const fs::path response_dir = exchange_dir / "response";
  std::error_code ec;
  fs::remove_all(request_dir, ec);
  fs::remove_all(response_dir, ec);
  fs::create_directories(exchange_dir);
  write_request(request_dir, request, "../response");

  const fs::path done = response_dir / "DONE";
  while (!fs::exists(done)) {
    if (Clock::now() - start > options.timeout) {
      fail(ErrorCode::Timeout,
           fmt::format("no response in '{}' within {} ms", response_dir.string(), options.timeout.count()));
    }
    std::this_thread::sleep_for(options.poll_interval);
  }
  GenerationResponse response;
  response.provider = "fs";
  try {
    response.frames = read_color_frames(response_dir);
  } catch (const Error& e) {
    fail(ErrorCode::MalformedResponse, e.what());
  }
  response.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  validate_response(request, response);
  warn_on_silhouette_drift(request, response);
  return response;
}

FsGenerator::FsGenerator(fs::path exchange_dir, ExchangeOptions options)
    : exchange_dir_(std::move(exchange_dir)), options_(options) {}

GenerationResponse FsGenerator::generate(const GenerationRequest& request) {
  return fs_generate(request, exchange_dir_, options_);
}

std::string request_archive(const GenerationRequest& request) {
  request.validate();
  std::vector<ZipEntry> entries;
  entries.push_back({"manifest.json", manifest_json(request, "")});
  entries.push_back({"trajectory.json", trajectory_to_json(request.trajectory)});
  const auto& pose = request.trajectory.poses.front();
  for (FrameKind kind : request.frame_kinds()) {
    for (std::size_t t = 0; t < request.conditioning.size(); ++t) {
      entries.push_back({fmt::format("frames/{}/{:04}.png", to_string(kind), t),
                         encode_frame(request.conditioning[t], kind, pose.near, pose.far)});
    }
  }
  return make_zip(entries);
}

std::vector<ImageRgb> frames_from_archive(const std::string& archive) {
  std::map<std::string, const ZipEntry*> color;
  const std::vector<ZipEntry> entries = read_zip(archive);
  for (const ZipEntry& e : entries) {
    if (e.name.rfind("frames/color/", 0) == 0) color[e.name] = &e;
  }
  std::vector<ImageRgb> frames;
  for (std::size_t t = 0;; ++t) {
    const auto it = color.find(fmt::format("frames/color/{:04}.png", t));
    if (it == color.end()) break;
    try {
      frames.push_back(to_rgb(decode_png(it->second->data)));
    } catch (const Error& e) {
      fail(ErrorCode::MalformedResponse, fmt::format("{}: {}", it->first, e.what()));
    }
  }
  return frames;
}

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash
};

Endpoint parse_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) fail(ErrorCode::InvalidArgument, "endpoint must look like http://host:port[/path]");
  const auto path = url.find('/', scheme + 3);
  Endpoint e{url.substr(0, path), path == std::string::npos ? "" : url.substr(path)};
  while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
  return e;
}

nlohmann::json parse_body(const httplib::Result& res, const std::string& what) {
  if (!res) fail(ErrorCode::Transport, fmt::format("{}: {}", what, httplib::to_string(res.error())));
  if (res->status < 200 || res->status >= 300) {
    fail(ErrorCode::Transport, fmt::format("{}: HTTP {}", what, res->status));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::Transport, fmt::format("{}: response is not JSON", what));
  }
}

} // namespace

GenerationResponse http_generate(const GenerationRequest& request, const std::string& endpoint,
                                 const ExchangeOptions& options) {
  const auto start = Clock::now();
  const Endpoint ep = parse_endpoint(endpoint);
  httplib::Client client(ep.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options.timeout).count();
  client.set_connection_timeout(std::max<long>(1, static_cast<long>(std::min<long long>(secs, 30))), 0);
  client.set_read_timeout(std::max<long>(1, static_cast<long>(secs)), 0);

  httplib::MultipartFormDataItems items = {
      {"request", request_archive(request), "request.zip", "application/zip"}};
  const nlohmann::json created = parse_body(client.Post(ep.prefix + "/jobs", items), "job submission");
  if (!created.contains("id")) fail(ErrorCode::Transport, "job submission: missing job id");
  const std::string id = created["id"].is_string() ? created["id"].get<std::string>() : created["id"].dump();

  for (;;) {
    const nlohmann::json status = parse_body(client.Get(ep.prefix + "/jobs/" + id), "job status");
    const std::string state = status.value("status", "");
    if (state == "done") break;
    if (state == "failed") {
      fail(ErrorCode::RemoteJob, fmt::format("remote job {} failed: {}", id, status.value("error", "unknown error")));
    }
    if (Clock::now() - start > options.timeout) {
      fail(ErrorCode::Timeout, fmt::format("remote job {} not done within {} ms", id, options.timeout.count()));
    }
    std::this_thread::sleep_for(options.poll_interval);
  }

  const auto result = client.Get(ep.prefix + "/jobs/" + id + "/result");
  if (!result) fail(ErrorCode::Transport, "result download: " + httplib::to_string(result.error()));
  if (result->status != 200) fail(ErrorCode::Transport, fmt::format("result download: HTTP {}", result->status));
  GenerationResponse response;
  response.provider = "http";
  response.frames = frames_from_archive(result->body);
  response.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  validate_response(request, response);
  warn_on_silhouette_drift(request, response);
  return response;
}

HttpGenerator::HttpGenerator(std::string endpoint, ExchangeOptions options)
    : endpoint_(std::move(endpoint)), options_(options) {}

GenerationResponse HttpGenerator::generate(const GenerationRequest& request) {
  return http_generate(request, endpoint_, options_);
}

} // namespace tapestry
