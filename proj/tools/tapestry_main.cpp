// tapestry: turntable conditioning, UV baking and progressive texturing.

#include "tapestry/error.hpp"
#include "tapestry/pipeline.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <charconv>
#include <cmath>
#include <numbers>

using namespace tapestry;

namespace {

Resolution parse_resolution(const std::string& text) {
  const auto parse_int = [&](std::string_view s) {
    int v = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size() || v <= 0) {
      fail(ErrorCode::InvalidArgument, fmt::format("resolution '{}' is not N or WxH", text));
    }
    return v;
  };
  const std::string_view all(text);
  const auto x = all.find('x');
  if (x == std::string_view::npos) {
    const int n = parse_int(all);
    return {n, n};
  }
  return {parse_int(all.substr(0, x)), parse_int(all.substr(x + 1))};
}

// Flat option storage; strings are converted once parsing is done.
struct Options {
  PipelineConfig config;
  std::string frame_resolution = "512";
  std::string atlas_resolution = "1024";
  std::string fov = "auto";
  std::string update = "additive";
  std::string generator = "oracle";
  std::vector<double> radius_range{1.5, 2.5};
  std::vector<double> height_range{0.0, 1.5};
  std::string plan_file;
  std::string log_level = "info";

  PipelineConfig finish() const {
    PipelineConfig c = config;
    c.trajectory.resolution = parse_resolution(frame_resolution);
    c.atlas_resolution = parse_resolution(atlas_resolution);
    if (fov == "auto") {
      c.trajectory.fov_y.reset();
    } else {
      double deg = 0.0;
      const auto [end, ec] = std::from_chars(fov.data(), fov.data() + fov.size(), deg);
      if (ec != std::errc() || end != fov.data() + fov.size()) {
        fail(ErrorCode::InvalidArgument, fmt::format("fov '{}' is neither 'auto' nor degrees", fov));
      }
      c.trajectory.fov_y = deg * std::numbers::pi / 180.0;
    }
    if (update == "additive") {
      c.update = ConfidenceUpdate::Additive;
    } else if (update == "max") {
      c.update = ConfidenceUpdate::Max;
    } else {
      fail(ErrorCode::InvalidArgument, fmt::format("confidence update '{}' is neither 'additive' nor 'max'", update));
    }
    c.generator.kind = generator_kind_from_string(generator);
    if (radius_range.size() != 2 || height_range.size() != 2) {
      fail(ErrorCode::InvalidArgument, "ranges take exactly two values");
    }
    c.radius_range = {radius_range[0], radius_range[1]};
    c.height_range = {height_range[0], height_range[1]};
    if (!plan_file.empty()) c.plan = plan_file;
    return c;
  }
};

void add_common(CLI::App& cmd, Options& o, bool needs_mesh) {
  PipelineConfig& c = o.config;
  auto* mesh = cmd.add_option("--mesh", c.mesh, "Input mesh (.obj or .glb)");
  if (needs_mesh) mesh->required();
  cmd.add_option("-o,--out", c.output, "Output directory")->required();
  cmd.add_option("--radius", c.trajectory.radius, "Orbit radius r")->capture_default_str();
  cmd.add_option("--height", c.trajectory.height, "Camera height z")->capture_default_str();
  cmd.add_option("--frame-count", c.trajectory.frame_count, "Frames per orbit T")->capture_default_str();
  cmd.add_option("--resolution", o.frame_resolution, "Frame resolution N or WxH")->capture_default_str();
  cmd.add_option("--fov", o.fov, "Vertical field of view in degrees, or 'auto'")->capture_default_str();
  cmd.add_option("--fov-margin", c.trajectory.fov_margin, "Bounding sphere margin for the automatic FOV")
      ->capture_default_str();
  cmd.add_option("--atlas-resolution", o.atlas_resolution, "Atlas resolution N or WxH")->capture_default_str();
  cmd.add_option("--penalty-scale", c.penalty_scale, "Depth penalty gain")->capture_default_str();
  cmd.add_option("--threshold", c.confidence_threshold, "Confidence threshold for coverage")->capture_default_str();
  cmd.add_option("--log-level", o.log_level, "trace, debug, info, warn, error or off")->capture_default_str();
}

void add_progressive(CLI::App& cmd, Options& o) {
  PipelineConfig& c = o.config;
  cmd.add_option("--coverage-target", c.coverage_target, "Stop once coverage reaches this")->capture_default_str();
  cmd.add_option("--max-iterations", c.max_iterations, "Iteration limit")->capture_default_str();
  cmd.add_option("--yaws", c.candidate_yaws, "Candidate yaw angles (degrees)")->delimiter(',');
  cmd.add_option("--pitches", c.candidate_pitches, "Candidate pitch angles (degrees)")->delimiter(',');
  cmd.add_option("--update", o.update, "Confidence update: additive or max")->capture_default_str();
  cmd.add_option("--plan", o.plan_file, "Plan file (overrides the flat plan options)");
}

void add_generator(CLI::App& cmd, Options& o) {
  GeneratorConfig& g = o.config.generator;
  cmd.add_option("--generator", o.generator, "oracle, fs or http")->capture_default_str();
  cmd.add_option("--reference", g.reference, "Oracle reference texture (atlas directory or image)");
  cmd.add_option("--exchange", g.exchange_dir, "Exchange directory for the fs generator");
  cmd.add_option("--endpoint", g.endpoint, "Base URL for the http generator")->envname("TAPESTRY_ENDPOINT");
  cmd.add_option("--timeout", g.timeout_seconds, "Generator timeout in seconds")
      ->envname("TAPESTRY_TIMEOUT")
      ->capture_default_str();
  cmd.add_option("--poll", g.poll_seconds, "Generator poll interval in seconds")->capture_default_str();
  cmd.add_option("--prompt", o.config.prompt, "Text prompt passed to the generator");
}

int exit_code(const Error& e) { return is_validation_error(e.code()) ? 1 : 2; }

} // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("tapestry");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"Turntable conditioning, UV baking and progressive texturing"};
  app.set_config("--config", "", "TOML configuration file (flags override it)");
  app.require_subcommand(1);

  Options o;
  std::string frames_dir;
  std::string rotation;
  std::string atlas;
  std::string reference;
  std::vector<std::string> assets;
  std::string plan_base;
  std::vector<std::string> plan_rotations;

  auto* condition = app.add_subcommand("condition", "Render geometry conditioning frames and the trajectory");
  add_common(*condition, o, true);

  auto* bake = app.add_subcommand("bake", "Bake color frames into a texture atlas");
  add_common(*bake, o, true);
  bake->add_option("--frames", frames_dir, "Directory holding frames/color and trajectory.json")->required();
  bake->add_option("--rotation", rotation, "Base rotation of the frames as yaw:pitch degrees");

  auto* run = app.add_subcommand("run", "Progressive texturing with a generator");
  add_common(*run, o, true);
  add_progressive(*run, o);
  add_generator(*run, o);

  auto* eval = app.add_subcommand("eval", "Compare an atlas against a reference");
  add_common(*eval, o, true);
  eval->add_option("--atlas", atlas, "Atlas directory or texture image")->required();
  eval->add_option("--against", reference, "Reference atlas/texture or a directory with frames/color")->required();

  auto* dataset = app.add_subcommand("dataset", "Seeded conditioning and reference renders for many assets");
  add_common(*dataset, o, false);
  dataset->add_option("--seed", o.config.seed, "Random seed")->capture_default_str();
  dataset->add_option("--radius-range", o.radius_range, "Orbit radius range lo,hi")->delimiter(',')->expected(2);
  dataset->add_option("--height-range", o.height_range, "Camera height range lo,hi")->delimiter(',')->expected(2);
  dataset->add_option("assets", assets, "Assets as mesh or mesh:texture")->required();

  auto* plan = app.add_subcommand("plan", "Write or edit a bake plan file");
  add_common(*plan, o, false);
  add_progressive(*plan, o);
  plan->add_option("--from", plan_base, "Existing plan to edit");
  plan->add_option("--rotations", plan_rotations, "Fixed rotation list, yaw:pitch each")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    spdlog::set_level(spdlog::level::from_str(o.log_level));
    const PipelineConfig config = o.finish();
    if (condition->parsed()) {
      cmd_condition(config);
    } else if (bake->parsed()) {
      std::optional<Rotation> r;
      if (!rotation.empty()) r = parse_rotation(rotation);
      const BakeResult result = cmd_bake(config, frames_dir, r);
      fmt::print("coverage {:.6f}\n", result.coverage);
    } else if (run->parsed()) {
      cmd_run(config);
    } else if (eval->parsed()) {
      cmd_eval(config, atlas, reference);
    } else if (dataset->parsed()) {
      const auto entries = cmd_dataset(config, assets);
      std::size_t ok = 0;
      for (const auto& e : entries) ok += e.ok ? 1 : 0;
      fmt::print("{} of {} assets written\n", ok, entries.size());
      if (ok == 0) return 2;
    } else if (plan->parsed()) {
      std::vector<Rotation> rotations;
      for (const auto& r : plan_rotations) rotations.push_back(parse_rotation(r));
      std::optional<std::filesystem::path> base;
      if (!plan_base.empty()) base = plan_base;
      cmd_plan(config, config.output, base, rotations);
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code(e);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
