#include "tapestry/bake.hpp"
#include "tapestry/error.hpp"
#include "tapestry/fixtures.hpp"
#include "tapestry/fusion.hpp"
#include "tapestry/generator.hpp"
#include "tapestry/metrics.hpp"
#include "tapestry/pipeline.hpp"
#include "tapestry/render.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace tapestry;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using BoolArray = py::array_t<bool, py::array::c_style | py::array::forcecast>;

Resolution to_resolution(const std::pair<int, int>& wh) { return {wh.first, wh.second}; }
std::pair<int, int> from_resolution(Resolution r) { return {r.width, r.height}; }

template <class Scalar, int N>
py::array_t<Scalar> vec_grid(const Grid<Eigen::Matrix<Scalar, N, 1>>& g) {
  py::array_t<Scalar> out({g.height(), g.width(), N});
  auto v = out.template mutable_unchecked<3>();
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x)
      for (int k = 0; k < N; ++k) v(y, x, k) = g(x, y)[k];
  return out;
}

template <class Out, class T>
py::array_t<Out> scalar_grid(const Grid<T>& g) {
  py::array_t<Out> out({g.height(), g.width()});
  auto v = out.template mutable_unchecked<2>();
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) v(y, x) = static_cast<Out>(g(x, y));
  return out;
}

template <class Scalar, class Array>
Grid<Eigen::Matrix<Scalar, 3, 1>> rgb_from(const Array& a, const char* what) {
  if (a.ndim() != 3 || a.shape(2) != 3)
    fail(ErrorCode::InvalidArgument, std::string(what) + ": expected an array of shape (H, W, 3)");
  const auto v = a.template unchecked<3>();
  Grid<Eigen::Matrix<Scalar, 3, 1>> g({static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0))});
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) g(x, y) = {static_cast<Scalar>(v(y, x, 0)), static_cast<Scalar>(v(y, x, 1)), static_cast<Scalar>(v(y, x, 2))};
  return g;
}

template <class T, class Array>
Grid<T> gray_from(const Array& a, const char* what) {
  if (a.ndim() != 2) fail(ErrorCode::InvalidArgument, std::string(what) + ": expected an array of shape (H, W)");
  const auto v = a.template unchecked<2>();
  Grid<T> g({static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0))});
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) g(x, y) = static_cast<T>(v(y, x));
  return g;
}

py::dict gbuffer_dict(const GBuffer& g) {
  py::dict d;
  d["mask"] = scalar_grid<bool>(g.mask);
  d["depth"] = scalar_grid<float>(g.depth);
  d["normal"] = vec_grid(g.normal);
  d["position"] = vec_grid(g.position);
  if (g.color) d["color"] = vec_grid(*g.color);
  if (g.inpaint) d["inpaint"] = scalar_grid<bool>(*g.inpaint);
  return d;
}

ConfidenceUpdate update_from(const std::string& name) {
  if (name == "additive") return ConfidenceUpdate::Additive;
  if (name == "max") return ConfidenceUpdate::Max;
  fail(ErrorCode::InvalidArgument, "confidence update must be 'additive' or 'max', got '" + name + "'");
}

std::vector<ImageRgb> frames_from(const std::vector<FloatArray>& frames) {
  std::vector<ImageRgb> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(rgb_from<float>(f, "frame"));
  return out;
}

py::dict record_dict(const IterationRecord& r) {
  py::dict d;
  d["iteration"] = r.iteration;
  d["yaw"] = r.rotation.yaw_degrees;
  d["pitch"] = r.rotation.pitch_degrees;
  d["candidate_index"] = r.candidate_index ? py::cast(*r.candidate_index) : py::none();
  d["candidate_scores"] = r.candidate_scores;
  d["coverage"] = r.coverage;
  d["provider"] = r.provider;
  return d;
}

} // namespace

PYBIND11_MODULE(_tapestry, m) {
  m.doc() = "Turntable texture baking and fusion core";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result([&] { return py::exception<Error>(m, "Error", PyExc_RuntimeError); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const py::object& type = error_type.get_stored();
      py::object exc = type(py::str(e.what()));
      exc.attr("code") = std::string(to_string(e.code()));
      exc.attr("validation") = is_validation_error(e.code());
      PyErr_SetObject(type.ptr(), exc.ptr());
    }
  });

  py::class_<TriangleMesh>(m, "Mesh")
      .def_property_readonly("positions",
                             [](const TriangleMesh& mesh) {
                               py::array_t<double> out({static_cast<py::ssize_t>(mesh.positions.size()), py::ssize_t{3}});
                               auto v = out.mutable_unchecked<2>();
                               for (std::size_t i = 0; i < mesh.positions.size(); ++i)
                                 for (int k = 0; k < 3; ++k) v(i, k) = mesh.positions[i][k];
                               return out;
                             })
      .def_property_readonly("face_count", [](const TriangleMesh& mesh) { return mesh.faces.size(); })
      .def_property_readonly("has_uvs", &TriangleMesh::has_uvs)
      .def_property_readonly("bounding_radius", [](const TriangleMesh& mesh) { return bounding_radius(mesh); })
      .def("rotated", [](const TriangleMesh& mesh, double yaw, double pitch) {
        return rotate_mesh(mesh, Rotation::from_yaw_pitch(yaw, pitch));
      }, py::arg("yaw"), py::arg("pitch"))
      .def("save_obj", [](const TriangleMesh& mesh, const std::filesystem::path& path) { save_obj(mesh, path); });

  m.def("load_mesh", [](const std::filesystem::path& path, bool normalize) {
    const LoadedMesh loaded = load_mesh(path);
    return normalize ? normalize_mesh(loaded.mesh) : loaded.mesh;
  }, py::arg("path"), py::arg("normalize") = true, "Load an OBJ or GLB mesh, centered and scaled to radius 1 by default.");
  m.def("uv_sphere", [](int segments, int rings, bool equal_area) {
    return fixtures::uv_sphere(segments, rings, equal_area ? fixtures::SphereUv::EqualArea : fixtures::SphereUv::LatLong);
  }, py::arg("segments") = 64, py::arg("rings") = 33, py::arg("equal_area") = false);
  m.def("mug", &fixtures::mug, py::arg("segments") = 64);
  m.def("cube", &fixtures::cube, py::arg("half_extent") = 0.5);

  py::class_<TextureAtlas>(m, "Atlas")
      .def(py::init([](std::pair<int, int> resolution) { return TextureAtlas(to_resolution(resolution)); }),
           py::arg("resolution"))
      .def(py::init([](const DoubleArray& color, const DoubleArray& confidence) {
        TextureAtlas a;
        a.color = rgb_from<double>(color, "color");
        a.confidence = gray_from<double>(confidence, "confidence");
        a.validate();
        return a;
      }), py::arg("color"), py::arg("confidence"))
      .def_property_readonly("resolution", [](const TextureAtlas& a) { return from_resolution(a.resolution()); })
      .def_property_readonly("color", [](const TextureAtlas& a) { return vec_grid(a.color); })
      .def_property_readonly("confidence", [](const TextureAtlas& a) { return scalar_grid<double>(a.confidence); })
      .def("save", [](const TextureAtlas& a, const std::filesystem::path& dir) { write_atlas(a, dir, true); });
  m.def("read_atlas", &read_atlas_or_texture, py::arg("path"));
  m.def("checker_atlas", [](std::pair<int, int> resolution, int cells) {
    return fixtures::checker_atlas(to_resolution(resolution), cells);
  }, py::arg("resolution"), py::arg("cells"));

  py::class_<OrbitTrajectory>(m, "Trajectory")
      .def_readonly("radius", &OrbitTrajectory::radius)
      .def_readonly("height", &OrbitTrajectory::height)
      .def_property_readonly("fov_y", &OrbitTrajectory::fov_y)
      .def_property_readonly("resolution", [](const OrbitTrajectory& t) { return from_resolution(t.resolution()); })
      .def("__len__", &OrbitTrajectory::size)
      .def_property_readonly("positions", [](const OrbitTrajectory& t) {
        py::array_t<double> out({static_cast<py::ssize_t>(t.poses.size()), py::ssize_t{3}});
        auto v = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < t.poses.size(); ++i)
          for (int k = 0; k < 3; ++k) v(i, k) = t.poses[i].position[k];
        return out;
      })
      .def_property_readonly("forward", [](const OrbitTrajectory& t) {
        py::array_t<double> out({static_cast<py::ssize_t>(t.poses.size()), py::ssize_t{3}});
        auto v = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < t.poses.size(); ++i)
          for (int k = 0; k < 3; ++k) v(i, k) = t.poses[i].forward()[k];
        return out;
      })
      .def("to_json", &trajectory_to_json)
      .def_static("from_json", &trajectory_from_json);

  m.def("orbit_trajectory", [](double radius, double height, int frame_count, std::pair<int, int> resolution,
                               std::optional<double> fov_y, double margin) {
    TrajectoryParams p;
    p.radius = radius;
    p.height = height;
    p.frame_count = frame_count;
    p.resolution = to_resolution(resolution);
    p.fov_y = fov_y;
    p.fov_margin = margin;
    return p.build();
  }, py::arg("radius") = 2.0, py::arg("height") = 1.0, py::arg("frame_count") = kDefaultFrameCount,
        py::arg("resolution") = std::pair{512, 512}, py::arg("fov_y") = py::none(), py::arg("margin") = 1.1,
        "Circular orbit around the origin; the field of view (radians) is automatic when omitted.");
  m.def("compute_fov", &compute_fov, py::arg("distance"), py::arg("bound_radius"), py::arg("margin"));

  m.def("render_turntable", [](const TriangleMesh& mesh, std::optional<TextureAtlas> atlas,
                               const OrbitTrajectory& trajectory, double threshold) {
    py::list out;
    for (const GBuffer& g : render_turntable(mesh, atlas ? &*atlas : nullptr, trajectory, threshold))
      out.append(gbuffer_dict(g));
    return out;
  }, py::arg("mesh"), py::arg("atlas") = py::none(), py::arg("trajectory"), py::arg("confidence_threshold") = 0.05,
        "One dict of numpy rasters per frame: mask, depth, normal, position, and color/inpaint with an atlas.");

  m.def("angle_weight", [](const std::array<double, 3>& n, const std::array<double, 3>& v) {
    return angle_weight(Vec3(n[0], n[1], n[2]), Vec3(v[0], v[1], v[2]));
  }, py::arg("normal"), py::arg("view_dir"));
  m.def("depth_penalty", [](const FloatArray& depth, int x, int y, double scale) {
    return depth_penalty(gray_from<float>(depth, "depth"), x, y, scale);
  }, py::arg("depth"), py::arg("x"), py::arg("y"), py::arg("scale"));

  m.def("bake", [](const TriangleMesh& mesh, const std::vector<FloatArray>& frames, const OrbitTrajectory& trajectory,
                   std::pair<int, int> atlas_resolution, double penalty_scale) {
    const std::vector<ImageRgb> colors = frames_from(frames);
    std::vector<GBuffer> gbuffers;
    {
      py::gil_scoped_release release;
      gbuffers = render_turntable(mesh, nullptr, trajectory, 0.0);
    }
    py::gil_scoped_release release;
    const Baker baker(mesh, BakeConfig{to_resolution(atlas_resolution), penalty_scale});
    return baker.bake_video(colors, gbuffers, trajectory);
  }, py::arg("mesh"), py::arg("frames"), py::arg("trajectory"), py::arg("atlas_resolution") = std::pair{1024, 1024},
        py::arg("penalty_scale") = 8.0, "Back-project color frames (H, W, 3) into a UV atlas.");

  m.def("fuse", [](const TextureAtlas& a, const TextureAtlas& b, const std::string& update) {
    return fuse(a, b, update_from(update));
  }, py::arg("a"), py::arg("b"), py::arg("update") = "additive");
  m.def("coverage", [](const TriangleMesh& mesh, const TextureAtlas& atlas, double threshold) {
    return coverage(atlas, rasterize_uv_layout(mesh, atlas.resolution()).occupancy(), threshold);
  }, py::arg("mesh"), py::arg("atlas"), py::arg("threshold") = 0.05);
  m.def("score_rotation", [](const TriangleMesh& mesh, const TextureAtlas& atlas, double yaw, double pitch,
                             const OrbitTrajectory& trajectory, double threshold) {
    py::gil_scoped_release release;
    return score_rotation(mesh, atlas, Rotation::from_yaw_pitch(yaw, pitch), trajectory, threshold);
  }, py::arg("mesh"), py::arg("atlas"), py::arg("yaw"), py::arg("pitch"), py::arg("trajectory"),
        py::arg("threshold") = 0.05);
  m.def("select_base_rotation", [](const TriangleMesh& mesh, const TextureAtlas& atlas,
                                   const std::vector<std::pair<double, double>>& candidates,
                                   const OrbitTrajectory& trajectory, double threshold) {
    std::vector<Rotation> rotations;
    for (const auto& [yaw, pitch] : candidates) rotations.push_back(Rotation::from_yaw_pitch(yaw, pitch));
    py::gil_scoped_release release;
    const RotationChoice choice = select_base_rotation(mesh, atlas, rotations, trajectory, threshold);
    return std::pair{choice.index, choice.scores};
  }, py::arg("mesh"), py::arg("atlas"), py::arg("candidates"), py::arg("trajectory"), py::arg("threshold") = 0.05,
        "Returns (index of the best (yaw, pitch) candidate, per-candidate scores).");

  m.def("progressive_oracle", [](const TriangleMesh& mesh, const TextureAtlas& reference, int frame_count,
                                 std::pair<int, int> resolution, std::pair<int, int> atlas_resolution,
                                 int max_iterations, double coverage_target) {
    BakePlan plan;
    plan.trajectory.frame_count = frame_count;
    plan.trajectory.resolution = to_resolution(resolution);
    plan.max_iterations = max_iterations;
    plan.coverage_target = coverage_target;
    OracleGenerator oracle(mesh, reference);
    ProgressiveResult result;
    {
      py::gil_scoped_release release;
      result = progressive_texture(mesh, oracle, plan, BakeConfig{to_resolution(atlas_resolution), 8.0});
    }
    py::list history;
    for (const IterationRecord& r : result.report.history) history.append(record_dict(r));
    return py::make_tuple(result.atlas, history);
  }, py::arg("mesh"), py::arg("reference"), py::arg("frame_count") = kDefaultFrameCount,
        py::arg("resolution") = std::pair{256, 256}, py::arg("atlas_resolution") = std::pair{512, 512},
        py::arg("max_iterations") = 4, py::arg("coverage_target") = 0.98,
        "Progressive texturing with the reference renderer as generator. Returns (atlas, history).");

  m.def("psnr", [](const DoubleArray& a, const DoubleArray& b, std::optional<BoolArray> mask) {
    const Grid<Vec3> ga = rgb_from<double>(a, "a");
    const Grid<Vec3> gb = rgb_from<double>(b, "b");
    if (!mask) return psnr(ga, gb);
    const Mask gm = gray_from<std::uint8_t>(*mask, "mask");
    return psnr(ga, gb, &gm);
  }, py::arg("a"), py::arg("b"), py::arg("mask") = py::none());
  m.def("ssim", [](const DoubleArray& a, const DoubleArray& b) {
    return ssim(rgb_from<double>(a, "a"), rgb_from<double>(b, "b"));
  }, py::arg("a"), py::arg("b"));
  m.def("evaluate_bake", [](const TriangleMesh& mesh, const TextureAtlas& baked, const TextureAtlas& reference,
                            const OrbitTrajectory& trajectory) {
    py::gil_scoped_release release;
    const BakeEvaluation e = evaluate_bake(mesh, baked, reference, trajectory);
    py::gil_scoped_acquire acquire;
    py::dict d;
    d["psnr"] = e.frames.psnr;
    d["ssim"] = e.frames.ssim;
    d["mean_psnr"] = e.frames.mean_psnr;
    d["mean_ssim"] = e.frames.mean_ssim;
    d["coverage"] = e.coverage;
    return d;
  }, py::arg("mesh"), py::arg("baked"), py::arg("reference"), py::arg("trajectory"));

  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_readwrite("mesh", &PipelineConfig::mesh)
      .def_readwrite("output", &PipelineConfig::output)
      .def_property("radius", [](const PipelineConfig& c) { return c.trajectory.radius; },
                    [](PipelineConfig& c, double v) { c.trajectory.radius = v; })
      .def_property("height", [](const PipelineConfig& c) { return c.trajectory.height; },
                    [](PipelineConfig& c, double v) { c.trajectory.height = v; })
      .def_property("frame_count", [](const PipelineConfig& c) { return c.trajectory.frame_count; },
                    [](PipelineConfig& c, int v) { c.trajectory.frame_count = v; })
      .def_property("resolution", [](const PipelineConfig& c) { return from_resolution(c.trajectory.resolution); },
                    [](PipelineConfig& c, std::pair<int, int> v) { c.trajectory.resolution = to_resolution(v); })
      .def_property("fov_y", [](const PipelineConfig& c) { return c.trajectory.fov_y; },
                    [](PipelineConfig& c, std::optional<double> v) { c.trajectory.fov_y = v; })
      .def_property("atlas_resolution", [](const PipelineConfig& c) { return from_resolution(c.atlas_resolution); },
                    [](PipelineConfig& c, std::pair<int, int> v) { c.atlas_resolution = to_resolution(v); })
      .def_readwrite("penalty_scale", &PipelineConfig::penalty_scale)
      .def_readwrite("confidence_threshold", &PipelineConfig::confidence_threshold)
      .def_readwrite("coverage_target", &PipelineConfig::coverage_target)
      .def_readwrite("max_iterations", &PipelineConfig::max_iterations)
      .def_readwrite("candidate_yaws", &PipelineConfig::candidate_yaws)
      .def_readwrite("candidate_pitches", &PipelineConfig::candidate_pitches)
      .def_readwrite("prompt", &PipelineConfig::prompt)
      .def_readwrite("seed", &PipelineConfig::seed)
      .def_property("generator", [](const PipelineConfig& c) { return to_string(c.generator.kind); },
                    [](PipelineConfig& c, const std::string& v) { c.generator.kind = generator_kind_from_string(v); })
      .def_property("reference", [](const PipelineConfig& c) { return c.generator.reference; },
                    [](PipelineConfig& c, const std::filesystem::path& v) { c.generator.reference = v; })
      .def_property("exchange_dir", [](const PipelineConfig& c) { return c.generator.exchange_dir; },
                    [](PipelineConfig& c, const std::filesystem::path& v) { c.generator.exchange_dir = v; })
      .def_property("endpoint", [](const PipelineConfig& c) { return c.generator.endpoint; },
                    [](PipelineConfig& c, const std::string& v) { c.generator.endpoint = v; })
      .def_property("timeout", [](const PipelineConfig& c) { return c.generator.timeout_seconds; },
                    [](PipelineConfig& c, double v) { c.generator.timeout_seconds = v; })
      .def("validate", &PipelineConfig::validate);

  m.def("cmd_condition", [](const PipelineConfig& c) {
    py::gil_scoped_release release;
    return cmd_condition(c).frame_count;
  }, py::arg("config"), "Writes geometry conditioning frames; returns the frame count.");
  m.def("cmd_bake", [](const PipelineConfig& c, const std::filesystem::path& frames) {
    py::gil_scoped_release release;
    return cmd_bake(c, frames).coverage;
  }, py::arg("config"), py::arg("frames"), "Bakes a frames directory into config.output; returns coverage.");
  m.def("cmd_run", [](const PipelineConfig& c) {
    ProgressiveResult result;
    {
      py::gil_scoped_release release;
      result = cmd_run(c);
    }
    py::list history;
    for (const IterationRecord& r : result.report.history) history.append(record_dict(r));
    return history;
  }, py::arg("config"), "Progressive texturing into config.output; returns the per-iteration history.");
  m.def("cmd_eval", [](const PipelineConfig& c, const std::filesystem::path& atlas,
                       const std::filesystem::path& reference) {
    py::gil_scoped_release release;
    const BakeEvaluation e = cmd_eval(c, atlas, reference);
    return std::pair{e.frames.mean_psnr, e.frames.mean_ssim};
  }, py::arg("config"), py::arg("atlas"), py::arg("reference"), "Returns (mean PSNR, mean SSIM).");
  m.def("cmd_dataset", [](const PipelineConfig& c, const std::vector<std::string>& assets) {
    std::vector<DatasetEntry> entries;
    {
      py::gil_scoped_release release;
      entries = cmd_dataset(c, assets);
    }
    py::list out;
    for (const DatasetEntry& e : entries) {
      py::dict d;
      d["asset"] = e.asset;
      d["directory"] = e.directory;
      d["ok"] = e.ok;
      d["message"] = e.message;
      out.append(d);
    }
    return out;
  }, py::arg("config"), py::arg("assets"));
  m.def("cmd_plan", [](const PipelineConfig& c, const std::filesystem::path& out,
                       const std::vector<std::string>& rotations) {
    std::vector<Rotation> parsed;
    for (const std::string& r : rotations) parsed.push_back(parse_rotation(r));
    return plan_to_json(cmd_plan(c, out, std::nullopt, parsed));
  }, py::arg("config"), py::arg("out"), py::arg("rotations") = std::vector<std::string>{},
        "Writes a plan file; returns its JSON text.");
}
