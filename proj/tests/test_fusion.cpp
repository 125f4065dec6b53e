#include "support.hpp"

#include "tapestry/error.hpp"
#include "tapestry/fixtures.hpp"
#include "tapestry/fusion.hpp"

#include <doctest.h>

using namespace tapestry;

namespace {

TextureAtlas single_texel(const Vec3& color, double confidence) {
  TextureAtlas a({1, 1});
  a.color[0] = color;
  a.confidence[0] = confidence;
  return a;
}

class FailingGenerator final : public AppearanceGenerator {
 public:
  GenerationResponse generate(const GenerationRequest&) override {
    fail(ErrorCode::Timeout, "no response within 0 s");
  }
  std::string provider_id() const override { return "failing"; }
};

class CountingGenerator final : public AppearanceGenerator {
 public:
  CountingGenerator(TriangleMesh mesh, TextureAtlas atlas) : inner_(std::move(mesh), std::move(atlas)) {}
  GenerationResponse generate(const GenerationRequest& request) override {
    requests.push_back(request.base_rotation);
    return inner_.generate(request);
  }
  std::string provider_id() const override { return "counting"; }
  std::vector<Rotation> requests;

 private:
  OracleGenerator inner_;
};

BakePlan small_plan(int frames = 16, int resolution = 64) {
  BakePlan plan;
  plan.trajectory.frame_count = frames;
  plan.trajectory.resolution = {resolution, resolution};
  return plan;
}

} // namespace

TEST_CASE("coverage counts occupied texels at or above the threshold") {
  TextureAtlas atlas({4, 1});
  atlas.confidence[0] = 0.05;
  atlas.confidence[1] = 0.049;
  atlas.confidence[2] = 3.0;
  atlas.confidence[3] = 0.0;
  Mask occ({4, 1}, 1);
  CHECK(coverage(atlas, occ, 0.05) == 0.5);
  occ[3] = 0;
  CHECK(coverage(atlas, occ, 0.05) == doctest::Approx(2.0 / 3.0));
  CHECK(coverage(atlas, occ, 0.01) == 1.0);
  CHECK_THROWS_AS(coverage(atlas, Mask({4, 1}, 0), 0.05), Error);
  CHECK_THROWS_AS(coverage(atlas, Mask({2, 2}, 1), 0.05), Error);
}

TEST_CASE("fuse: confidence-weighted color, additive or max confidence") {
  const TextureAtlas a = single_texel(Vec3(0.2, 0.2, 0.2), 1.0);
  const TextureAtlas b = single_texel(Vec3(0.6, 0.6, 0.6), 3.0);
  const TextureAtlas f = fuse(a, b);
  CHECK((f.color[0] - Vec3(0.5, 0.5, 0.5)).norm() < 1e-12);
  CHECK(f.confidence[0] == 4.0);
  const TextureAtlas m = fuse(a, b, ConfidenceUpdate::Max);
  CHECK((m.color[0] - Vec3(0.5, 0.5, 0.5)).norm() < 1e-12);
  CHECK(m.confidence[0] == 3.0);

  const TextureAtlas none = fuse(TextureAtlas({1, 1}), TextureAtlas({1, 1}));
  CHECK(none.color[0] == Vec3::Zero());
  CHECK(none.confidence[0] == 0.0);
  CHECK_THROWS_AS(fuse(TextureAtlas({2, 2}), TextureAtlas({2, 1})), Error);
}

TEST_CASE("fuse algebra on random atlases") {
  std::mt19937_64 rng(11);
  const Resolution res{32, 32};
  const TextureAtlas x = test::random_atlas(rng, res);
  const TextureAtlas y = test::random_atlas(rng, res);
  const TextureAtlas z = test::random_atlas(rng, res);
  const TextureAtlas zero(res);

  const TextureAtlas xy = fuse(x, y);
  const TextureAtlas yx = fuse(y, x);
  const TextureAtlas left = fuse(fuse(x, y), z);
  const TextureAtlas right = fuse(x, fuse(y, z));
  const TextureAtlas xx = fuse(x, x);
  const TextureAtlas x0 = fuse(x, zero);
  const TextureAtlas zx = fuse(zero, x);
  for (std::size_t i = 0; i < x.color.size(); ++i) {
    CHECK((xy.color[i] - yx.color[i]).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(std::abs(xy.confidence[i] - yx.confidence[i]) <= 1e-6);
    CHECK((left.color[i] - right.color[i]).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(std::abs(left.confidence[i] - right.confidence[i]) <= 1e-6);
    CHECK(x0.color[i] == x.color[i]);
    CHECK(x0.confidence[i] == x.confidence[i]);
    CHECK(zx.color[i] == x.color[i]);
    CHECK(xx.color[i] == x.color[i]);
    CHECK(xx.confidence[i] == 2.0 * x.confidence[i]);
  }
}

TEST_CASE("score_rotation agrees with exhaustive scoring") {
  const TriangleMesh sphere = fixtures::uv_sphere(16, 9);
  const Resolution res{32, 32};
  const UvLayout layout = rasterize_uv_layout(sphere, res);
  TrajectoryParams params;
  params.frame_count = 4;
  params.resolution = {48, 48};
  const OrbitTrajectory traj = params.build();

  SUBCASE("fully confident atlas scores zero") {
    TextureAtlas full(res);
    for (std::size_t i = 0; i < full.confidence.size(); ++i) full.confidence[i] = 1.0;
    CHECK(score_rotation(sphere, full, Rotation::identity(), traj, 0.05, &layout) == 0);
  }
  SUBCASE("empty and half-confident atlases") {
    TextureAtlas half(res);
    for (int y = 0; y < res.height; ++y)
      for (int x = 0; x < res.width / 2; ++x) half.confidence[half.confidence.index(x, y)] = 1.0;
    for (double yaw : {0.0, 90.0, 225.0}) {
      for (double pitch : {0.0, -45.0}) {
        const std::size_t got = score_rotation(sphere, half, Rotation::from_yaw_pitch(yaw, pitch), traj, 0.05, &layout);
        CHECK(got == test::brute_force_score(sphere, layout, half, yaw, pitch, traj, 0.05));
      }
    }
    const TextureAtlas empty(res);
    const std::size_t all = score_rotation(sphere, empty, Rotation::identity(), traj, 0.05);
    CHECK(all == test::brute_force_score(sphere, layout, empty, 0.0, 0.0, traj, 0.05));
    CHECK(all > 0);
    CHECK(all < layout.texels.size());
  }
}

TEST_CASE("select_base_rotation: argmax with ties to the lowest index") {
  const TriangleMesh sphere = fixtures::uv_sphere(16, 9);
  const Resolution res{32, 32};
  TrajectoryParams params;
  params.frame_count = 4;
  params.resolution = {48, 48};
  OrbitTrajectory single_view = params.build();
  single_view.poses.resize(1);

  TextureAtlas full(res);
  for (std::size_t i = 0; i < full.confidence.size(); ++i) full.confidence[i] = 1.0;
  const auto candidates = rotation_grid({0, 90, 180, 270}, {0});
  const RotationChoice tie = select_base_rotation(sphere, full, candidates, single_view, 0.05);
  CHECK(tie.index == 0);
  CHECK(tie.scores == std::vector<std::size_t>(4, 0));

  const RotationChoice one = select_base_rotation(sphere, TextureAtlas(res), {candidates[2]}, single_view, 0.05);
  CHECK(one.index == 0);
  CHECK(one.rotation.yaw_degrees == 180.0);

  // Confident where x > 0: the single camera at +x sees the other side after a half turn.
  const TextureAtlas east = fixtures::paint_atlas(sphere, res, [](const Vec3& p, const Vec3&) {
    return fixtures::SurfaceTexel{Vec3::Ones(), p.x() > 0.0 ? 1.0 : 0.0};
  });
  const RotationChoice best = select_base_rotation(sphere, east, candidates, single_view, 0.05);
  CHECK(best.index == 2);
  CHECK_THROWS_AS(select_base_rotation(sphere, east, {}, single_view, 0.05), Error);
}

TEST_CASE("progressive texturing on the mug exposes more surface each pass") {
  const TriangleMesh mug = fixtures::mug(32);
  const TextureAtlas reference = fixtures::checker_atlas({64, 64}, 8);
  CountingGenerator gen(mug, reference);
  BakePlan plan = small_plan();
  plan.max_iterations = 2;
  std::vector<TextureAtlas> masters;
  const ProgressiveResult out = progressive_texture(mug, gen, plan, BakeConfig{{64, 64}, 8.0}, "mug",
                                                    [&](const IterationArtifacts& a) {
                                                      masters.push_back(a.master);
                                                      CHECK(a.request.prompt == "mug");
                                                      CHECK(a.response.frames.size() == 16);
                                                    });
  REQUIRE(out.report.history.size() == 2);
  REQUIRE(masters.size() == 2);
  CHECK(gen.requests.size() == 2);
  CHECK(gen.requests[0].is_identity());
  CHECK(out.report.history[1].coverage > out.report.history[0].coverage);
  CHECK(out.report.covered_fraction == out.report.history[1].coverage);
  CHECK(out.report.history[1].candidate_scores.size() == 24);
  CHECK(out.report.history[1].provider == "oracle");
  for (std::size_t i = 0; i < masters[0].confidence.size(); ++i) {
    CHECK(masters[1].confidence[i] >= masters[0].confidence[i]);
  }
  CHECK(out.atlas.confidence == masters[1].confidence);
}

TEST_CASE("progressive texturing stops at max_iterations or the coverage target") {
  const TriangleMesh sphere = fixtures::uv_sphere(16, 9);
  const TextureAtlas reference = fixtures::checker_atlas({32, 32}, 4);
  BakeConfig bake{{32, 32}, 8.0};

  SUBCASE("one iteration means one generator call") {
    CountingGenerator gen(sphere, reference);
    BakePlan plan = small_plan(8, 48);
    plan.max_iterations = 1;
    const auto out = progressive_texture(sphere, gen, plan, bake);
    CHECK(gen.requests.size() == 1);
    CHECK(out.report.history.size() == 1);
    CHECK_FALSE(out.report.history[0].candidate_index.has_value());
  }
  SUBCASE("a reachable target ends the loop") {
    CountingGenerator gen(sphere, reference);
    BakePlan plan = small_plan(8, 48);
    plan.coverage_target = 0.1;
    const auto out = progressive_texture(sphere, gen, plan, bake);
    CHECK(gen.requests.size() == 1);
    CHECK(out.report.covered_fraction >= 0.1);
  }
  SUBCASE("a fixed rotation list is followed in order") {
    CountingGenerator gen(sphere, reference);
    BakePlan plan = small_plan(8, 48);
    plan.iterations = {{Rotation::identity(), {}}, {Rotation::from_yaw_pitch(90, 45), {}}};
    plan.max_iterations = 4;
    const auto out = progressive_texture(sphere, gen, plan, bake);
    REQUIRE(gen.requests.size() == 2);
    CHECK(gen.requests[1].yaw_degrees == 90.0);
    CHECK(gen.requests[1].pitch_degrees == 45.0);
    CHECK(out.report.history.size() == 2);
  }
}

TEST_CASE("generator failures name the iteration") {
  FailingGenerator gen;
  try {
    progressive_texture(fixtures::uv_sphere(8, 5), gen, small_plan(4, 32), BakeConfig{{16, 16}, 8.0});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Timeout);
    CHECK(std::string(e.what()).find("iteration 1") != std::string::npos);
  }
}

TEST_CASE("plan JSON round trip") {
  BakePlan plan;
  plan.coverage_target = 0.9;
  plan.max_iterations = 3;
  plan.update = ConfidenceUpdate::Max;
  plan.trajectory.fov_y = 0.7;
  plan.trajectory.frame_count = 21;
  TrajectoryParams close = plan.trajectory;
  close.radius = 1.5;
  plan.iterations = {{Rotation::identity(), {}}, {Rotation::from_yaw_pitch(135, -45), close}};
  plan.candidates = rotation_grid({0, 180}, {0});

  const std::string text = plan_to_json(plan);
  const BakePlan back = plan_from_json(text);
  CHECK(plan_to_json(back) == text);
  CHECK(back.update == ConfidenceUpdate::Max);
  REQUIRE(back.iterations.size() == 2);
  REQUIRE(back.iterations[1].trajectory);
  CHECK(back.iterations[1].trajectory->radius == 1.5);
  CHECK(back.iterations[1].rotation.matrix().isApprox(test::yaw_pitch_matrix(135, -45), 1e-12));
  CHECK(back.candidates.size() == 2);

  CHECK_THROWS_AS(plan_from_json("{"), Error);
  CHECK_THROWS_AS(plan_from_json(R"({"max_iterations": 0})"), Error);
  CHECK_THROWS_AS(plan_from_json(R"({"confidence_update": "median"})"), Error);
}
