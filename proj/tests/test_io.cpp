#include "support.hpp"

#include "tapestry/error.hpp"
#include "tapestry/fixtures.hpp"
#include "tapestry/frames_io.hpp"
#include "tapestry/image_io.hpp"
#include "tapestry/render.hpp"
#include "tapestry/util.hpp"

#include <doctest.h>

#include <cstring>

using namespace tapestry;
namespace fs = std::filesystem;

TEST_CASE("PNG round trips at 8 and 16 bits") {
  const Resolution res{5, 3};
  std::vector<std::uint16_t> gray16(15);
  std::vector<std::uint16_t> rgb8(45);
  for (std::size_t i = 0; i < gray16.size(); ++i) gray16[i] = static_cast<std::uint16_t>(i * 4369);
  for (std::size_t i = 0; i < rgb8.size(); ++i) rgb8[i] = static_cast<std::uint16_t>((i * 37) % 256);

  const std::string a = encode_png(res, 1, 16, gray16);
  const PngImage da = decode_png(a);
  CHECK(da.resolution == res);
  CHECK(da.channels == 1);
  CHECK(da.bit_depth == 16);
  CHECK(da.samples == gray16);
  CHECK(encode_png(res, 1, 16, gray16) == a);

  const PngImage db = decode_png(encode_png(res, 3, 8, rgb8));
  CHECK(db.bit_depth == 8);
  CHECK(db.samples == rgb8);
  CHECK(db.normalized(0, 1) == doctest::Approx(37.0 / 255.0));

  CHECK_THROWS_AS(decode_png("definitely not a png"), Error);
  CHECK_THROWS_AS(encode_png(res, 3, 8, gray16), Error);
  CHECK_THROWS_AS(read_png("/nonexistent/file.png"), Error);
}

TEST_CASE("quantization rounds to the nearest level and clamps") {
  CHECK(quantize(0.0, 0.0, 1.0, 8) == 0);
  CHECK(quantize(1.0, 0.0, 1.0, 8) == 255);
  CHECK(quantize(0.5, 0.0, 1.0, 8) == 128);
  CHECK(quantize(-3.0, 0.0, 1.0, 16) == 0);
  CHECK(quantize(7.0, 0.0, 1.0, 16) == 65535);
  CHECK(quantize(0.0, -1.0, 1.0, 16) == 32768);
}

TEST_CASE("frame rasters are written in the documented layout") {
  const TriangleMesh sphere = fixtures::uv_sphere(16, 9);
  const TextureAtlas atlas = fixtures::checker_atlas({32, 32}, 4);
  const OrbitTrajectory traj = orbit_trajectory(2.0, 1.0, 3, {24, 16}, 0.9);
  const auto frames = render_turntable(sphere, &atlas, traj, 0.05);
  test::TempDir dir;
  const auto kinds = write_frames(dir.path(), frames, traj.poses[0].near, traj.poses[0].far);
  CHECK(kinds.size() == 6);
  for (FrameKind k : kinds) CHECK(count_frames(dir.path(), k) == 3);
  CHECK(fs::exists(dir / "frames/depth/0002.png"));
  CHECK(frame_path(dir.path(), FrameKind::Inpaint, 12) == dir / "frames/inpaint/0012.png");

  const auto masks = read_mask_frames(dir.path());
  REQUIRE(masks.size() == 3);
  for (std::size_t t = 0; t < 3; ++t) CHECK(masks[t] == frames[t].mask);

  const PngImage depth = read_png(frame_path(dir.path(), FrameKind::Depth, 0));
  CHECK(depth.bit_depth == 16);
  const PngImage normal = read_png(frame_path(dir.path(), FrameKind::Normal, 0));
  CHECK(normal.channels == 3);
  for (std::size_t i = 0; i < frames[0].mask.size(); ++i) {
    if (frames[0].mask[i]) {
      const double d = traj.poses[0].near + depth.normalized(i, 0) * (traj.poses[0].far - traj.poses[0].near);
      CHECK(std::abs(d - frames[0].depth[i]) <= (traj.poses[0].far - traj.poses[0].near) / 65535.0);
      const Vec3 n(normal.normalized(i, 0) * 2 - 1, normal.normalized(i, 1) * 2 - 1, normal.normalized(i, 2) * 2 - 1);
      CHECK((n - frames[0].normal[i].cast<double>()).norm() < 1e-4);
    } else {
      CHECK(depth.samples[i] == 65535);
    }
  }

  const auto colors = read_color_frames(dir.path());
  REQUIRE(colors.size() == 3);
  for (std::size_t i = 0; i < colors[1].size(); ++i) {
    CHECK((colors[1][i] - (*frames[1].color)[i]).cwiseAbs().maxCoeff() <= 0.5f / 255.0f + 1e-6f);
  }

  CHECK(to_string(FrameKind::Position) == "position");
  CHECK(frame_kind_from_string("inpaint") == FrameKind::Inpaint);
  CHECK_THROWS_AS(frame_kind_from_string("albedo"), Error);
  GBuffer bare = frames[0];
  bare.color.reset();
  CHECK_THROWS_AS(encode_frame(bare, FrameKind::Color, 0, 1), Error);
}

TEST_CASE("confidence grid file") {
  Grid<double> conf({3, 2}, 0.0);
  conf(0, 0) = 0.25;
  conf(2, 1) = 17.5;
  conf(1, 1) = 1.0 / 3.0;
  const std::string bytes = encode_confidence(conf);
  CHECK(bytes.size() == 8 + 4 + 4 + 6 * 4);
  CHECK(std::memcmp(bytes.data(), kConfidenceMagic, 8) == 0);
  const Grid<double> back = decode_confidence(bytes);
  CHECK(back.resolution() == conf.resolution());
  CHECK(back(0, 0) == 0.25);
  CHECK(back(2, 1) == 17.5);
  CHECK(back(1, 1) == static_cast<double>(1.0f / 3.0f));

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_confidence(bad), Error);
  CHECK_THROWS_AS(decode_confidence(bytes.substr(0, bytes.size() - 1)), Error);
}

TEST_CASE("atlas directory round trip") {
  std::mt19937_64 rng(9);
  const TextureAtlas atlas = test::random_atlas(rng, {16, 8});
  test::TempDir dir;
  const AtlasFiles files = write_atlas(atlas, dir / "atlas", true);
  CHECK(fs::exists(files.color_png));
  CHECK(fs::exists(files.color16_png));
  CHECK(fs::exists(files.confidence_bin));
  CHECK(fs::exists(files.confidence_preview_png));
  CHECK(files.confidence_max > 0.0);

  const TextureAtlas back = read_atlas(dir / "atlas");
  for (std::size_t i = 0; i < atlas.color.size(); ++i) {
    CHECK((back.color[i] - atlas.color[i]).cwiseAbs().maxCoeff() <= 0.5 / 65535.0 + 1e-12);
    CHECK(back.confidence[i] == static_cast<double>(static_cast<float>(atlas.confidence[i])));
  }

  const TextureAtlas texture = read_atlas_or_texture(files.color_png);
  for (std::size_t i = 0; i < texture.confidence.size(); ++i) CHECK(texture.confidence[i] == 1.0);
  CHECK_THROWS_AS(read_atlas(dir / "missing"), Error);
}

TEST_CASE("staged directories appear only on commit") {
  test::TempDir dir;
  const fs::path target = dir / "out";
  {
    StagedDirectory staged(target);
    write_text_file(staged.path() / "a.txt", "first");
    CHECK_FALSE(fs::exists(target));
  }
  CHECK_FALSE(fs::exists(target));
  CHECK(fs::is_empty(dir.path()));

  {
    StagedDirectory staged(target);
    write_text_file(staged.path() / "a.txt", "second");
    staged.commit();
  }
  CHECK(read_text_file(target / "a.txt") == "second");

  {
    StagedDirectory staged(target);
    write_text_file(staged.path() / "b.txt", "third");
    staged.commit();
  }
  CHECK_FALSE(fs::exists(target / "a.txt"));
  CHECK(read_text_file(target / "b.txt") == "third");
}

TEST_CASE("parallel_for visits every index once") {
  for (const char* threads : {"1", "2", "5"}) {
    ::setenv("TAPESTRY_THREADS", threads, 1);
    std::vector<int> hits(1003, 0);
    parallel_for(hits.size(), [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) ++hits[i];
    });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  }
  ::unsetenv("TAPESTRY_THREADS");
  parallel_for(0, [](std::size_t, std::size_t) { FAIL("called for an empty range"); });
}
