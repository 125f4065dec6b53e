#include "support.hpp"

#include "tapestry/error.hpp"
#include "tapestry/fixtures.hpp"
#include "tapestry/metrics.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

using namespace tapestry;

namespace {

ImageRgb uniform(Resolution res, float v) { return ImageRgb(res, Vec3f(v, v, v)); }

ImageRgb random_image(std::mt19937_64& rng, Resolution res) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  ImageRgb img(res);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = Vec3f(u(rng), u(rng), u(rng));
  return img;
}

std::vector<double> luma(const ImageRgb& img) {
  std::vector<double> out(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = 0.299 * img[i].x() + 0.587 * img[i].y() + 0.114 * img[i].z();
  return out;
}

} // namespace

TEST_CASE("PSNR reference values") {
  const Resolution res{16, 16};
  const Grid<Vec3> zero(res, Vec3::Zero());
  const Grid<Vec3> tenth(res, Vec3::Constant(0.1));
  const Grid<Vec3> half(res, Vec3::Constant(0.5));
  CHECK(psnr(zero, zero) == kPsnrCap);
  CHECK(psnr(zero, tenth) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(psnr(zero, half) == doctest::Approx(10.0 * std::log10(4.0)).epsilon(1e-12));
  CHECK(psnr(zero, half) == doctest::Approx(6.0206).epsilon(1e-5));
  CHECK(psnr(tenth, zero) == psnr(zero, tenth));

  SUBCASE("mask restricts the pixels") {
    Grid<Vec3> mixed = zero;
    Mask mask(res, 0);
    for (int x = 0; x < 16; ++x) {
      mixed(x, 0) = Vec3::Constant(0.1);
      mask(x, 0) = 1;
      mixed(x, 5) = Vec3::Ones();
    }
    CHECK(psnr(zero, mixed, &mask) == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(psnr(zero, mixed) < 20.0);
    const Mask empty(res, 0);
    CHECK_THROWS_AS(psnr(zero, mixed, &empty), Error);
  }
  SUBCASE("decreasing in the error") {
    double previous = kPsnrCap;
    for (double d : {0.01, 0.05, 0.2, 0.7, 1.0}) {
      const double p = psnr(zero, Grid<Vec3>(res, Vec3::Constant(d)));
      CHECK(p < previous);
      previous = p;
    }
  }
  CHECK_THROWS_AS(psnr(zero, Grid<Vec3>({8, 16}, Vec3::Zero())), Error);
}

TEST_CASE("SSIM agrees with the windowed formula evaluated directly") {
  std::mt19937_64 rng(5);
  const Resolution res{27, 19};
  const ImageRgb a = random_image(rng, res);
  ImageRgb b = a;
  std::normal_distribution<float> noise(0.0f, 0.1f);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] += Vec3f(noise(rng), noise(rng), noise(rng));
  const double expected = test::ssim_direct(luma(a), luma(b), res.width, res.height);
  CHECK(ssim(a, b) == doctest::Approx(expected).epsilon(1e-9));
  CHECK(ssim(b, a) == doctest::Approx(ssim(a, b)).epsilon(1e-12));
  CHECK(ssim(a, a) == 1.0);
  CHECK(ssim(a, b) < 1.0);
  CHECK_THROWS_AS(ssim(ImageRgb({10, 30}), ImageRgb({10, 30})), Error);
  CHECK_THROWS_AS(ssim(a, ImageRgb({19, 27})), Error);
}

TEST_CASE("SSIM of a checkerboard and its negative is not positive") {
  ImageRgb x({32, 32});
  ImageRgb neg({32, 32});
  for (int y = 0; y < 32; ++y) {
    for (int i = 0; i < 32; ++i) {
      const float v = ((i / 2 + y / 2) % 2) ? 0.75f : 0.25f;
      x(i, y) = Vec3f::Constant(v);
      neg(i, y) = Vec3f::Constant(1.0f - v);
    }
  }
  const double value = ssim(x, neg);
  CHECK(value <= 0.0);
  CHECK(value == doctest::Approx(test::ssim_direct(luma(x), luma(neg), 32, 32)).epsilon(1e-9));
}

TEST_CASE("SSIM of constant images follows the closed form") {
  const double c1 = 0.01 * 0.01;
  for (auto [a, b] : {std::pair{0.2, 0.7}, std::pair{0.0, 1.0}, std::pair{0.5, 0.5}, std::pair{0.9, 0.1}}) {
    const double closed = (2 * a * b + c1) / (a * a + b * b + c1);
    CHECK(ssim_of_constants(a, b) == doctest::Approx(closed).epsilon(1e-12));
    const Grid<Vec3> ia({16, 16}, Vec3::Constant(a));
    const Grid<Vec3> ib({16, 16}, Vec3::Constant(b));
    CHECK(std::abs(ssim(ia, ib) - closed) <= 1e-9);
  }
}

TEST_CASE("evaluate_bake against the reference atlas") {
  const TriangleMesh sphere = fixtures::uv_sphere(32, 17);
  const TextureAtlas reference = fixtures::checker_atlas({64, 64}, 16);
  const OrbitTrajectory traj = orbit_trajectory(2.0, 1.0, 4, {48, 48}, compute_fov(std::sqrt(5.0), 1.0, 1.1));

  const BakeEvaluation self = evaluate_bake(sphere, reference, reference, traj);
  CHECK(self.frames.frame_count == 4);
  CHECK(self.frames.mean_psnr == kPsnrCap);
  CHECK(self.frames.mean_ssim == 1.0);
  CHECK(self.coverage == 1.0);

  TextureAtlas shifted = reference;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) shifted.color(x, y) = reference.color((x + 1) % 64, y);
  const BakeEvaluation moved = evaluate_bake(sphere, shifted, reference, traj);
  CHECK(moved.frames.mean_psnr < self.frames.mean_psnr);
  CHECK(moved.frames.mean_psnr < 40.0);

  const auto json = nlohmann::json::parse(evaluation_json(moved));
  CHECK(json["frames"].size() == 4);
  CHECK(json["summary"]["lpips"].is_null());
  CHECK(json["summary"]["fvd"].is_null());
  CHECK(json["summary"]["mean_psnr"].get<double>() == doctest::Approx(moved.frames.mean_psnr));
  const std::string text = evaluation_text(moved);
  CHECK(std::count(text.begin(), text.end(), '\n') >= 5);

  std::vector<ImageRgb> frames;
  for (const GBuffer& g : render_turntable(sphere, &reference, traj, 0.0)) frames.push_back(*g.color);
  const BakeEvaluation against_frames = evaluate_bake(sphere, shifted, frames, traj);
  CHECK(against_frames.frames.psnr == moved.frames.psnr);
  frames.pop_back();
  CHECK_THROWS_AS(evaluate_bake(sphere, shifted, frames, traj), Error);
}
