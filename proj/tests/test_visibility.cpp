#include "support.hpp"

#include "tapestry/fixtures.hpp"
#include "tapestry/visibility.hpp"

#include <doctest.h>

using namespace tapestry;

namespace {

TriangleMesh single_triangle() {
  TriangleMesh m;
  m.positions = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.faces.push_back(Face{FaceCorner{0}, FaceCorner{1}, FaceCorner{2}});
  return m;
}

} // namespace

TEST_CASE("ray through a triangle reports its face, distance and barycentrics") {
  const VisibilityIndex index(single_triangle());
  CHECK(index.triangle_count() == 1);
  const auto hit = index.nearest_hit({0.25, 0.25, 2.0}, {0, 0, -1});
  REQUIRE(hit);
  CHECK(hit->face == 0);
  CHECK(hit->distance == doctest::Approx(2.0));
  CHECK(hit->u == doctest::Approx(0.25));
  CHECK(hit->v == doctest::Approx(0.25));

  SUBCASE("back side is not culled") {
    const auto back = index.nearest_hit({0.25, 0.25, -1.0}, {0, 0, 1});
    REQUIRE(back);
    CHECK(back->distance == doctest::Approx(1.0));
  }
  SUBCASE("unnormalized direction measures distance in its own units") {
    const auto scaled = index.nearest_hit({0.25, 0.25, 2.0}, {0, 0, -4});
    REQUIRE(scaled);
    CHECK(scaled->distance == doctest::Approx(0.5));
  }
}

TEST_CASE("rays that miss return nothing") {
  const VisibilityIndex index(single_triangle());
  CHECK_FALSE(index.nearest_hit({2.0, 2.0, 1.0}, {0, 0, -1}));
  CHECK_FALSE(index.nearest_hit({0.25, 0.25, 1.0}, {0, 0, 1}));
  CHECK_FALSE(index.nearest_hit({0.25, 0.25, 1.0}, {1, 0, 0}));
  CHECK_FALSE(index.nearest_hit({0.25, 0.25, 2.0}, {0, 0, -1}, 0.0, 1.5));
  CHECK_FALSE(index.nearest_hit({0.25, 0.25, 2.0}, {0, 0, -1}, 2.5));
}

TEST_CASE("nearest hit agrees with a brute-force scan over a sphere") {
  const TriangleMesh sphere = fixtures::uv_sphere(48, 25);
  const VisibilityIndex index(sphere);
  CHECK(index.triangle_count() == sphere.faces.size());
  CHECK(index.depth() < 40);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  int hits = 0;
  for (int i = 0; i < 600; ++i) {
    const Vec3 origin = 2.5 * test::random_unit(rng);
    const Vec3 target(u(rng), u(rng), u(rng));
    const Vec3 dir = i % 5 == 0 ? test::random_unit(rng) : Vec3((target - origin).normalized());
    const test::OracleHit expected = test::brute_force_hit(sphere, origin, dir);
    const auto got = index.nearest_hit(origin, dir);
    REQUIRE(got.has_value() == (expected.face >= 0));
    if (!got) continue;
    ++hits;
    CHECK(got->distance == doctest::Approx(expected.t).epsilon(1e-9));
    // Rays grazing a shared edge may legitimately pick either neighbor at the same distance.
    if (got->face != expected.face) {
      const Vec3 p = origin + got->distance * dir;
      const Vec3 q = origin + expected.t * dir;
      CHECK((p - q).norm() < 1e-9);
    }
  }
  CHECK(hits > 400);
}

TEST_CASE("every sphere face is hit by a ray aimed at its centroid from outside") {
  const TriangleMesh sphere = fixtures::uv_sphere(24, 13);
  const VisibilityIndex index(sphere);
  for (std::size_t f = 0; f < sphere.faces.size(); ++f) {
    const Vec3 c = (sphere.corner_position(f, 0) + sphere.corner_position(f, 1) + sphere.corner_position(f, 2)) / 3.0;
    const Vec3 origin = 3.0 * c.normalized();
    const auto hit = index.nearest_hit(origin, c - origin);
    REQUIRE(hit);
    CHECK(hit->face == static_cast<std::int32_t>(f));
  }
}

TEST_CASE("occlusion query honours the interval and the ignored face") {
  const TriangleMesh two = test::merge(fixtures::quad(0.5, 0.0), fixtures::quad(0.5, 1.0));
  const VisibilityIndex index(two);
  const Vec3 origin(0.1, -2.0, 0.3);
  const Vec3 dir(0, 1, 0);
  CHECK(index.occluded(origin, dir, 0.0, 10.0));
  CHECK_FALSE(index.occluded(origin, dir, 0.0, 1.9));
  CHECK(index.occluded(origin, dir, 2.5, 3.5));

  const auto first = index.nearest_hit(origin, dir);
  REQUIRE(first);
  CHECK(first->face < 2);
  CHECK_FALSE(index.occluded(origin, dir, 0.0, 2.5, first->face));
  CHECK(index.occluded(origin, dir, 0.0, 3.5, first->face));
}

TEST_CASE("rays through a shared edge are not lost between the two faces") {
  const TriangleMesh quad = fixtures::quad(0.5);
  const VisibilityIndex index(quad);
  for (int i = 1; i < 20; ++i) {
    const double s = -0.5 + i / 20.0;
    for (const Vec3& target : {Vec3(s, 0.0, s), Vec3(s, 0.0, -s)}) {
      const Vec3 origin(target.x(), -2.0, target.z());
      const auto hit = index.nearest_hit(origin, Vec3::UnitY());
      REQUIRE(hit.has_value());
      CHECK(hit->distance == doctest::Approx(2.0));
      CHECK(index.occluded(origin, Vec3::UnitY(), 0.0, 3.0));
    }
  }
}
