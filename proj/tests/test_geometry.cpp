#include <doctest.h>

#include <cmath>

#include "sevo/geometry.hpp"
#include "test_util.hpp"

using namespace sevo;

namespace {

Vec6 random_twist(std::mt19937_64& rng, double v_scale, double w_scale) {
  Vec6 xi;
  for (int i = 0; i < 3; ++i) xi[i] = testutil::uniform(rng, -v_scale, v_scale);
  for (int i = 3; i < 6; ++i) xi[i] = testutil::uniform(rng, -w_scale, w_scale);
  return xi;
}

PinholeIntrinsics test_intrinsics() {
  PinholeIntrinsics K;
  K.fx = 500;
  K.fy = 500;
  K.cx = 320;
  K.cy = 240;
  K.width = 640;
  K.height = 480;
  return K;
}

}  // namespace

TEST_CASE("se3_exp zero twist is identity") {
  SE3Pose T = se3_exp(Vec6::Zero());
  CHECK((T.R - Mat3::Identity()).norm() == doctest::Approx(0.0));
  CHECK(T.p.norm() == doctest::Approx(0.0));
}

TEST_CASE("se3_exp pure translation") {
  Vec6 xi;
  xi << 1, 2, 3, 0, 0, 0;
  SE3Pose T = se3_exp(xi);
  CHECK((T.R - Mat3::Identity()).norm() < 1e-15);
  CHECK((T.p - Vec3(1, 2, 3)).norm() < 1e-15);
}

TEST_CASE("se3_exp quarter turn about z rotates x axis onto y axis") {
  Vec6 xi = Vec6::Zero();
  xi[5] = M_PI / 2;
  SE3Pose T = se3_exp(xi);
  Vec3 rotated = T.R * Vec3(1, 0, 0);
  CHECK((rotated - Vec3(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("se3_exp output satisfies rotation invariants") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    SE3Pose T = se3_exp(random_twist(rng, 5.0, 2.5));
    CHECK(T.orthonormality_error() < 1e-9);
    CHECK(T.R.determinant() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("se3 exp/log round trip") {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 200; ++i) {
    Vec6 xi = random_twist(rng, 10.0, 3.0 / std::sqrt(3.0));
    Vec6 back = se3_log(se3_exp(xi));
    CHECK((back - xi).norm() < 1e-9);
  }
  // Tiny-rotation branch.
  Vec6 xi = Vec6::Zero();
  xi << 0.3, -0.2, 0.9, 1e-10, -2e-10, 5e-11;
  CHECK((se3_log(se3_exp(xi)) - xi).norm() < 1e-12);
}

TEST_CASE("se3 composition with inverse twist gives identity") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    Vec6 xi = random_twist(rng, 4.0, 1.5);
    SE3Pose T = se3_exp(xi) * se3_exp(Vec6(-xi));
    CHECK((T.R - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(T.p.norm() < 1e-9);
  }
}

TEST_CASE("project optical axis hits principal point") {
  PinholeIntrinsics K = test_intrinsics();
  Vec2 uv = project(Vec3(0, 0, 5), K);
  CHECK(uv.x() == doctest::Approx(K.cx));
  CHECK(uv.y() == doctest::Approx(K.cy));
}

TEST_CASE("project known point") {
  PinholeIntrinsics K = test_intrinsics();
  Vec2 uv = project(Vec3(1, 0, 2), K);
  CHECK(uv.x() == doctest::Approx(570.0));
  CHECK(uv.y() == doctest::Approx(240.0));
}

TEST_CASE("project rejects points behind the camera") {
  PinholeIntrinsics K = test_intrinsics();
  CHECK_THROWS_WITH_AS(project(Vec3(0, 0, -1), K), doctest::Contains("NonPositiveDepth"),
                       Error);
}

TEST_CASE("backproject known points") {
  PinholeIntrinsics K = test_intrinsics();
  CHECK((backproject(Vec2(K.cx, K.cy), 0.2, K) - Vec3(0, 0, 5)).norm() < 1e-12);
  CHECK((backproject(Vec2(570, 240), 0.5, K) - Vec3(1, 0, 2)).norm() < 1e-12);
  CHECK_THROWS_AS(backproject(Vec2(100, 100), 0.0, K), Error);
}

TEST_CASE("project/backproject round trip") {
  PinholeIntrinsics K = test_intrinsics();
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    Vec2 uv(testutil::uniform(rng, 0, K.width - 1), testutil::uniform(rng, 0, K.height - 1));
    double inv_depth = testutil::uniform(rng, 0.01, 2.0);
    Vec3 pt = backproject(uv, inv_depth, K);
    CHECK((project(pt, K) - uv).norm() < 1e-9);
  }
}

TEST_CASE("triangulate_from_disparity") {
  StereoRig rig;
  rig.intrinsics = test_intrinsics();
  rig.baseline = 0.599;

  SUBCASE("10 m depth example") {
    // Oracle: disparity / (fx * baseline).
    CHECK(triangulate_from_disparity(29.95, rig) == doctest::Approx(0.1).epsilon(1e-12));
  }
  SUBCASE("unit depth when disparity equals fx*baseline") {
    CHECK(triangulate_from_disparity(rig.intrinsics.fx * rig.baseline, rig) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("below threshold") {
    CHECK_THROWS_WITH_AS(triangulate_from_disparity(0.1, rig),
                         doctest::Contains("DisparityTooSmall"), Error);
  }
  SUBCASE("monotone in disparity") {
    std::mt19937_64 rng(5);
    double prev = 0;
    for (double d = 0.5; d < 200; d += testutil::uniform(rng, 0.1, 5.0)) {
      double inv = triangulate_from_disparity(d, rig);
      CHECK(inv > prev);
      prev = inv;
    }
  }
}

TEST_CASE("stereo rig transform is a pure -baseline x translation") {
  StereoRig rig;
  rig.intrinsics = test_intrinsics();
  rig.baseline = 0.25;
  SE3Pose T = rig.T_right_from_left();
  CHECK((T.R - Mat3::Identity()).norm() == 0.0);
  CHECK((T.p - Vec3(-0.25, 0, 0)).norm() == 0.0);
}
