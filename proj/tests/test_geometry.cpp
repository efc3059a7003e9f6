#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "evekf/geometry.hpp"
#include "evekf/scene_map.hpp"
#include "support/oracles.hpp"

using namespace evekf;

namespace {
constexpr double kPi = 3.14159265358979323846;

PlanarScene constant_scene(double plane_z, int texels = 64, double texel_size = 0.05,
                           double log_value = 1.0) {
  Eigen::MatrixXd grid = Eigen::MatrixXd::Constant(texels, texels, log_value);
  auto map = std::make_shared<DenseMap>(
      std::move(grid), texel_size,
      Vec2(-0.5 * (texels - 1) * texel_size, -0.5 * (texels - 1) * texel_size));
  return make_scene(Pose{Vec3(0, 0, plane_z), Vec3::Zero()}, map);
}
}  // namespace

TEST_CASE("hat and vee") {
  CHECK((hat(Vec3(1, 0, 0)) * Vec3(0, 1, 0) - Vec3(0, 0, 1)).norm() == 0);
  CHECK((vee(hat(Vec3(2, -3, 5))) - Vec3(2, -3, 5)).norm() == 0);

  std::mt19937_64 gen(7);
  for (int i = 0; i < 50; ++i) {
    const Vec3 a = test::random_rotvec(gen, 0, 10);
    const Vec3 b = test::random_rotvec(gen, 0, 10);
    CHECK((hat(a) * b - a.cross(b)).norm() < 1e-12);
    CHECK((hat(a) * a).norm() < 1e-12);
  }

  Mat3 not_skew = hat(Vec3(1, 2, 3));
  not_skew(0, 1) += 1e-6;
  CHECK_THROWS_AS(vee(not_skew), NotSkew);
}

TEST_CASE("exp_so3 basics") {
  CHECK((exp_so3(Vec3::Zero()) - Mat3::Identity()).norm() == 0);

  // quarter turn about z maps x onto y
  const Mat3 r = exp_so3(Vec3(0, 0, kPi / 2));
  CHECK((r * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("exp_so3 orthonormality and determinant") {
  std::mt19937_64 gen(11);
  for (int i = 0; i < 2000; ++i) {
    const Vec3 r = test::random_rotvec(gen, 0, kPi);
    const Mat3 m = exp_so3(r);
    CHECK((m.transpose() * m - Mat3::Identity()).norm() < 1e-12);
    CHECK(std::abs(m.determinant() - 1.0) <= 1e-12);
  }
}

TEST_CASE("exp_so3 first-order expansion") {
  std::mt19937_64 gen(13);
  const double eps = 1e-4;
  for (int i = 0; i < 20; ++i) {
    const Vec3 a = test::random_unit(gen);
    const Mat3 err = exp_so3(eps * a) - (Mat3::Identity() + eps * hat(a));
    CHECK(err.cwiseAbs().maxCoeff() < 2 * eps * eps);
  }
}

TEST_CASE("exp_so3 matches the quaternion oracle") {
  std::mt19937_64 gen(17);
  for (int i = 0; i < 500; ++i) {
    const Vec3 r = test::random_rotvec(gen, 0, kPi);
    CHECK((exp_so3(r) - test::rotation_oracle(r)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("log_so3 basics and roundtrip") {
  CHECK(log_so3(Mat3::Identity()).norm() == 0);

  const Vec3 r0(0.1, -0.2, 0.3);
  CHECK((log_so3(exp_so3(r0)) - r0).norm() < 1e-10);

  std::mt19937_64 gen(19);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 r = test::random_rotvec(gen, 1e-8, kPi - 1e-3);
    CHECK((log_so3(exp_so3(r)) - r).norm() < 1e-9);
  }
}

TEST_CASE("log_so3 near pi uses the symmetric part") {
  std::mt19937_64 gen(23);
  for (int i = 0; i < 50; ++i) {
    // trace = -1 + (pi - angle)^2 + O(..), so this sits at trace ~ -1 + 2.5e-9
    const double angle = kPi - 5e-5;
    const Vec3 axis = test::random_unit(gen);
    const Mat3 r = test::rotation_oracle(axis * angle);
    bool near_pi = false;
    const Vec3 est = log_so3(r, &near_pi);
    CHECK(near_pi);
    CHECK(std::abs(est.norm() - kPi) < 1e-4);
    CHECK((est - axis * angle).norm() < 1e-4);
  }

  bool near_pi = true;
  (void)log_so3(exp_so3(Vec3(0.1, 0.2, -0.1)), &near_pi);
  CHECK_FALSE(near_pi);
}

TEST_CASE("log_so3 rejects non-rotations") {
  Mat3 bad = exp_so3(Vec3(0.3, 0.1, -0.2));
  bad(0, 0) += 1e-3;
  CHECK_THROWS_AS(log_so3(bad), NotARotation);

  Mat3 reflection = Mat3::Identity();
  reflection(2, 2) = -1;
  CHECK_THROWS_AS(log_so3(reflection), NotARotation);
}

TEST_CASE("canonicalize_rotation wraps long vectors") {
  const Vec3 axis = Vec3(1, 2, -1).normalized();
  const Vec3 r = axis * (kPi + 0.5);
  const Vec3 c = canonicalize_rotation(r);
  CHECK(c.norm() <= kPi + 1e-12);
  CHECK(std::abs(c.norm() - (kPi - 0.5)) < 1e-12);
  CHECK((exp_so3(c) - exp_so3(r)).cwiseAbs().maxCoeff() < 1e-12);

  CHECK((canonicalize_rotation(Vec3(0.1, 0, 0)) - Vec3(0.1, 0, 0)).norm() == 0);
}

TEST_CASE("pose composition and inverse") {
  std::mt19937_64 gen(29);
  for (int i = 0; i < 100; ++i) {
    Pose p;
    p.t = Vec3(test::uniform(gen, -2, 2), test::uniform(gen, -2, 2),
               test::uniform(gen, -2, 2));
    p.r = test::random_rotvec(gen, 0, 2.5);

    const Pose id = compose(p, inverse(p));
    CHECK(id.t.norm() < 1e-12);
    CHECK(id.r.norm() < 1e-12);

    const Vec3 x(test::uniform(gen, -3, 3), test::uniform(gen, -3, 3),
                 test::uniform(gen, -3, 3));
    CHECK((p.to_world(p.to_camera(x)) - x).norm() < 1e-12);
  }
}

TEST_CASE("project") {
  CHECK((project(Vec3(0, 0, 1)) - Vec2(0, 0)).norm() == 0);
  CHECK((project(Vec3(0.5, -0.25, 2)) - Vec2(0.25, -0.125)).norm() == 0);

  std::mt19937_64 gen(31);
  for (int i = 0; i < 100; ++i) {
    const Vec3 x(test::uniform(gen, -1, 1), test::uniform(gen, -1, 1),
                 test::uniform(gen, 0.1, 5));
    const double lambda = test::uniform(gen, 0.1, 10);
    CHECK((project(x) - project(lambda * x)).norm() < 1e-12);
  }

  CHECK_THROWS_AS(project(Vec3(0, 0, 0)), BehindCamera);
  CHECK_THROWS_AS(project(Vec3(1, 1, -2)), BehindCamera);
}

TEST_CASE("pixel mapping") {
  const CameraIntrinsics k(65, 65, 64, 64, 129, 129);
  CHECK((pixel_from_normalized(Vec2(0, 0), k) - Vec2(64, 64)).norm() == 0);
  CHECK((pixel_from_normalized(Vec2(0.1, 0), k) - Vec2(70.5, 64)).norm() < 1e-12);

  std::mt19937_64 gen(37);
  for (int i = 0; i < 200; ++i) {
    const Vec2 uv(test::uniform(gen, -1, 1), test::uniform(gen, -1, 1));
    CHECK((normalized_from_pixel(pixel_from_normalized(uv, k), k) - uv).norm() <
          1e-12);
  }

  CHECK_THROWS_AS(CameraIntrinsics(0, 65, 64, 64, 128, 128), Error);
  CHECK_THROWS_AS(CameraIntrinsics(65, 65, 130, 64, 128, 128), Error);
}

TEST_CASE("cast_ray fronto-parallel") {
  const double d = 0.4;
  const PlanarScene scene = constant_scene(d);
  const CameraIntrinsics k = CameraIntrinsics::default_dvs128();

  const RayHit hit = cast_ray(Vec2(k.cx, k.cy), Pose::identity(), k, scene);
  CHECK(hit.depth == doctest::Approx(d).epsilon(1e-12));
  CHECK(hit.point_world.head<2>().norm() < 1e-12);
  CHECK(hit.point_world.z() == doctest::Approx(d).epsilon(1e-12));
}

TEST_CASE("cast_ray reprojection consistency") {
  const PlanarScene scene = constant_scene(0.4);
  const CameraIntrinsics k = CameraIntrinsics::default_dvs128();
  std::mt19937_64 gen(41);
  int valid = 0;
  for (int i = 0; i < 1000; ++i) {
    Pose pose;
    pose.t = Vec3(test::uniform(gen, -0.05, 0.05), test::uniform(gen, -0.05, 0.05),
                  test::uniform(gen, -0.05, 0.05));
    pose.r = test::random_rotvec(gen, 0, 0.2);
    const Vec2 pixel(test::uniform(gen, 0, k.width - 1),
                     test::uniform(gen, 0, k.height - 1));
    RayHit hit;
    try {
      hit = cast_ray(pixel, pose, k, scene);
    } catch (const OutsideMap&) {
      continue;
    }
    const Vec2 reproj =
        pixel_from_normalized(project(pose.to_camera(hit.point_world)), k);
    CHECK((reproj - pixel).norm() < 1e-9);
    ++valid;
  }
  CHECK(valid > 800);
}

TEST_CASE("cast_ray oblique depth matches the closed-form intersection") {
  const double d = 0.4;
  const PlanarScene scene = constant_scene(d);
  const CameraIntrinsics k = CameraIntrinsics::default_dvs128();

  Pose pose;
  pose.r = Vec3(0, kPi / 6, 0);  // yawed 30 degrees off the plane normal
  const RayHit hit = cast_ray(Vec2(k.cx, k.cy), pose, k, scene);
  CHECK(hit.depth == doctest::Approx(d / std::cos(kPi / 6)).epsilon(1e-12));
}

TEST_CASE("cast_ray error cases") {
  const PlanarScene scene = constant_scene(0.4);
  const CameraIntrinsics k = CameraIntrinsics::default_dvs128();

  Pose parallel;
  parallel.r = Vec3(0, kPi / 2, 0);
  CHECK_THROWS_AS(cast_ray(Vec2(k.cx, k.cy), parallel, k, scene),
                  RayParallelToPlane);

  const PlanarScene tiny = constant_scene(0.4, 2, 1e-3);
  CHECK_THROWS_AS(cast_ray(Vec2(0, 0), Pose::identity(), k, tiny), OutsideMap);

  const PlanarScene behind = constant_scene(-0.4);
  CHECK_THROWS_AS(cast_ray(Vec2(k.cx, k.cy), Pose::identity(), k, behind),
                  BehindCamera);

  CHECK_THROWS_AS(cast_ray(Vec2(-5, 0), Pose::identity(), k, scene), Error);
}
