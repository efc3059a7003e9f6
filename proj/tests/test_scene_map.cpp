#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "evekf/scene_map.hpp"
#include "support/oracles.hpp"
#include "support/textures.hpp"

using namespace evekf;

namespace {

DenseMap map_from_grid(Eigen::MatrixXd grid, double texel = 0.01) {
  const Vec2 origin(-0.5 * (grid.cols() - 1) * texel,
                    -0.5 * (grid.rows() - 1) * texel);
  return DenseMap(std::move(grid), texel, origin);
}

// direct 2-D convolution with the same sampled-Gaussian kernel and
// edge-inclusive reflection, written independently of the library
Eigen::MatrixXd blur_oracle(const Eigen::MatrixXd& g, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;

  auto reflect = [](int i, int n) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -1 - i;
      if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
  };

  Eigen::MatrixXd out(g.rows(), g.cols());
  for (int i = 0; i < g.rows(); ++i) {
    for (int j = 0; j < g.cols(); ++j) {
      double acc = 0;
      for (int a = -radius; a <= radius; ++a) {
        for (int b = -radius; b <= radius; ++b) {
          acc += k[a + radius] * k[b + radius] *
                 g(reflect(i + a, static_cast<int>(g.rows())),
                   reflect(j + b, static_cast<int>(g.cols())));
        }
      }
      out(i, j) = acc;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("build_map applies the log with a floor") {
  Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(8, 8, std::exp(2.0));
  const DenseMap m1 = build_map(constant, 0.01, 1.0);
  CHECK((m1.grid().array() - 2.0).abs().maxCoeff() < 1e-12);

  Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(4, 4);
  const DenseMap m2 = build_map(zeros, 0.01, 1.0);
  CHECK(m2.grid().cwiseAbs().maxCoeff() == 0);

  Eigen::MatrixXd stripes(4, 4);
  for (int j = 0; j < 4; ++j) {
    stripes.col(j).setConstant(j % 2 == 0 ? 1.0 : std::exp(1.0));
  }
  const DenseMap m3 = build_map(stripes, 0.01, 1.0);
  for (int j = 0; j < 4; ++j) {
    CHECK(m3.grid()(0, j) == doctest::Approx(j % 2 == 0 ? 0.0 : 1.0).epsilon(1e-12));
  }

  CHECK_THROWS_AS(build_map(Eigen::MatrixXd::Zero(1, 5), 0.01, 1.0), EmptyImage);
  CHECK_THROWS_AS(build_map(Eigen::MatrixXd::Zero(0, 0), 0.01, 1.0), EmptyImage);
}

TEST_CASE("smooth_map identity at sigma zero") {
  const DenseMap m = map_from_grid(test::noise_image(16, 16, 3, 0, 1));
  const DenseMap s = smooth_map(m, 0.0);
  CHECK((s.grid() - m.grid()).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("smooth_map impulse response has Gaussian ratios") {
  Eigen::MatrixXd grid = Eigen::MatrixXd::Zero(21, 21);
  grid(10, 10) = 1.0;
  const DenseMap s = smooth_map(map_from_grid(std::move(grid)), 1.0);
  const double ratio = s.grid()(10, 10) / s.grid()(10, 11);
  CHECK(ratio == doctest::Approx(std::exp(0.5)).epsilon(1e-12));
}

TEST_CASE("smooth_map step edge matches direct convolution") {
  Eigen::MatrixXd grid(24, 48);
  for (int j = 0; j < 48; ++j) {
    grid.col(j).setConstant(j < 24 ? 0.0 : 1.0);
  }
  const Eigen::MatrixXd expected = blur_oracle(grid, 2.0);
  const DenseMap s = smooth_map(map_from_grid(std::move(grid)), 2.0);
  CHECK((s.grid() - expected).cwiseAbs().maxCoeff() < 1e-12);

  // monotone profile with spread-out support across the edge
  int nonzero_steps = 0;
  for (int j = 0; j + 1 < 48; ++j) {
    const double step = s.grid()(12, j + 1) - s.grid()(12, j);
    CHECK(step >= -1e-12);
    if (step > 1e-6) ++nonzero_steps;
  }
  CHECK(nonzero_steps >= 6);
}

TEST_CASE("smooth_map is linear and conserves the total") {
  const Eigen::MatrixXd a = test::noise_image(20, 32, 5, 0, 1);
  const Eigen::MatrixXd b = test::noise_image(20, 32, 6, 0, 1);
  const double alpha = 0.7, beta = -1.3;

  const DenseMap sa = smooth_map(map_from_grid(a), 1.5);
  const DenseMap sb = smooth_map(map_from_grid(b), 1.5);
  const DenseMap sab = smooth_map(map_from_grid(alpha * a + beta * b), 1.5);
  CHECK((sab.grid() - alpha * sa.grid() - beta * sb.grid()).cwiseAbs().maxCoeff() <
        1e-9);

  const double before = a.sum();
  const double after = sa.grid().sum();
  CHECK(std::abs(after - before) < 1e-6 * std::abs(before));
}

TEST_CASE("bilinear sampling") {
  Eigen::MatrixXd grid(2, 2);
  grid << 0, 1, 0, 1;
  const DenseMap m(std::move(grid), 1.0, Vec2(0, 0));

  CHECK(sample_log_intensity(m, Vec2(0, 0)) == 0);
  CHECK(sample_log_intensity(m, Vec2(1, 0)) == 1);
  CHECK(sample_log_intensity(m, Vec2(0.5, 0.25)) == doctest::Approx(0.5));

  const DenseMap noisy = map_from_grid(test::noise_image(12, 12, 9, 0, 1), 0.5);
  std::mt19937_64 gen(43);
  for (int i = 0; i < 200; ++i) {
    const double x = test::uniform(gen, noisy.domain().x_min, noisy.domain().x_max);
    const double y = test::uniform(gen, noisy.domain().y_min, noisy.domain().y_max);
    // 4-corner weighted sum recomputed by hand
    const double gx = (x - noisy.origin().x()) / noisy.texel_size();
    const double gy = (y - noisy.origin().y()) / noisy.texel_size();
    const int j0 = std::min(static_cast<int>(std::floor(gx)), noisy.cols() - 2);
    const int i0 = std::min(static_cast<int>(std::floor(gy)), noisy.rows() - 2);
    const double fx = gx - j0, fy = gy - i0;
    const double expected = (1 - fx) * (1 - fy) * noisy.grid()(i0, j0) +
                            fx * (1 - fy) * noisy.grid()(i0, j0 + 1) +
                            (1 - fx) * fy * noisy.grid()(i0 + 1, j0) +
                            fx * fy * noisy.grid()(i0 + 1, j0 + 1);
    CHECK(sample_log_intensity(noisy, Vec2(x, y)) ==
          doctest::Approx(expected).epsilon(1e-12));
  }

  CHECK_THROWS_AS(sample_log_intensity(m, Vec2(1.5, 0)), OutsideMap);
}

namespace {

PlanarScene scene_from_image(const Eigen::MatrixXd& image, double texel,
                             double plane_z, double smooth_sigma = 0) {
  DenseMap m = build_map(image, texel, 1.0);
  if (smooth_sigma > 0) {
    m = smooth_map(m, smooth_sigma);
  }
  return make_scene(Pose{Vec3(0, 0, plane_z), Vec3::Zero()},
                    std::make_shared<DenseMap>(std::move(m)));
}

}  // namespace

TEST_CASE("render of a constant map is constant") {
  const double d = 0.4;
  const PlanarScene scene =
      scene_from_image(Eigen::MatrixXd::Constant(256, 256, std::exp(1.0)), 0.005, d);
  const CameraIntrinsics k = CameraIntrinsics::default_dvs128();
  const RenderedView view = render(scene, Pose::identity(), k);
  for (int y = 0; y < k.height; y += 13) {
    for (int x = 0; x < k.width; x += 13) {
      REQUIRE(view.valid(x, y));
      CHECK(view.log_at(x, y) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(view.depth_at(x, y) == doctest::Approx(d).epsilon(1e-12));
    }
  }
}

TEST_CASE("render shifts with camera translation parallel to the plane") {
  const double d = 0.4;
  const CameraIntrinsics k = CameraIntrinsics::default_dvs128();
  const PlanarScene scene =
      scene_from_image(test::stripe_image(512, 512, 21), 0.004, d, 2.0);

  const int shift_px = 3;
  const double dx = shift_px * d / k.fx;
  const RenderedView a = render(scene, Pose::identity(), k);
  const RenderedView b = render(scene, Pose{Vec3(dx, 0, 0), Vec3::Zero()}, k);

  for (int y = 4; y < k.height - 4; y += 7) {
    for (int x = 4; x < k.width - 4 - shift_px; x += 5) {
      REQUIRE(a.valid(x + shift_px, y));
      REQUIRE(b.valid(x, y));
      CHECK(b.log_at(x, y) == doctest::Approx(a.log_at(x + shift_px, y)).epsilon(1e-12));
    }
  }

  // displacement recovered from 1-D cross-correlation of the column profiles
  Eigen::VectorXd pa = Eigen::VectorXd::Zero(k.width);
  Eigen::VectorXd pb = Eigen::VectorXd::Zero(k.width);
  for (int x = 0; x < k.width; ++x) {
    for (int y = 0; y < k.height; ++y) {
      pa[x] += a.log_at(x, y);
      pb[x] += b.log_at(x, y);
    }
  }
  pa.array() -= pa.mean();
  pb.array() -= pb.mean();
  const int max_lag = 10;
  Eigen::VectorXd corr(2 * max_lag + 1);
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    double c = 0;
    for (int x = std::max(0, -lag); x < k.width - std::max(0, lag); ++x) {
      c += pb[x] * pa[x + lag];
    }
    corr[lag + max_lag] = c;
  }
  int best = 0;
  corr.maxCoeff(&best);
  REQUIRE(best > 0);
  REQUIRE(best < 2 * max_lag);
  // parabolic peak refinement
  const double denom = corr[best - 1] - 2 * corr[best] + corr[best + 1];
  const double frac = denom != 0 ? 0.5 * (corr[best - 1] - corr[best + 1]) / denom : 0;
  const double estimated = best - max_lag + frac;
  CHECK(std::abs(estimated - shift_px) < 0.1);
}

TEST_CASE("render masks rays that miss the texture") {
  const CameraIntrinsics k = CameraIntrinsics::default_dvs128();
  // narrow band in y: only rays near the optical axis stay on the map
  Eigen::MatrixXd image = Eigen::MatrixXd::Constant(32, 512, 100.0);
  DenseMap m = build_map(image, 0.004, 1.0);
  const PlanarScene scene =
      make_scene(Pose{Vec3(0, 0, 0.4), Vec3::Zero()},
                 std::make_shared<DenseMap>(std::move(m)));

  const RenderedView view = render(scene, Pose::identity(), k);
  int n_valid = 0, n_invalid = 0;
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      view.valid(x, y) ? ++n_valid : ++n_invalid;
    }
  }
  CHECK(n_valid > 0);
  CHECK(n_invalid > 0);
  CHECK(view.valid(64, 64));
  CHECK_FALSE(view.valid(64, 4));

  // looking away from the plane entirely
  const PlanarScene behind =
      make_scene(Pose{Vec3(0, 0, -0.4), Vec3::Zero()},
                 std::make_shared<DenseMap>(
                     build_map(Eigen::MatrixXd::Constant(16, 16, 10.0), 0.01, 1.0)));
  CHECK_THROWS_AS(render(behind, Pose::identity(), k), NoVisiblePixels);
}

TEST_CASE("render region of interest matches the full frame") {
  const CameraIntrinsics k = CameraIntrinsics::default_dvs128();
  const PlanarScene scene =
      scene_from_image(test::noise_image(256, 256, 33), 0.005, 0.4, 2.0);

  const RenderedView full = render(scene, Pose::identity(), k);
  const RenderedView patch = render(scene, Pose::identity(), k, PixelRoi{50, 60, 15, 15});
  for (int y = 60; y < 75; ++y) {
    for (int x = 50; x < 65; ++x) {
      REQUIRE(patch.valid(x, y) == full.valid(x, y));
      if (full.valid(x, y)) {
        CHECK(patch.log_at(x, y) == full.log_at(x, y));
        CHECK(patch.depth_at(x, y) == full.depth_at(x, y));
      }
    }
  }

  // clipped at the sensor border
  const RenderedView corner = render(scene, Pose::identity(), k, PixelRoi{-4, -4, 15, 15});
  CHECK(corner.x0 == 0);
  CHECK(corner.y0 == 0);
  CHECK(corner.width() == 11);
}

TEST_CASE("render agrees with cast_ray plus map sampling") {
  const CameraIntrinsics k = CameraIntrinsics::default_dvs128();
  const PlanarScene scene =
      scene_from_image(test::noise_image(256, 256, 35), 0.005, 0.4, 2.0);
  const Pose pose{Vec3(0.03, -0.02, 0.01), Vec3(0.02, -0.03, 0.05)};
  const RenderedView view = render(scene, pose, k);
  for (int y = 5; y < k.height; y += 17) {
    for (int x = 3; x < k.width; x += 17) {
      if (!view.valid(x, y)) continue;
      const RayHit hit = cast_ray(Vec2(x, y), pose, k, scene);
      CHECK(view.log_at(x, y) ==
            doctest::Approx(sample_log_intensity(*scene.map, hit.plane_uv))
                .epsilon(1e-14));
    }
  }
}

TEST_CASE("gradient of a constant view vanishes") {
  const PlanarScene scene =
      scene_from_image(Eigen::MatrixXd::Constant(128, 128, std::exp(1.5)), 0.01, 0.4);
  const CameraIntrinsics k = CameraIntrinsics::default_dvs128();
  const RenderedView view = render(scene, Pose::identity(), k);
  CHECK(gradient_at(view, 64, 64).norm() == 0);
}

TEST_CASE("gradient of a rendered ramp matches the analytic slope") {
  const double texel = 0.004, d = 0.4;
  const double a = 3.0, b = -2.0;  // log-intensity per meter on the plane
  Eigen::MatrixXd grid(512, 512);
  const Vec2 origin(-0.5 * 511 * texel, -0.5 * 511 * texel);
  for (int i = 0; i < 512; ++i) {
    for (int j = 0; j < 512; ++j) {
      grid(i, j) = a * (origin.x() + j * texel) + b * (origin.y() + i * texel);
    }
  }
  const PlanarScene scene = make_scene(
      Pose{Vec3(0, 0, d), Vec3::Zero()},
      std::make_shared<DenseMap>(DenseMap(std::move(grid), texel, origin)));
  const CameraIntrinsics k = CameraIntrinsics::default_dvs128();
  const RenderedView view = render(scene, Pose::identity(), k);

  for (int y = 20; y < k.height - 20; y += 11) {
    for (int x = 20; x < k.width - 20; x += 11) {
      const Vec2 g = gradient_at(view, x, y);
      CHECK(g.x() == doctest::Approx(a * d).epsilon(0.01));
      CHECK(g.y() == doctest::Approx(b * d).epsilon(0.01));
    }
  }
}

TEST_CASE("gradient across a vertical stripe edge is horizontal") {
  const CameraIntrinsics k = CameraIntrinsics::default_dvs128();
  const PlanarScene scene =
      scene_from_image(test::step_image(512, 512, 256), 0.004, 0.4, 2.0);
  const RenderedView view = render(scene, Pose::identity(), k);

  // find the strongest horizontal response along the middle row
  int best_x = 0;
  double best = 0;
  for (int x = 2; x < k.width - 2; ++x) {
    const Vec2 g = gradient_at(view, x, 64);
    if (std::abs(g.x()) > best) {
      best = std::abs(g.x());
      best_x = x;
    }
  }
  REQUIRE(best > 0.1);
  const Vec2 g = gradient_at(view, best_x, 64);
  CHECK(std::abs(g.y()) < 0.05 * std::abs(g.x()));
}

TEST_CASE("gradient needs full 3x3 support") {
  const CameraIntrinsics k = CameraIntrinsics::default_dvs128();
  const PlanarScene scene =
      scene_from_image(test::noise_image(256, 256, 39), 0.005, 0.4, 2.0);
  const RenderedView patch = render(scene, Pose::identity(), k, PixelRoi{50, 60, 15, 15});
  CHECK_THROWS_AS(gradient_at(patch, 50, 60), InsufficientSupport);
  CHECK_NOTHROW(gradient_at(patch, 57, 67));

  // smoothed map renders to finite gradients wherever support exists
  const RenderedView full = render(scene, Pose::identity(), k);
  for (int y = 1; y < k.height - 1; y += 9) {
    for (int x = 1; x < k.width - 1; x += 9) {
      const Vec2 g = gradient_at(full, x, y);
      CHECK(std::isfinite(g.x()));
      CHECK(std::isfinite(g.y()));
    }
  }
}

TEST_CASE("pgm files round-trip") {
  const Eigen::MatrixXd img8 = test::noise_image(17, 23, 51, 0, 255).array().round();
  write_pgm("test_roundtrip8.pgm", img8, 255);
  CHECK((read_pgm("test_roundtrip8.pgm") - img8).cwiseAbs().maxCoeff() == 0);

  const Eigen::MatrixXd img16 =
      test::noise_image(9, 11, 52, 0, 65535).array().round();
  write_pgm("test_roundtrip16.pgm", img16, 65535);
  CHECK((read_pgm("test_roundtrip16.pgm") - img16).cwiseAbs().maxCoeff() == 0);

  CHECK_THROWS_AS(read_pgm("does_not_exist.pgm"), DataError);
}
