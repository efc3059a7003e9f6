#include "evekf/geometry.hpp"

#include <Eigen/LU>

#include <cmath>

namespace evekf {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kSmallAngle = 1e-6;   // Taylor fallback below this
constexpr double kNearPiBand = 1e-3;   // axis conditioning flag
}  // namespace

Mat3 hat(const Vec3& a) {
  Mat3 s;
  s << 0, -a.z(), a.y(),
       a.z(), 0, -a.x(),
       -a.y(), a.x(), 0;
  return s;
}

Vec3 vee(const Mat3& s) {
  if ((s + s.transpose()).cwiseAbs().maxCoeff() >= 1e-9) {
    throw NotSkew("vee: input is not skew-symmetric");
  }
  return Vec3(s(2, 1), s(0, 2), s(1, 0));
}

Mat3 exp_so3(const Vec3& r) {
  const double theta2 = r.squaredNorm();
  const double theta = std::sqrt(theta2);
  double a, b;  // R = I + a*hat(r) + b*hat(r)^2
  if (theta < kSmallAngle) {
    a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
    b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  const Mat3 k = hat(r);
  return Mat3::Identity() + a * k + b * k * k;
}

Vec3 log_so3(const Mat3& r_mat, bool* near_pi) {
  if ((r_mat.transpose() * r_mat - Mat3::Identity()).cwiseAbs().maxCoeff() >= 1e-6 ||
      std::abs(r_mat.determinant() - 1.0) >= 1e-6) {
    throw NotARotation("log_so3: input is not a rotation matrix");
  }

  const double cos_theta =
      std::min(1.0, std::max(-1.0, (r_mat.trace() - 1.0) / 2.0));
  const double theta = std::acos(cos_theta);
  if (near_pi != nullptr) {
    *near_pi = theta > kPi - kNearPiBand;
  }

  const Vec3 w(r_mat(2, 1) - r_mat(1, 2), r_mat(0, 2) - r_mat(2, 0),
               r_mat(1, 0) - r_mat(0, 1));

  if (theta < kSmallAngle) {
    // log(R) ~ (R - R^T)/2 with a series correction for theta/(2 sin theta).
    const double theta2 = theta * theta;
    return 0.5 * (1.0 + theta2 / 6.0 + 7.0 * theta2 * theta2 / 360.0) * w;
  }
  if (theta > kPi - kNearPiBand) {
    // Near pi the antisymmetric part vanishes; recover the axis from the
    // symmetric part instead: (R + R^T)/2 = cos(theta) I + (1-cos) a a^T.
    const Mat3 sym = 0.5 * (r_mat + r_mat.transpose());
    const double one_minus_cos = 1.0 - cos_theta;
    Vec3 axis;
    int imax = 0;
    sym.diagonal().maxCoeff(&imax);
    axis[imax] = std::sqrt(
        std::max(0.0, (sym(imax, imax) - cos_theta) / one_minus_cos));
    for (int j = 0; j < 3; ++j) {
      if (j != imax) {
        axis[j] = sym(imax, j) / (one_minus_cos * axis[imax]);
      }
    }
    axis.normalize();
    // Fix the sign with the antisymmetric part while it carries signal;
    // at exactly pi the two representatives are equivalent, so pick the one
    // whose first nonzero component is positive.
    const double proj = w.dot(axis);
    if (std::abs(proj) > 1e-12) {
      if (proj < 0) axis = -axis;
    } else {
      for (int j = 0; j < 3; ++j) {
        if (std::abs(axis[j]) > 1e-12) {
          if (axis[j] < 0) axis = -axis;
          break;
        }
      }
    }
    return theta * axis;
  }
  return (theta / (2.0 * std::sin(theta))) * w;
}

Vec3 canonicalize_rotation(const Vec3& r) {
  const double theta = r.norm();
  if (theta <= kPi) {
    return r;
  }
  double wrapped = std::fmod(theta, 2.0 * kPi);
  Vec3 axis = r / theta;
  if (wrapped > kPi) {
    wrapped -= 2.0 * kPi;  // negative: flip onto the short representative
  }
  return axis * wrapped;
}

Vec3 Pose::to_camera(const Vec3& x_world) const {
  return rotation() * (x_world - t);
}

Vec3 Pose::to_world(const Vec3& x_camera) const {
  return t + rotation().transpose() * x_camera;
}

Pose compose(const Pose& outer, const Pose& inner) {
  const Mat3 r_outer = outer.rotation();
  const Mat3 r_inner = inner.rotation();
  Pose out;
  out.r = log_so3(r_outer * r_inner);
  out.t = inner.t + r_inner.transpose() * outer.t;
  return out;
}

Pose inverse(const Pose& p) {
  const Mat3 r = p.rotation();
  Pose out;
  out.r = log_so3(r.transpose());
  out.t = -(r * p.t);
  return out;
}

CameraIntrinsics::CameraIntrinsics(double fx_, double fy_, double cx_, double cy_,
                                   int width_, int height_)
    : fx(fx_), fy(fy_), cx(cx_), cy(cy_), width(width_), height(height_) {
  if (fx <= 0 || fy <= 0) {
    throw Error("CameraIntrinsics: focal lengths must be positive");
  }
  if (width <= 0 || height <= 0 || cx < 0 || cx >= width || cy < 0 || cy >= height) {
    throw Error("CameraIntrinsics: principal point outside the sensor");
  }
}

CameraIntrinsics CameraIntrinsics::default_dvs128() {
  return CameraIntrinsics(65.0, 65.0, 63.5, 63.5, 128, 128);
}

Vec2 project(const Vec3& x_camera) {
  if (x_camera.z() <= 1e-9) {
    throw BehindCamera("project: point at or behind the camera plane");
  }
  return Vec2(x_camera.x() / x_camera.z(), x_camera.y() / x_camera.z());
}

Vec2 pixel_from_normalized(const Vec2& uv, const CameraIntrinsics& k) {
  return Vec2(k.fx * uv.x() + k.cx, k.fy * uv.y() + k.cy);
}

Vec2 normalized_from_pixel(const Vec2& pixel, const CameraIntrinsics& k) {
  return Vec2((pixel.x() - k.cx) / k.fx, (pixel.y() - k.cy) / k.fy);
}

Vec3 PlanarScene::normal_world() const {
  return plane_pose.rotation().transpose() * Vec3::UnitZ();
}

namespace detail {

CastFrame::CastFrame(const Pose& pose, const PlanarScene& scene) {
  const Mat3 r = pose.rotation();
  camera_center = pose.t;
  world_from_camera = r.transpose();
  plane_from_world = scene.plane_pose.rotation();
  plane_origin = scene.plane_pose.t;
  normal_world = plane_from_world.transpose() * Vec3::UnitZ();
}

RayStatus cast_ray_impl(const Vec2& pixel, const CastFrame& frame,
                        const CameraIntrinsics& k, const MapDomain& domain,
                        RayHit* hit) {
  const Vec2 uv = normalized_from_pixel(pixel, k);
  const Vec3 dir_world =
      frame.world_from_camera * Vec3(uv.x(), uv.y(), 1.0);
  const double denom = frame.normal_world.dot(dir_world);
  if (std::abs(denom) / dir_world.norm() < 1e-9) {
    return RayStatus::Parallel;
  }
  const double s =
      frame.normal_world.dot(frame.plane_origin - frame.camera_center) / denom;
  // The ray direction has unit camera-frame Z, so s equals the depth.
  if (s <= 1e-12) {
    return RayStatus::Behind;
  }
  const Vec3 point = frame.camera_center + s * dir_world;
  const Vec3 local = frame.plane_from_world * (point - frame.plane_origin);
  if (!domain.contains(local.x(), local.y())) {
    return RayStatus::Outside;
  }
  hit->point_world = point;
  hit->depth = s;
  hit->plane_uv = Vec2(local.x(), local.y());
  return RayStatus::Hit;
}

}  // namespace detail

RayHit cast_ray(const Vec2& pixel, const Pose& pose, const CameraIntrinsics& k,
                const PlanarScene& scene) {
  if (pixel.x() < 0 || pixel.x() > k.width - 1 || pixel.y() < 0 ||
      pixel.y() > k.height - 1) {
    throw Error("cast_ray: pixel outside the sensor bounds");
  }
  const detail::CastFrame frame(pose, scene);
  RayHit hit;
  switch (detail::cast_ray_impl(pixel, frame, k, scene.domain, &hit)) {
    case detail::RayStatus::Hit:
      return hit;
    case detail::RayStatus::Parallel:
      throw RayParallelToPlane("cast_ray: viewing ray parallel to the plane");
    case detail::RayStatus::Behind:
      throw BehindCamera("cast_ray: plane intersection behind the camera");
    case detail::RayStatus::Outside:
      throw OutsideMap("cast_ray: intersection outside the textured extent");
  }
  throw Error("cast_ray: unreachable");
}

}  // namespace evekf
