#pragma once

#include <Eigen/Dense>

#include <memory>
#include <optional>

#include "evekf/errors.hpp"

namespace evekf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Cross-product matrix: hat(a) * b == a.cross(b).
Mat3 hat(const Vec3& a);

/// Inverse of hat. Throws NotSkew if ||S + S^T|| >= 1e-9.
Vec3 vee(const Mat3& S);

/// Rodrigues exponential map, rotation vector -> rotation matrix.
/// Uses a 4th-order Taylor fallback below ||r|| = 1e-6.
Mat3 exp_so3(const Vec3& r);

/// Principal logarithm of a rotation matrix, returned as a rotation vector
/// with magnitude in [0, pi]. Orthonormality and determinant are validated
/// to 1e-6 (NotARotation otherwise). If near_pi is non-null it is set when
/// the angle is within 1e-3 of pi, where the axis is ill-conditioned.
Vec3 log_so3(const Mat3& R, bool* near_pi = nullptr);

/// Wraps a rotation vector onto the canonical representative with norm <= pi.
Vec3 canonicalize_rotation(const Vec3& r);

/// Rigid camera pose. `t` is the optical center in world coordinates and
/// `r` parametrizes the world-to-camera rotation R = exp_so3(r), so a world
/// point maps into the camera frame as X_cam = R * (X_world - t).
struct Pose {
  Vec3 t = Vec3::Zero();
  Vec3 r = Vec3::Zero();

  Mat3 rotation() const { return exp_so3(r); }
  Vec3 to_camera(const Vec3& x_world) const;
  Vec3 to_world(const Vec3& x_camera) const;

  static Pose identity() { return Pose{}; }
};

/// Composition: the returned pose applies `inner` first, then `outer`.
Pose compose(const Pose& outer, const Pose& inner);

/// Pose such that compose(inverse(p), p) is the identity.
Pose inverse(const Pose& p);

/// Pinhole camera. Normalized coordinates map to pixels affinely:
/// px = (fx*u + cx, fy*v + cy).
struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  CameraIntrinsics() = default;
  CameraIntrinsics(double fx, double fy, double cx, double cy, int width, int height);

  /// 128x128 sensor with a focal length of 65 px and centered principal
  /// point; the stock configuration used by the experiment harness.
  static CameraIntrinsics default_dvs128();
};

/// Perspective projection of a camera-frame point onto the normalized image
/// plane (u, v) = (X/Z, Y/Z). Throws BehindCamera for Z <= 1e-9.
Vec2 project(const Vec3& x_camera);

Vec2 pixel_from_normalized(const Vec2& uv, const CameraIntrinsics& k);
Vec2 normalized_from_pixel(const Vec2& pixel, const CameraIntrinsics& k);

class DenseMap;  // scene_map.hpp

/// Axis-aligned rectangle in map-plane coordinates (meters).
struct MapDomain {
  double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
  bool contains(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
};

/// A single textured plane. `plane_pose` maps world points into the plane's
/// local frame (the plane is its local z = 0, with the texture spanning
/// `domain`); `map` carries the log-intensity texture.
struct PlanarScene {
  Pose plane_pose;
  MapDomain domain;
  std::shared_ptr<const DenseMap> map;

  /// Plane unit normal in world coordinates (local +z axis).
  Vec3 normal_world() const;
};

/// Result of intersecting one pixel's viewing ray with the scene plane.
struct RayHit {
  Vec3 point_world = Vec3::Zero();
  double depth = 0;        // camera-frame Z of the hit, meters
  Vec2 plane_uv = Vec2::Zero();  // hit in plane-local coordinates, meters
};

/// Casts the viewing ray of `pixel` from `pose` into the scene plane.
/// Throws RayParallelToPlane, BehindCamera, or OutsideMap; the returned hit
/// reprojects onto the input pixel to 1e-9 px and has depth > 0.
RayHit cast_ray(const Vec2& pixel, const Pose& pose, const CameraIntrinsics& k,
                const PlanarScene& scene);

namespace detail {

enum class RayStatus { Hit, Parallel, Behind, Outside };

/// Per-view constants for ray casting, so render loops pay the pose
/// trigonometry once instead of per pixel.
struct CastFrame {
  Vec3 camera_center;
  Mat3 world_from_camera;  // R^T
  Mat3 plane_from_world;
  Vec3 plane_origin;
  Vec3 normal_world;

  CastFrame(const Pose& pose, const PlanarScene& scene);
};

RayStatus cast_ray_impl(const Vec2& pixel, const CastFrame& frame,
                        const CameraIntrinsics& k, const MapDomain& domain,
                        RayHit* hit);

}  // namespace detail

}  // namespace evekf
