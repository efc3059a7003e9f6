#pragma once

// Independent reference implementations used to cross-check the library.
// Rotations here go through unit quaternions, never through the Rodrigues
// code under test.

#include <Eigen/Core>

#include <cmath>
#include <random>

namespace evekf::test {

struct Quat {
  double w = 1, x = 0, y = 0, z = 0;
};

inline Quat quat_from_rotvec(const Eigen::Vector3d& r) {
  const double theta = r.norm();
  if (theta < 1e-300) {
    return {1, 0, 0, 0};
  }
  const Eigen::Vector3d axis = r / theta;
  const double s = std::sin(0.5 * theta);
  return {std::cos(0.5 * theta), axis.x() * s, axis.y() * s, axis.z() * s};
}

inline Quat quat_mul(const Quat& a, const Quat& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

inline Eigen::Matrix3d quat_to_matrix(const Quat& q) {
  Eigen::Matrix3d m;
  m << 1 - 2 * (q.y * q.y + q.z * q.z), 2 * (q.x * q.y - q.z * q.w),
      2 * (q.x * q.z + q.y * q.w),
      2 * (q.x * q.y + q.z * q.w), 1 - 2 * (q.x * q.x + q.z * q.z),
      2 * (q.y * q.z - q.x * q.w),
      2 * (q.x * q.z - q.y * q.w), 2 * (q.y * q.z + q.x * q.w),
      1 - 2 * (q.x * q.x + q.y * q.y);
  return m;
}

inline Eigen::Vector3d quat_to_rotvec(const Quat& q) {
  double w = q.w;
  Eigen::Vector3d v(q.x, q.y, q.z);
  if (w < 0) {  // canonical hemisphere, angle in [0, pi]
    w = -w;
    v = -v;
  }
  const double n = v.norm();
  if (n < 1e-300) {
    return Eigen::Vector3d::Zero();
  }
  return v * (2.0 * std::atan2(n, w) / n);
}

inline Eigen::Matrix3d rotation_oracle(const Eigen::Vector3d& r) {
  return quat_to_matrix(quat_from_rotvec(r));
}

/// Rotation vector of exp(a^) * exp(b^), via quaternion composition.
inline Eigen::Vector3d compose_rotvec_oracle(const Eigen::Vector3d& a,
                                             const Eigen::Vector3d& b) {
  return quat_to_rotvec(quat_mul(quat_from_rotvec(a), quat_from_rotvec(b)));
}

// -- deterministic draws for tests ------------------------------------------

inline double uniform(std::mt19937_64& gen, double lo, double hi) {
  const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

inline double gaussian(std::mt19937_64& gen, double mean, double stddev) {
  const double u1 = 1.0 - uniform(gen, 0.0, 1.0);
  const double u2 = uniform(gen, 0.0, 1.0);
  return mean + stddev * std::sqrt(-2.0 * std::log(u1)) *
                    std::cos(2.0 * 3.14159265358979323846 * u2);
}

inline Eigen::Vector3d random_unit(std::mt19937_64& gen) {
  while (true) {
    const Eigen::Vector3d v(uniform(gen, -1, 1), uniform(gen, -1, 1),
                            uniform(gen, -1, 1));
    const double n = v.norm();
    if (n > 1e-3 && n <= 1.0) {
      return v / n;
    }
  }
}

inline Eigen::Vector3d random_rotvec(std::mt19937_64& gen, double min_angle,
                                     double max_angle) {
  return random_unit(gen) * uniform(gen, min_angle, max_angle);
}

}  // namespace evekf::test
