#pragma once

#include <Eigen/Core>

#include "evekf/geometry.hpp"

namespace evekf {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat12 = Eigen::Matrix<double, 12, 12>;
using Mat12x6 = Eigen::Matrix<double, 12, 6>;
using RowVec12 = Eigen::Matrix<double, 1, 12>;

/// Full sensor state: position and exponential-coordinate orientation of
/// the camera plus its velocities. `v` is the linear velocity in world
/// coordinates, `w` the angular velocity in body coordinates. Vector order
/// is (t, r, v, w).
struct SensorState {
  Vec3 t = Vec3::Zero();
  Vec3 r = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 w = Vec3::Zero();

  Pose pose() const { return Pose{t, r}; }

  Vec12 to_vector() const {
    Vec12 x;
    x << t, r, v, w;
    return x;
  }

  static SensorState from_vector(const Vec12& x) {
    SensorState s;
    s.t = x.segment<3>(0);
    s.r = x.segment<3>(3);
    s.v = x.segment<3>(6);
    s.w = x.segment<3>(9);
    return s;
  }
};

}  // namespace evekf
