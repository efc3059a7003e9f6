#pragma once

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "evekf/geometry.hpp"
#include "evekf/scene_map.hpp"
#include "evekf/state.hpp"

namespace evekf {

/// One asynchronous sensor spike.
struct Event {
  int x = 0, y = 0;   // pixel coordinates
  double t = 0;       // seconds
  int polarity = 1;   // +1 dark-to-bright, -1 bright-to-dark
};

/// Camera twist (v, w) in the camera frame.
struct Twist {
  Vec3 v = Vec3::Zero();
  Vec3 w = Vec3::Zero();

  Vec6 to_vector() const {
    Vec6 xi;
    xi << v, w;
    return xi;
  }
};

/// Nominal contrast threshold and the spread of the contrast values that
/// actually trigger events.
struct ContrastModel {
  double threshold;  // C, log-intensity units
  double sigma;      // standard deviation, log-intensity units

  ContrastModel(double threshold, double sigma);

  double variance() const { return sigma * sigma; }

  /// Uncalibrated fallback: C at the upper end of the typical 10-15%
  /// relative brightness change of these sensors, spread C/4. Experiments
  /// always replace it via estimate_threshold.
  static ContrastModel default_model() { return ContrastModel(0.15, 0.15 / 4.0); }
};

using Mat2x6 = Eigen::Matrix<double, 2, 6>;

/// 2x6 matrix mapping a camera twist to the image motion of a point at
/// normalized coordinates (u, v) and depth Z. Column order (vx vy vz wx wy wz).
/// Throws NonPositiveDepth.
Mat2x6 interaction_matrix(double u, double v, double z);

/// Motion field of an image point: udot = interaction_matrix(u, v, Z) * xi.
Vec2 motion_field(double u, double v, double z, const Twist& xi);

/// First-order log-intensity change at a point over dt: -<g, udot> * dt.
double contrast(const Vec2& g, const Vec2& udot, double dt);

/// Hard threshold decision: +1 / -1 once |contrast| reaches C, nothing below.
std::optional<int> spike_decision(double dlog_i, double threshold);

/// Converts the stored state velocities to the camera frame: the angular
/// rate is already body-frame, the linear velocity rotates by R.
Twist camera_frame_twist(const SensorState& state);

/// Everything a per-event measurement evaluation needs besides the state.
struct MeasurementContext {
  PlanarScene scene;
  CameraIntrinsics k;
  int patch_radius = 7;  // 15x15 neighborhood around the event pixel
};

/// Renders the patch around a pixel from the given pose.
RenderedView render_event_patch(int x, int y, const Pose& pose,
                                const MeasurementContext& ctx);

/// Absolute contrast -p * <g, udot> * dt evaluated on an already rendered
/// patch; g and the depth are taken at the event pixel.
/// Throws InsufficientSupport when the pixel lacks 3x3 valid support.
double absolute_contrast_in_view(const Event& e, const SensorState& state,
                                 const RenderedView& view,
                                 const CameraIntrinsics& k, double dt);

/// Implicit measurement residual q = -p * <g, udot> * dt - C, rendering the
/// patch from the state's pose. A perfectly explained event yields q = 0.
/// Propagates OutsideMap / InsufficientSupport from the rendering path.
double measurement_q(const Event& e, const SensorState& state,
                     const MeasurementContext& ctx, double dt, double threshold);

/// Gaussian moment fit over the central 90% of the sample mass. The trimmed
/// standard deviation is rescaled to undo the truncation bias so a Gaussian
/// sample is recovered with its full spread. Throws DegenerateHistogram when
/// the spread collapses below 1e-6.
ContrastModel fit_contrast_model(std::span<const double> contrasts);

struct CalibrationResult {
  ContrastModel model;
  std::vector<double> contrasts;  // one absolute-contrast value per used event
  std::size_t used = 0;
  std::size_t skipped = 0;
};

/// Estimates the contrast threshold from a prefix of an event stream and
/// states (ground truth or estimates) at the event times. Events without a
/// prior event at their pixel, or without valid rendered support, are
/// skipped. Requires >= 100 usable events (TooFewEvents).
CalibrationResult estimate_threshold(std::span<const Event> events,
                                     const std::function<SensorState(double)>& state_at,
                                     const MeasurementContext& ctx);

}  // namespace evekf
