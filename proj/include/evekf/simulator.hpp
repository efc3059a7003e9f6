#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "evekf/event_model.hpp"
#include "evekf/geometry.hpp"
#include "evekf/state.hpp"
#include "evekf/time_surface.hpp"

namespace evekf {

struct TrajectorySample {
  double t = 0;
  Pose pose;
  Vec3 v_world = Vec3::Zero();
  Vec3 omega = Vec3::Zero();  // body frame
};

/// Sampled ground-truth trajectory with interpolation: linear in position
/// and velocities, constant-axis geodesic in orientation.
class Trajectory {
 public:
  Trajectory(std::vector<double> times, std::vector<Pose> poses,
             std::vector<Vec3> v_world, std::vector<Vec3> omega);

  std::size_t size() const { return times_.size(); }
  double t_begin() const { return times_.front(); }
  double t_end() const { return times_.back(); }
  double duration() const { return t_end() - t_begin(); }

  TrajectorySample sample(std::size_t i) const;
  const std::vector<double>& times() const { return times_; }

  Pose pose_at(double t) const;
  Vec3 velocity_at(double t) const;
  Vec3 omega_at(double t) const;
  SensorState state_at(double t) const;

  /// Ground-truth path length from the start up to time t.
  double path_length_until(double t) const;

 private:
  std::size_t bracket(double t) const;

  std::vector<double> times_;
  std::vector<Pose> poses_;
  std::vector<Vec3> v_;
  std::vector<Vec3> w_;
};

/// Straight-line motion with constant acceleration and fixed orientation:
/// position p0.t + v0*tau + a*tau^2/2, sampled at `rate` Hz.
Trajectory make_const_accel_trajectory(const Pose& p0, const Vec3& v0, const Vec3& a,
                                       double duration, double rate);

/// Straight-line motion at constant velocity and fixed orientation.
Trajectory make_const_velocity_trajectory(const Pose& p0, const Vec3& v,
                                          double duration, double rate);

enum class SynthesisPolicy {
  /// Per-pixel accumulator; every crossing of the threshold emits one event
  /// timestamped by linear interpolation inside the frame interval.
  LevelCrossing,
  /// Frame differencing: threshold the per-pixel change between adjacent
  /// rendered frames and randomly subsample the survivors to a target count
  /// per interval, with timestamps drawn uniformly inside the interval.
  SubtractAndSample,
};

struct SimulatorOptions {
  SynthesisPolicy policy = SynthesisPolicy::LevelCrossing;
  double frame_rate = 1000.0;               // Hz
  double target_events_per_interval = 500;  // SubtractAndSample only
  bool weight_by_contrast = false;          // subsample prob proportional to |dlogI|
  bool threshold_jitter = true;             // per-event Gaussian jitter, std = sigma
  std::uint64_t seed = 1;
};

/// Time-ordered event stream with the provenance needed to reprocess it.
struct EventStream {
  std::vector<Event> events;
  int width = 0;
  int height = 0;
  ContrastModel model = ContrastModel::default_model();
  std::uint64_t seed = 0;
  std::shared_ptr<const Trajectory> ground_truth;  // may be null when loaded bare
};

/// Synthesizes the event stream seen along a trajectory over the scene.
/// Timestamps are globally non-decreasing and strictly increasing per pixel.
EventStream synthesize_events(const Trajectory& traj, const PlanarScene& scene,
                              const CameraIntrinsics& k, const ContrastModel& model,
                              const SimulatorOptions& options);

}  // namespace evekf
