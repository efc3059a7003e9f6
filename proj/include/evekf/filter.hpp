#pragma once

#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "evekf/event_model.hpp"
#include "evekf/simulator.hpp"
#include "evekf/state.hpp"
#include "evekf/time_surface.hpp"

namespace evekf {

/// Gaussian posterior over the sensor state.
struct Belief {
  SensorState mean;
  Mat12 cov = Mat12::Zero();
};

/// Covariance rate of the velocity-increment noise (V, Omega). The noise
/// injected over a prediction of length dt has covariance rate * dt.
struct ProcessNoise {
  Mat6 rate = Mat6::Zero();

  static ProcessNoise isotropic(double q_trans_rate, double q_rot_rate);
  /// (0.1 m/s)^2 translational, (0.1 rad/s)^2 rotational, per second.
  static ProcessNoise default_noise() { return isotropic(0.01, 0.01); }
};

/// Scalar variance of the contrast residual.
struct MeasurementNoise {
  double variance;

  explicit MeasurementNoise(double variance);
  static MeasurementNoise from_model(const ContrastModel& m) {
    return MeasurementNoise(m.variance());
  }
};

/// Constant-velocity state transition: t += (v+V)dt, the orientation
/// composes the incremental rotation exp(((w+Omega) dt)^), velocities pick
/// up the increments. w_noise = (V, Omega); pass zero for the mean.
SensorState propagate_mean(const SensorState& s, const Vec6& w_noise, double dt);

/// Jacobians of propagate_mean by central finite differences (step 1e-6),
/// with rotation components perturbed additively in vector form.
Mat12 jacobian_F(const SensorState& s, double dt);
Mat12x6 jacobian_L(const SensorState& s, double dt);

Belief predict(const Belief& b, double dt, const ProcessNoise& q);

struct Innovation {
  double nu = 0;          // -q at the predicted mean
  RowVec12 H = RowVec12::Zero();
  double S = 0;           // H P H^T + R
  double R = 0;
};

enum class SkipReason { NoPriorEvent, OffMap };

/// Innovation of one event against the predicted belief: residual, its
/// state Jacobian by central differences (re-rendering the patch for pose
/// perturbations), and the innovation variance. Events with no prior
/// timestamp at their pixel or without valid rendered support are skipped.
std::variant<Innovation, SkipReason> innovate(
    const Event& e, const Belief& b, const TimeSurface& ts,
    const MeasurementContext& ctx, const ContrastModel& model,
    std::optional<MeasurementNoise> noise = std::nullopt);

/// Kalman correction with the Joseph-form covariance update; the rotation
/// mean is composed additively in vector form and re-canonicalized.
/// Throws DegenerateInnovationCovariance if S < 1e-15.
Belief correct(const Belief& b, const Innovation& innovation);

struct FilterConfig {
  ProcessNoise process_noise = ProcessNoise::default_noise();
  std::optional<MeasurementNoise> measurement_noise;  // default: model variance
  std::size_t packet_size = 1;        // events per prediction step
  std::size_t snapshot_stride = 100;  // events between belief snapshots
  double skip_abort_fraction = 0.9;
  std::size_t skip_check_min_events = 5000;
};

struct Snapshot {
  double t = 0;
  Belief belief;
  std::size_t events_seen = 0;
  std::size_t events_skipped = 0;
};

/// Per-event record passed to the optional observer; pointers are valid
/// only for the duration of the call. `innovation` is null for skipped
/// events.
struct StepRecord {
  const Event* event = nullptr;
  const Belief* predicted = nullptr;
  const Belief* corrected = nullptr;
  const Innovation* innovation = nullptr;
  std::optional<SkipReason> skip;
};

using StepObserver = std::function<void(const StepRecord&)>;

struct RunReport {
  std::vector<Snapshot> snapshots;
  std::size_t n_events = 0;
  std::size_t n_processed = 0;
  std::size_t n_skipped_no_prior = 0;
  std::size_t n_skipped_off_map = 0;

  std::size_t n_skipped() const { return n_skipped_no_prior + n_skipped_off_map; }
};

/// Runs the filter over a time-ordered stream starting from belief b0 at
/// time t0: predict across the inter-event gap (or once per packet), then
/// innovate and correct per event. Every event, used or skipped, updates
/// the time surface. Aborts with FilterDivergence when the skip fraction
/// exceeds the configured limit, which signals a misconfigured run.
RunReport process_stream(const EventStream& stream, const Belief& b0, double t0,
                         const MeasurementContext& ctx, const ContrastModel& model,
                         const FilterConfig& config, const StepObserver& observer = {});

}  // namespace evekf
