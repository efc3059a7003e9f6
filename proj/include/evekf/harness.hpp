#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "evekf/event_model.hpp"
#include "evekf/filter.hpp"
#include "evekf/scene_map.hpp"
#include "evekf/simulator.hpp"

namespace evekf {

/// Flat key-value configuration with INI-style sections; keys are stored
/// as "section.key". Relative file paths resolve against the directory of
/// the config file they were loaded from.
class Config {
 public:
  static Config defaults();
  /// defaults, overlaid with the file, overlaid with "section.key=value"
  /// override strings. Unknown keys are rejected (ConfigError).
  static Config load(const std::string& path, std::span<const std::string> overrides = {});
  /// Reads a config back out of the "# cfg ..." header of an output file.
  static Config from_output_header(const std::string& path);

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  const std::string& get_str(const std::string& key) const;
  double get_num(const std::string& key) const;
  long get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  Vec3 get_vec3(const std::string& key) const;

  std::string resolve_path(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }
  const std::string& base_dir() const { return base_dir_; }
  void set_base_dir(const std::string& dir) { base_dir_ = dir; }

 private:
  std::map<std::string, std::string> kv_;
  std::string base_dir_ = ".";
};

struct BuiltScene {
  PlanarScene scene;
  CameraIntrinsics k;
};

BuiltScene build_scene(const Config& cfg);
Trajectory build_trajectory(const Config& cfg);
SimulatorOptions build_simulator_options(const Config& cfg);
ContrastModel build_contrast_model(const Config& cfg);
MeasurementContext build_measurement_context(const Config& cfg);
FilterConfig build_filter_config(const Config& cfg);

// ---- file formats ----------------------------------------------------

/// Event stream file: "# width=.. height=.. C=.. seed=.." first, the full
/// resolved config as "# cfg ..." lines, then one "t x y p" line per event.
void write_event_stream(const std::string& path, const EventStream& stream,
                        const Config& cfg);
EventStream read_event_stream(const std::string& path);

/// Trajectory file: "t tx ty tz rx ry rz vx vy vz wx wy wz" per sample.
void write_trajectory(const std::string& path, const Trajectory& traj,
                      const Config& cfg);
Trajectory read_trajectory(const std::string& path);

struct ReportRow {
  double t = 0;
  SensorState state;
  double trace_cov = 0;
  std::size_t n_skipped = 0;
};

/// Run report CSV: t,tx,ty,tz,rx,ry,rz,vx,vy,vz,wx,wy,wz,trace_cov,n_skipped.
void write_report(const std::string& path, std::span<const ReportRow> rows,
                  const Config& cfg);
std::vector<ReportRow> read_report(const std::string& path);

void write_contrast_model(const std::string& path, const ContrastModel& model,
                          const Config& cfg);
ContrastModel read_contrast_model(const std::string& path);

/// Normalized histogram CSV (bin_center,density); integrates to one.
void write_histogram(const std::string& path, std::span<const double> values,
                     int bins, const Config& cfg);

// ---- metrics ----------------------------------------------------------

struct MetricsRow {
  double t = 0;
  double rel_pos_err = 0;   // position error over ground-truth path length
  double rel_vel_err = 0;   // velocity error over ground-truth speed
  double rot_err_rad = 0;   // geodesic angle
};

struct MetricsSummary {
  double median_rel_pos = 0, p95_rel_pos = 0;
  double median_rel_vel = 0, p95_rel_vel = 0;
  double median_rot = 0, p95_rot = 0;
  std::size_t window_rows = 0;
};

std::vector<MetricsRow> compute_metrics(std::span<const ReportRow> rows,
                                        const Trajectory& ground_truth);

/// Aggregates over the post-convergence window: the trailing
/// `window_fraction` of the per-event snapshots (the initial-belief row is
/// not counted).
MetricsSummary summarize_metrics(std::span<const MetricsRow> rows,
                                 double window_fraction);

// ---- commands ----------------------------------------------------------

struct SimulateSummary {
  std::size_t n_events = 0;
  double duration = 0;
  double event_rate = 0;
};

struct TrackSummary {
  std::size_t n_events = 0;
  std::size_t n_processed = 0;
  std::size_t n_skipped = 0;
};

SimulateSummary cmd_simulate(const Config& cfg);
ContrastModel cmd_calibrate(const Config& cfg);
TrackSummary cmd_track(const Config& cfg);
MetricsSummary cmd_evaluate(const Config& cfg);
std::size_t cmd_plotdata(const Config& cfg);

}  // namespace evekf
