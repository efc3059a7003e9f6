#include "evekf/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

namespace evekf {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) {
    return "";
  }
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v, const char* fmt = "%.12g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

}  // namespace

Config Config::defaults() {
  Config cfg;
  auto& kv = cfg.kv_;
  kv["intrinsics.width"] = "128";
  kv["intrinsics.height"] = "128";
  kv["intrinsics.fx"] = "65";
  kv["intrinsics.fy"] = "65";
  kv["intrinsics.cx"] = "63.5";
  kv["intrinsics.cy"] = "63.5";

  kv["scene.texture"] = "";
  kv["scene.texel_size"] = "0.004";
  kv["scene.floor"] = "1";
  kv["scene.smooth_sigma"] = "2";
  kv["scene.plane_t"] = "0 0 0.4";
  kv["scene.plane_r"] = "0 0 0";

  kv["trajectory.type"] = "const_velocity";
  kv["trajectory.p0_t"] = "0 0 0";
  kv["trajectory.p0_r"] = "0 0 0";
  kv["trajectory.v0"] = "0.1 0 0";
  kv["trajectory.accel"] = "0 0 0";
  kv["trajectory.duration"] = "1";
  kv["trajectory.rate"] = "1000";

  kv["simulator.C"] = "0.15";
  kv["simulator.sigma_C"] = "0.0375";
  kv["simulator.frame_rate"] = "1000";
  kv["simulator.policy"] = "level_crossing";
  kv["simulator.seed"] = "1";
  kv["simulator.target_events_per_interval"] = "500";
  kv["simulator.threshold_jitter"] = "true";
  kv["simulator.weight_by_contrast"] = "false";

  kv["filter.q_trans"] = "0.01";
  kv["filter.q_rot"] = "0.01";
  kv["filter.sigma0_t"] = "0.01";
  kv["filter.sigma0_r"] = "0.0174532925199433";
  kv["filter.sigma0_v"] = "0.05";
  kv["filter.sigma0_w"] = "0.05";
  kv["filter.measurement_sigma"] = "";
  kv["filter.contrast_model_file"] = "auto";
  kv["filter.packet_size"] = "1";
  kv["filter.patch_size"] = "15";
  kv["filter.snapshot_stride"] = "100";
  kv["filter.calibration_events"] = "2000";
  kv["filter.skip_abort_fraction"] = "0.9";
  kv["filter.skip_check_min_events"] = "5000";
  kv["filter.init_offset_t"] = "0 0 0";

  kv["metrics.window_fraction"] = "0.7";

  kv["output.events"] = "events.txt";
  kv["output.trajectory"] = "trajectory.txt";
  kv["output.report"] = "report.csv";
  kv["output.metrics"] = "metrics.csv";
  kv["output.contrast_model"] = "contrast_model.txt";
  kv["output.histogram"] = "";
  kv["output.histogram_bins"] = "40";
  kv["output.plotdata"] = "plotdata.csv";
  return cfg;
}

namespace {

void apply_override(Config& cfg, const Config& defaults, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override must look like section.key=value: " + spec);
  }
  const std::string key = trim(spec.substr(0, eq));
  if (!defaults.has(key)) {
    throw ConfigError("unknown config key: " + key);
  }
  cfg.set(key, trim(spec.substr(eq + 1)));
}

}  // namespace

Config Config::load(const std::string& path, std::span<const std::string> overrides) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  const Config defaults_cfg = defaults();
  Config cfg = defaults_cfg;
  cfg.base_dir_ = fs::path(path).parent_path().string();
  if (cfg.base_dir_.empty()) {
    cfg.base_dir_ = ".";
  }

  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') {
      continue;
    }
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(t.substr(0, eq));
    if (!section.empty()) {
      key = section + "." + key;
    }
    if (!defaults_cfg.has(key)) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown config key: " + key);
    }
    cfg.kv_[key] = trim(t.substr(eq + 1));
  }
  for (const auto& o : overrides) {
    apply_override(cfg, defaults_cfg, o);
  }
  return cfg;
}

Config Config::from_output_header(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open file: " + path);
  }
  const Config defaults_cfg = defaults();
  Config cfg = defaults_cfg;
  cfg.base_dir_ = fs::path(path).parent_path().string();
  if (cfg.base_dir_.empty()) {
    cfg.base_dir_ = ".";
  }
  std::string line;
  bool any = false;
  while (std::getline(in, line)) {
    if (line.rfind("# cfg ", 0) != 0) {
      if (!line.empty() && line[0] != '#') {
        break;  // past the header
      }
      continue;
    }
    const std::string body = line.substr(6);
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      continue;
    }
    const std::string key = trim(body.substr(0, eq));
    if (!defaults_cfg.has(key)) {
      throw ConfigError("unknown config key in header: " + key);
    }
    cfg.kv_[key] = trim(body.substr(eq + 1));
    any = true;
  }
  if (!any) {
    throw DataError("no config header found in " + path);
  }
  return cfg;
}

bool Config::has(const std::string& key) const { return kv_.count(key) != 0; }

void Config::set(const std::string& key, const std::string& value) {
  kv_[key] = value;
}

const std::string& Config::get_str(const std::string& key) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) {
    throw ConfigError("missing config key: " + key);
  }
  return it->second;
}

double Config::get_num(const std::string& key) const {
  const std::string& v = get_str(key);
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (trim(v.substr(pos)).empty()) {
      return d;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("config key " + key + " is not a number: '" + v + "'");
}

long Config::get_int(const std::string& key) const {
  const double d = get_num(key);
  const long l = std::lround(d);
  if (std::abs(d - static_cast<double>(l)) > 1e-9) {
    throw ConfigError("config key " + key + " is not an integer");
  }
  return l;
}

bool Config::get_bool(const std::string& key) const {
  const std::string& v = get_str(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key " + key + " is not a boolean: '" + v + "'");
}

Vec3 Config::get_vec3(const std::string& key) const {
  std::istringstream in(get_str(key));
  Vec3 v;
  if (!(in >> v.x() >> v.y() >> v.z())) {
    throw ConfigError("config key " + key + " is not a 3-vector");
  }
  std::string rest;
  if (in >> rest) {
    throw ConfigError("config key " + key + " has trailing tokens");
  }
  return v;
}

std::string Config::resolve_path(const std::string& key) const {
  const std::string& v = get_str(key);
  if (v.empty()) {
    throw ConfigError("config key " + key + " names no file");
  }
  const fs::path p(v);
  if (p.is_absolute()) {
    return v;
  }
  return (fs::path(base_dir_) / p).string();
}

// ---- builders ----------------------------------------------------------

BuiltScene build_scene(const Config& cfg) {
  const std::string texture = cfg.resolve_path("scene.texture");
  if (!fs::exists(texture)) {
    throw ConfigError("scene texture file does not exist: " + texture);
  }
  const Eigen::MatrixXd image = read_pgm(texture);
  DenseMap map = build_map(image, cfg.get_num("scene.texel_size"),
                           cfg.get_num("scene.floor"));
  const double sigma = cfg.get_num("scene.smooth_sigma");
  if (sigma > 0) {
    map = smooth_map(map, sigma);
  }
  const Pose plane{cfg.get_vec3("scene.plane_t"), cfg.get_vec3("scene.plane_r")};

  BuiltScene out{make_scene(plane, std::make_shared<DenseMap>(std::move(map))),
                 CameraIntrinsics(cfg.get_num("intrinsics.fx"),
                                  cfg.get_num("intrinsics.fy"),
                                  cfg.get_num("intrinsics.cx"),
                                  cfg.get_num("intrinsics.cy"),
                                  static_cast<int>(cfg.get_int("intrinsics.width")),
                                  static_cast<int>(cfg.get_int("intrinsics.height")))};
  return out;
}

Trajectory build_trajectory(const Config& cfg) {
  const std::string type = cfg.get_str("trajectory.type");
  const Pose p0{cfg.get_vec3("trajectory.p0_t"), cfg.get_vec3("trajectory.p0_r")};
  const Vec3 v0 = cfg.get_vec3("trajectory.v0");
  const double duration = cfg.get_num("trajectory.duration");
  const double rate = cfg.get_num("trajectory.rate");
  if (type == "const_accel") {
    return make_const_accel_trajectory(p0, v0, cfg.get_vec3("trajectory.accel"),
                                       duration, rate);
  }
  if (type == "const_velocity") {
    return make_const_velocity_trajectory(p0, v0, duration, rate);
  }
  throw ConfigError("unknown trajectory.type: " + type);
}

SimulatorOptions build_simulator_options(const Config& cfg) {
  SimulatorOptions opt;
  const std::string policy = cfg.get_str("simulator.policy");
  if (policy == "level_crossing") {
    opt.policy = SynthesisPolicy::LevelCrossing;
  } else if (policy == "subtract_sample") {
    opt.policy = SynthesisPolicy::SubtractAndSample;
  } else {
    throw ConfigError("unknown simulator.policy: " + policy);
  }
  opt.frame_rate = cfg.get_num("simulator.frame_rate");
  opt.target_events_per_interval = cfg.get_num("simulator.target_events_per_interval");
  opt.weight_by_contrast = cfg.get_bool("simulator.weight_by_contrast");
  opt.threshold_jitter = cfg.get_bool("simulator.threshold_jitter");
  opt.seed = static_cast<std::uint64_t>(cfg.get_int("simulator.seed"));
  return opt;
}

ContrastModel build_contrast_model(const Config& cfg) {
  return ContrastModel(cfg.get_num("simulator.C"), cfg.get_num("simulator.sigma_C"));
}

MeasurementContext build_measurement_context(const Config& cfg) {
  const BuiltScene built = build_scene(cfg);
  const long patch = cfg.get_int("filter.patch_size");
  if (patch < 3 || patch % 2 == 0) {
    throw ConfigError("filter.patch_size must be an odd number >= 3");
  }
  return MeasurementContext{built.scene, built.k, static_cast<int>((patch - 1) / 2)};
}

FilterConfig build_filter_config(const Config& cfg) {
  FilterConfig fc;
  fc.process_noise =
      ProcessNoise::isotropic(cfg.get_num("filter.q_trans"), cfg.get_num("filter.q_rot"));
  const std::string ms = cfg.get_str("filter.measurement_sigma");
  if (!ms.empty()) {
    const double sigma = cfg.get_num("filter.measurement_sigma");
    fc.measurement_noise = MeasurementNoise(sigma * sigma);
  }
  fc.packet_size = static_cast<std::size_t>(cfg.get_int("filter.packet_size"));
  fc.snapshot_stride = static_cast<std::size_t>(cfg.get_int("filter.snapshot_stride"));
  fc.skip_abort_fraction = cfg.get_num("filter.skip_abort_fraction");
  fc.skip_check_min_events =
      static_cast<std::size_t>(cfg.get_int("filter.skip_check_min_events"));
  return fc;
}

// ---- file formats --------------------------------------------------------

namespace {

void write_config_header(std::ostream& out, const Config& cfg) {
  for (const auto& [key, value] : cfg.entries()) {
    out << "# cfg " << key << " = " << value << "\n";
  }
}

std::ofstream open_output(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);  // binary: byte-stable newlines
  if (!out) {
    throw DataError("cannot open output file: " + path);
  }
  return out;
}

}  // namespace

void write_event_stream(const std::string& path, const EventStream& stream,
                        const Config& cfg) {
  std::ofstream out = open_output(path);
  out << "# width=" << stream.width << " height=" << stream.height
      << " C=" << format_double(stream.model.threshold, "%.17g")
      << " seed=" << stream.seed << "\n";
  out << "# sigma_C=" << format_double(stream.model.sigma, "%.17g") << "\n";
  write_config_header(out, cfg);
  char line[96];
  for (const Event& e : stream.events) {
    std::snprintf(line, sizeof(line), "%.9f %d %d %d\n", e.t, e.x, e.y, e.polarity);
    out << line;
  }
}

EventStream read_event_stream(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open event stream: " + path);
  }
  EventStream stream;
  double c = 0.15, sigma_c = 0.0375;
  std::string line;
  double prev_t = -std::numeric_limits<double>::infinity();
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string tok;
      while (hs >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) {
          continue;
        }
        const std::string key = tok.substr(0, eq);
        const std::string value = tok.substr(eq + 1);
        try {
          if (key == "width") stream.width = std::stoi(value);
          else if (key == "height") stream.height = std::stoi(value);
          else if (key == "C") c = std::stod(value);
          else if (key == "sigma_C") sigma_c = std::stod(value);
          else if (key == "seed") stream.seed = std::stoull(value);
        } catch (const std::exception&) {
          throw DataError("malformed header token '" + tok + "' in " + path);
        }
      }
      continue;
    }
    Event e;
    std::istringstream ls(line);
    if (!(ls >> e.t >> e.x >> e.y >> e.polarity)) {
      throw DataError("malformed event line in " + path + ": " + line);
    }
    if (e.x < 0 || e.x >= stream.width || e.y < 0 || e.y >= stream.height ||
        (e.polarity != 1 && e.polarity != -1)) {
      throw DataError("event out of range in " + path + ": " + line);
    }
    if (e.t < prev_t) {
      throw DataError("events not in time order in " + path);
    }
    prev_t = e.t;
    stream.events.push_back(e);
  }
  if (stream.width <= 0 || stream.height <= 0) {
    throw DataError("event stream missing width/height header: " + path);
  }
  stream.model = ContrastModel(c, sigma_c);
  return stream;
}

void write_trajectory(const std::string& path, const Trajectory& traj,
                      const Config& cfg) {
  std::ofstream out = open_output(path);
  out << "# t tx ty tz rx ry rz vx vy vz wx wy wz\n";
  write_config_header(out, cfg);
  char buf[512];
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const TrajectorySample s = traj.sample(i);
    std::snprintf(buf, sizeof(buf),
                  "%.9f %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g "
                  "%.17g %.17g %.17g\n",
                  s.t, s.pose.t.x(), s.pose.t.y(), s.pose.t.z(), s.pose.r.x(),
                  s.pose.r.y(), s.pose.r.z(), s.v_world.x(), s.v_world.y(),
                  s.v_world.z(), s.omega.x(), s.omega.y(), s.omega.z());
    out << buf;
  }
}

Trajectory read_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open trajectory: " + path);
  }
  std::vector<double> times;
  std::vector<Pose> poses;
  std::vector<Vec3> v, w;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') {
      continue;
    }
    std::istringstream ls(line);
    double t;
    Pose p;
    Vec3 vel, omega;
    if (!(ls >> t >> p.t.x() >> p.t.y() >> p.t.z() >> p.r.x() >> p.r.y() >>
          p.r.z() >> vel.x() >> vel.y() >> vel.z() >> omega.x() >> omega.y() >>
          omega.z())) {
      throw DataError("malformed trajectory line in " + path + ": " + line);
    }
    times.push_back(t);
    poses.push_back(p);
    v.push_back(vel);
    w.push_back(omega);
  }
  if (times.empty()) {
    throw DataError("empty trajectory file: " + path);
  }
  try {
    return Trajectory(std::move(times), std::move(poses), std::move(v), std::move(w));
  } catch (const Error& e) {
    throw DataError(std::string("invalid trajectory in ") + path + ": " + e.what());
  }
}

void write_report(const std::string& path, std::span<const ReportRow> rows,
                  const Config& cfg) {
  std::ofstream out = open_output(path);
  write_config_header(out, cfg);
  out << "t,tx,ty,tz,rx,ry,rz,vx,vy,vz,wx,wy,wz,trace_cov,n_skipped\n";
  char buf[512];
  for (const ReportRow& r : rows) {
    std::snprintf(buf, sizeof(buf),
                  "%.9f,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,"
                  "%.12g,%.12g,%.12g,%.12g,%zu\n",
                  r.t, r.state.t.x(), r.state.t.y(), r.state.t.z(), r.state.r.x(),
                  r.state.r.y(), r.state.r.z(), r.state.v.x(), r.state.v.y(),
                  r.state.v.z(), r.state.w.x(), r.state.w.y(), r.state.w.z(),
                  r.trace_cov, r.n_skipped);
    out << buf;
  }
}

std::vector<ReportRow> read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open report: " + path);
  }
  std::vector<ReportRow> rows;
  std::string line;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') {
      continue;
    }
    if (!saw_header && line.rfind("t,", 0) == 0) {
      saw_header = true;
      continue;
    }
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    ReportRow r;
    if (!(ls >> r.t >> r.state.t.x() >> r.state.t.y() >> r.state.t.z() >>
          r.state.r.x() >> r.state.r.y() >> r.state.r.z() >> r.state.v.x() >>
          r.state.v.y() >> r.state.v.z() >> r.state.w.x() >> r.state.w.y() >>
          r.state.w.z() >> r.trace_cov >> r.n_skipped)) {
      throw DataError("malformed report line in " + path + ": " + line);
    }
    rows.push_back(r);
  }
  if (!saw_header) {
    throw DataError("report has no column header: " + path);
  }
  return rows;
}

void write_contrast_model(const std::string& path, const ContrastModel& model,
                          const Config& cfg) {
  std::ofstream out = open_output(path);
  write_config_header(out, cfg);
  out << "C = " << format_double(model.threshold, "%.17g") << "\n";
  out << "sigma_C = " << format_double(model.sigma, "%.17g") << "\n";
}

ContrastModel read_contrast_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open contrast model: " + path);
  }
  double c = -1, sigma = -1;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') {
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      continue;
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    try {
      if (key == "C") c = std::stod(value);
      if (key == "sigma_C") sigma = std::stod(value);
    } catch (const std::exception&) {
      throw DataError("malformed contrast model line: " + line);
    }
  }
  if (c <= 0 || sigma <= 0) {
    throw DataError("contrast model file lacks positive C / sigma_C: " + path);
  }
  return ContrastModel(c, sigma);
}

void write_histogram(const std::string& path, std::span<const double> values,
                     int bins, const Config& cfg) {
  if (values.empty() || bins < 1) {
    throw DataError("write_histogram: nothing to bin");
  }
  const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
  double lo = *mn_it, hi = *mx_it;
  if (hi - lo < 1e-12) {
    hi = lo + 1e-12;
  }
  const double width = (hi - lo) / bins;
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  for (const double v : values) {
    auto b = static_cast<long>((v - lo) / width);
    b = std::clamp<long>(b, 0, bins - 1);
    ++counts[static_cast<std::size_t>(b)];
  }
  std::ofstream out = open_output(path);
  write_config_header(out, cfg);
  out << "bin_center,density\n";
  char buf[96];
  const double n = static_cast<double>(values.size());
  for (int b = 0; b < bins; ++b) {
    const double center = lo + (b + 0.5) * width;
    const double density = static_cast<double>(counts[static_cast<std::size_t>(b)]) /
                           (n * width);
    std::snprintf(buf, sizeof(buf), "%.12g,%.12g\n", center, density);
    out << buf;
  }
}

// ---- metrics --------------------------------------------------------------

std::vector<MetricsRow> compute_metrics(std::span<const ReportRow> rows,
                                        const Trajectory& ground_truth) {
  if (rows.empty()) {
    return {};
  }
  if (rows.front().t > ground_truth.t_end() || rows.back().t < ground_truth.t_begin()) {
    throw NoOverlap("compute_metrics: report and ground truth do not overlap in time");
  }
  std::vector<MetricsRow> out;
  out.reserve(rows.size());
  for (const ReportRow& r : rows) {
    const double t = std::clamp(r.t, ground_truth.t_begin(), ground_truth.t_end());
    const SensorState gt = ground_truth.state_at(t);
    MetricsRow m;
    m.t = r.t;

    const double pos_err = (r.state.t - gt.t).norm();
    const double path = ground_truth.path_length_until(t);
    m.rel_pos_err = pos_err < 1e-15 ? 0.0 : pos_err / std::max(path, 1e-15);

    const double vel_err = (r.state.v - gt.v).norm();
    m.rel_vel_err = vel_err < 1e-15 ? 0.0 : vel_err / std::max(gt.v.norm(), 1e-15);

    m.rot_err_rad =
        log_so3(exp_so3(r.state.r) * exp_so3(gt.r).transpose()).norm();
    out.push_back(m);
  }
  return out;
}

namespace {

double percentile(std::vector<double> v, double p) {
  if (v.empty()) {
    return 0;
  }
  std::sort(v.begin(), v.end());
  if (v.size() == 1) {
    return v[0];
  }
  const double idx = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(idx));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double a = idx - static_cast<double>(lo);
  return (1 - a) * v[lo] + a * v[hi];
}

}  // namespace

MetricsSummary summarize_metrics(std::span<const MetricsRow> rows,
                                 double window_fraction) {
  MetricsSummary s;
  if (rows.empty()) {
    return s;
  }
  const double f = std::clamp(window_fraction, 0.0, 1.0);
  const auto m = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(f * static_cast<double>(rows.size()))));
  const std::size_t start = rows.size() - m;
  std::vector<double> pos, vel, rot;
  for (std::size_t i = start; i < rows.size(); ++i) {
    pos.push_back(rows[i].rel_pos_err);
    vel.push_back(rows[i].rel_vel_err);
    rot.push_back(rows[i].rot_err_rad);
  }
  s.window_rows = m;
  s.median_rel_pos = percentile(pos, 0.5);
  s.p95_rel_pos = percentile(pos, 0.95);
  s.median_rel_vel = percentile(vel, 0.5);
  s.p95_rel_vel = percentile(vel, 0.95);
  s.median_rot = percentile(rot, 0.5);
  s.p95_rot = percentile(rot, 0.95);
  return s;
}

// ---- commands ---------------------------------------------------------------

SimulateSummary cmd_simulate(const Config& cfg) {
  const BuiltScene built = build_scene(cfg);
  const Trajectory traj = build_trajectory(cfg);
  const ContrastModel model = build_contrast_model(cfg);
  const SimulatorOptions options = build_simulator_options(cfg);

  const EventStream stream =
      synthesize_events(traj, built.scene, built.k, model, options);
  write_event_stream(cfg.resolve_path("output.events"), stream, cfg);
  write_trajectory(cfg.resolve_path("output.trajectory"), traj, cfg);

  SimulateSummary s;
  s.n_events = stream.events.size();
  s.duration = traj.duration();
  s.event_rate = s.duration > 0 ? static_cast<double>(s.n_events) / s.duration : 0.0;
  std::cout << "simulate: " << s.n_events << " events over "
            << format_double(s.duration, "%.3f") << " s ("
            << format_double(s.event_rate, "%.1f") << " ev/s), seed "
            << options.seed << "\n";
  return s;
}

ContrastModel cmd_calibrate(const Config& cfg) {
  const EventStream stream = read_event_stream(cfg.resolve_path("output.events"));
  const Trajectory gt = read_trajectory(cfg.resolve_path("output.trajectory"));
  const MeasurementContext ctx = build_measurement_context(cfg);

  const auto requested = static_cast<std::size_t>(cfg.get_int("filter.calibration_events"));
  std::size_t n = requested;
  if (requested > stream.events.size()) {
    std::cout << "calibrate: stream has only " << stream.events.size()
              << " events (requested " << requested << "); using all\n";
    n = stream.events.size();
  }
  const auto result = estimate_threshold(
      std::span<const Event>(stream.events.data(), n),
      [&gt](double t) { return gt.state_at(t); }, ctx);

  write_contrast_model(cfg.resolve_path("output.contrast_model"), result.model, cfg);
  if (!cfg.get_str("output.histogram").empty()) {
    write_histogram(cfg.resolve_path("output.histogram"), result.contrasts,
                    static_cast<int>(cfg.get_int("output.histogram_bins")), cfg);
  }
  std::cout << "calibrate: C=" << format_double(result.model.threshold, "%.6g")
            << " sigma_C=" << format_double(result.model.sigma, "%.6g") << " from "
            << result.used << " events (" << result.skipped << " skipped)\n";
  return result.model;
}

namespace {

ContrastModel resolve_tracking_model(const Config& cfg, const EventStream& stream) {
  const std::string mode = cfg.get_str("filter.contrast_model_file");
  if (mode == "none") {
    return stream.model;
  }
  if (mode == "auto") {
    const std::string path = cfg.resolve_path("output.contrast_model");
    if (fs::exists(path)) {
      return read_contrast_model(path);
    }
    return stream.model;
  }
  const fs::path p(mode);
  const std::string path =
      p.is_absolute() ? mode : (fs::path(cfg.base_dir()) / p).string();
  return read_contrast_model(path);
}

}  // namespace

TrackSummary cmd_track(const Config& cfg) {
  const EventStream stream = read_event_stream(cfg.resolve_path("output.events"));
  const Trajectory gt = read_trajectory(cfg.resolve_path("output.trajectory"));
  const MeasurementContext ctx = build_measurement_context(cfg);
  const ContrastModel model = resolve_tracking_model(cfg, stream);
  const FilterConfig fc = build_filter_config(cfg);

  Belief b0;
  b0.mean = gt.state_at(gt.t_begin());
  b0.mean.t += cfg.get_vec3("filter.init_offset_t");
  const double s_t = cfg.get_num("filter.sigma0_t");
  const double s_r = cfg.get_num("filter.sigma0_r");
  const double s_v = cfg.get_num("filter.sigma0_v");
  const double s_w = cfg.get_num("filter.sigma0_w");
  b0.cov.diagonal() << s_t * s_t, s_t * s_t, s_t * s_t, s_r * s_r, s_r * s_r,
      s_r * s_r, s_v * s_v, s_v * s_v, s_v * s_v, s_w * s_w, s_w * s_w, s_w * s_w;

  const RunReport report =
      process_stream(stream, b0, gt.t_begin(), ctx, model, fc);

  std::vector<ReportRow> rows;
  rows.reserve(report.snapshots.size());
  for (const Snapshot& s : report.snapshots) {
    rows.push_back(ReportRow{s.t, s.belief.mean, s.belief.cov.trace(),
                             s.events_skipped});
  }
  write_report(cfg.resolve_path("output.report"), rows, cfg);

  TrackSummary summary{report.n_events, report.n_processed, report.n_skipped()};
  std::cout << "track: " << summary.n_processed << " events processed, "
            << summary.n_skipped << " skipped (no prior "
            << report.n_skipped_no_prior << ", off map "
            << report.n_skipped_off_map << "), " << rows.size() << " snapshots\n";
  return summary;
}

MetricsSummary cmd_evaluate(const Config& cfg) {
  const std::vector<ReportRow> rows = read_report(cfg.resolve_path("output.report"));
  const Trajectory gt = read_trajectory(cfg.resolve_path("output.trajectory"));
  const std::vector<MetricsRow> metrics = compute_metrics(rows, gt);
  const MetricsSummary summary =
      summarize_metrics(metrics, cfg.get_num("metrics.window_fraction"));

  std::ofstream out = open_output(cfg.resolve_path("output.metrics"));
  write_config_header(out, cfg);
  out << "# window_rows=" << summary.window_rows
      << " median_rel_pos_err=" << format_double(summary.median_rel_pos)
      << " p95_rel_pos_err=" << format_double(summary.p95_rel_pos)
      << " median_rel_vel_err=" << format_double(summary.median_rel_vel)
      << " p95_rel_vel_err=" << format_double(summary.p95_rel_vel)
      << " median_rot_err_rad=" << format_double(summary.median_rot)
      << " p95_rot_err_rad=" << format_double(summary.p95_rot) << "\n";
  out << "t,rel_pos_err,rel_vel_err,rot_err_rad\n";
  char buf[160];
  for (const MetricsRow& m : metrics) {
    std::snprintf(buf, sizeof(buf), "%.9f,%.12g,%.12g,%.12g\n", m.t, m.rel_pos_err,
                  m.rel_vel_err, m.rot_err_rad);
    out << buf;
  }

  std::cout << "evaluate: window of " << summary.window_rows << " snapshots\n";
  std::printf("  %-18s %10s %10s\n", "metric", "median", "p95");
  std::printf("  %-18s %10.4g %10.4g\n", "rel_pos_err", summary.median_rel_pos,
              summary.p95_rel_pos);
  std::printf("  %-18s %10.4g %10.4g\n", "rel_vel_err", summary.median_rel_vel,
              summary.p95_rel_vel);
  std::printf("  %-18s %10.4g %10.4g\n", "rot_err_rad", summary.median_rot,
              summary.p95_rot);
  return summary;
}

std::size_t cmd_plotdata(const Config& cfg) {
  const std::vector<ReportRow> rows = read_report(cfg.resolve_path("output.report"));
  std::ofstream out = open_output(cfg.resolve_path("output.plotdata"));
  write_config_header(out, cfg);
  out << "t,tx,ty,tz,rx,ry,rz,vx,vy,vz,wx,wy,wz,trace_cov,n_skipped\n";
  char buf[512];
  for (const ReportRow& r : rows) {
    std::snprintf(buf, sizeof(buf),
                  "%.9f,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,"
                  "%.12g,%.12g,%.12g,%.12g,%zu\n",
                  r.t, r.state.t.x(), r.state.t.y(), r.state.t.z(), r.state.r.x(),
                  r.state.r.y(), r.state.r.z(), r.state.v.x(), r.state.v.y(),
                  r.state.v.z(), r.state.w.x(), r.state.w.y(), r.state.w.z(),
                  r.trace_cov, r.n_skipped);
    out << buf;
  }
  std::cout << "plotdata: " << rows.size() << " rows\n";
  return rows.size();
}

}  // namespace evekf
