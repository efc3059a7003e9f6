#include "evekf/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <utility>

#include "evekf/scene_map.hpp"

namespace evekf {

Trajectory::Trajectory(std::vector<double> times, std::vector<Pose> poses,
                       std::vector<Vec3> v_world, std::vector<Vec3> omega)
    : times_(std::move(times)), poses_(std::move(poses)), v_(std::move(v_world)),
      w_(std::move(omega)) {
  if (times_.empty() || times_.size() != poses_.size() ||
      times_.size() != v_.size() || times_.size() != w_.size()) {
    throw Error("Trajectory: inconsistent sample vectors");
  }
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (!(times_[i] > times_[i - 1])) {
      throw Error("Trajectory: sample times must be strictly increasing");
    }
  }
}

TrajectorySample Trajectory::sample(std::size_t i) const {
  return TrajectorySample{times_.at(i), poses_.at(i), v_.at(i), w_.at(i)};
}

std::size_t Trajectory::bracket(double t) const {
  if (times_.size() < 2 || t <= times_.front()) {
    return 0;
  }
  if (t >= times_.back()) {
    return times_.size() - 2;
  }
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  return static_cast<std::size_t>(it - times_.begin()) - 1;
}

Pose Trajectory::pose_at(double t) const {
  if (times_.size() == 1) {
    return poses_.front();
  }
  const std::size_t i = bracket(t);
  const double span = times_[i + 1] - times_[i];
  const double a = std::clamp((t - times_[i]) / span, 0.0, 1.0);
  Pose out;
  out.t = (1 - a) * poses_[i].t + a * poses_[i + 1].t;
  // constant-axis geodesic between the bracketing orientations
  const Mat3 r0 = poses_[i].rotation();
  const Vec3 d = log_so3(poses_[i + 1].rotation() * r0.transpose());
  out.r = log_so3(exp_so3(a * d) * r0);
  return out;
}

Vec3 Trajectory::velocity_at(double t) const {
  if (times_.size() == 1) {
    return v_.front();
  }
  const std::size_t i = bracket(t);
  const double span = times_[i + 1] - times_[i];
  const double a = std::clamp((t - times_[i]) / span, 0.0, 1.0);
  return (1 - a) * v_[i] + a * v_[i + 1];
}

Vec3 Trajectory::omega_at(double t) const {
  if (times_.size() == 1) {
    return w_.front();
  }
  const std::size_t i = bracket(t);
  const double span = times_[i + 1] - times_[i];
  const double a = std::clamp((t - times_[i]) / span, 0.0, 1.0);
  return (1 - a) * w_[i] + a * w_[i + 1];
}

SensorState Trajectory::state_at(double t) const {
  const Pose p = pose_at(t);
  SensorState s;
  s.t = p.t;
  s.r = p.r;
  s.v = velocity_at(t);
  s.w = omega_at(t);
  return s;
}

double Trajectory::path_length_until(double t) const {
  double len = 0;
  for (std::size_t i = 0; i + 1 < times_.size(); ++i) {
    if (t <= times_[i]) {
      break;
    }
    const Vec3 seg = poses_[i + 1].t - poses_[i].t;
    if (t >= times_[i + 1]) {
      len += seg.norm();
    } else {
      const double a = (t - times_[i]) / (times_[i + 1] - times_[i]);
      len += a * seg.norm();
      break;
    }
  }
  return len;
}

Trajectory make_const_accel_trajectory(const Pose& p0, const Vec3& v0, const Vec3& a,
                                       double duration, double rate) {
  if (!(rate > 0) || duration < 0) {
    throw Error("make_const_accel_trajectory: need rate > 0 and duration >= 0");
  }
  const auto steps = static_cast<std::size_t>(std::llround(duration * rate));
  const double dt = steps > 0 ? duration / static_cast<double>(steps) : 0.0;
  std::vector<double> times(steps + 1);
  std::vector<Pose> poses(steps + 1);
  std::vector<Vec3> v(steps + 1);
  std::vector<Vec3> w(steps + 1, Vec3::Zero());
  for (std::size_t k = 0; k <= steps; ++k) {
    const double tau = dt * static_cast<double>(k);
    times[k] = tau;
    poses[k].t = p0.t + v0 * tau + 0.5 * a * tau * tau;
    poses[k].r = p0.r;
    v[k] = v0 + a * tau;
  }
  return Trajectory(std::move(times), std::move(poses), std::move(v), std::move(w));
}

Trajectory make_const_velocity_trajectory(const Pose& p0, const Vec3& v,
                                          double duration, double rate) {
  return make_const_accel_trajectory(p0, v, Vec3::Zero(), duration, rate);
}

namespace {

/// Deterministic generator with bit-stable uniform and Gaussian draws.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : gen_(seed) {}

  double uniform01() {  // [0, 1)
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % n;
    std::uint64_t v = gen_();
    while (v >= limit) v = gen_();
    return v % n;
  }

  double normal(double mean, double stddev) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * spare_;
    }
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return mean + stddev * radius * std::cos(angle);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0;
  bool has_spare_ = false;
};

struct PixelLevelState {
  double ref = 0;
  double next_threshold = 0;
  bool has_ref = false;
};

double draw_threshold(SeededRng& rng, const ContrastModel& model, bool jitter) {
  if (!jitter) {
    return model.threshold;
  }
  // clamp so a deep negative draw cannot produce a non-positive threshold
  return std::max(0.05 * model.threshold,
                  rng.normal(model.threshold, model.sigma));
}

void append_event(std::vector<Event>& events, std::vector<double>& last_t,
                  int width, int x, int y, double t, int polarity) {
  double& last = last_t[static_cast<std::size_t>(y) * width + x];
  double stamp = t;
  if (!(stamp > last)) {
    stamp = std::nextafter(last, std::numeric_limits<double>::infinity());
  }
  last = stamp;
  events.push_back(Event{x, y, stamp, polarity});
}

struct Candidate {
  int x, y;
  int polarity;
  double magnitude;
};

}  // namespace

EventStream synthesize_events(const Trajectory& traj, const PlanarScene& scene,
                              const CameraIntrinsics& k, const ContrastModel& model,
                              const SimulatorOptions& options) {
  if (!(options.frame_rate > 0)) {
    throw Error("synthesize_events: frame rate must be positive");
  }
  EventStream stream;
  stream.width = k.width;
  stream.height = k.height;
  stream.model = model;
  stream.seed = options.seed;
  stream.ground_truth = std::make_shared<Trajectory>(traj);

  const double duration = traj.duration();
  const auto intervals =
      static_cast<std::size_t>(std::llround(duration * options.frame_rate));
  if (intervals == 0) {
    return stream;
  }
  const double frame_dt = duration / static_cast<double>(intervals);
  const double t0 = traj.t_begin();

  SeededRng rng(options.seed);
  const std::size_t n_pixels = static_cast<std::size_t>(k.width) * k.height;
  std::vector<PixelLevelState> level(n_pixels);
  std::vector<double> last_t(n_pixels, -std::numeric_limits<double>::infinity());

  RenderedView prev = render(scene, traj.pose_at(t0), k);
  std::vector<Candidate> candidates;
  std::vector<std::size_t> order;

  for (std::size_t f = 1; f <= intervals; ++f) {
    const double t_a = t0 + frame_dt * static_cast<double>(f - 1);
    const double t_b = t0 + frame_dt * static_cast<double>(f);
    RenderedView cur = render(scene, traj.pose_at(t_b), k);

    if (options.policy == SynthesisPolicy::LevelCrossing) {
      for (int y = 0; y < k.height; ++y) {
        for (int x = 0; x < k.width; ++x) {
          PixelLevelState& px = level[static_cast<std::size_t>(y) * k.width + x];
          if (!prev.valid(x, y) || !cur.valid(x, y)) {
            px.has_ref = false;
            continue;
          }
          const double v0 = prev.log_at(x, y);
          const double v1 = cur.log_at(x, y);
          if (!px.has_ref) {
            px.ref = v0;
            px.next_threshold = draw_threshold(rng, model, options.threshold_jitter);
            px.has_ref = true;
          }
          if (v1 == v0) {
            continue;
          }
          const int polarity = v1 > v0 ? 1 : -1;
          while (true) {
            const double target = px.ref + polarity * px.next_threshold;
            if ((polarity > 0 && v1 < target) || (polarity < 0 && v1 > target)) {
              break;
            }
            const double frac =
                std::clamp((target - v0) / (v1 - v0), 0.0, 1.0);
            append_event(stream.events, last_t, k.width, x, y,
                         t_a + frac * frame_dt, polarity);
            px.ref = target;
            px.next_threshold = draw_threshold(rng, model, options.threshold_jitter);
          }
        }
      }
    } else {  // SubtractAndSample
      candidates.clear();
      for (int y = 0; y < k.height; ++y) {
        for (int x = 0; x < k.width; ++x) {
          if (!prev.valid(x, y) || !cur.valid(x, y)) {
            continue;
          }
          const double delta = cur.log_at(x, y) - prev.log_at(x, y);
          const double threshold =
              draw_threshold(rng, model, options.threshold_jitter);
          if (std::abs(delta) >= threshold) {
            candidates.push_back(
                Candidate{x, y, delta > 0 ? 1 : -1, std::abs(delta)});
          }
        }
      }
      const auto target = static_cast<std::size_t>(
          std::llround(std::max(0.0, options.target_events_per_interval)));
      order.resize(candidates.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::size_t take = std::min(target, candidates.size());
      if (candidates.size() > target) {
        if (options.weight_by_contrast) {
          // weighted sampling without replacement: top-k of u^(1/w)
          std::vector<std::pair<double, std::size_t>> keys(candidates.size());
          for (std::size_t i = 0; i < candidates.size(); ++i) {
            const double u = std::max(rng.uniform01(), 1e-300);
            keys[i] = {std::pow(u, 1.0 / candidates[i].magnitude), i};
          }
          std::sort(keys.begin(), keys.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first; });
          for (std::size_t i = 0; i < take; ++i) order[i] = keys[i].second;
        } else {
          for (std::size_t i = 0; i < take; ++i) {
            const std::size_t j = i + rng.below(order.size() - i);
            std::swap(order[i], order[j]);
          }
        }
      }
      for (std::size_t i = 0; i < take; ++i) {
        const Candidate& c = candidates[order[i]];
        append_event(stream.events, last_t, k.width, c.x, c.y,
                     t_a + rng.uniform01() * frame_dt, c.polarity);
      }
    }
    prev = std::move(cur);
  }

  std::stable_sort(stream.events.begin(), stream.events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  return stream;
}

}  // namespace evekf
