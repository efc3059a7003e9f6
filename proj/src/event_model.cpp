#include "evekf/event_model.hpp"

#include <algorithm>
#include <cmath>

#include "evekf/time_surface.hpp"

namespace evekf {

ContrastModel::ContrastModel(double threshold_, double sigma_)
    : threshold(threshold_), sigma(sigma_) {
  if (!(threshold > 0) || !(sigma > 0)) {
    throw Error("ContrastModel: threshold and sigma must be positive");
  }
}

Mat2x6 interaction_matrix(double u, double v, double z) {
  if (!(z > 0)) {
    throw NonPositiveDepth("interaction_matrix: depth must be positive");
  }
  Mat2x6 b;
  b << -1.0 / z, 0.0, u / z, u * v, -(1.0 + u * u), v,
       0.0, -1.0 / z, v / z, 1.0 + v * v, -u * v, -u;
  return b;
}

Vec2 motion_field(double u, double v, double z, const Twist& xi) {
  return interaction_matrix(u, v, z) * xi.to_vector();
}

double contrast(const Vec2& g, const Vec2& udot, double dt) {
  return -g.dot(udot) * dt;
}

std::optional<int> spike_decision(double dlog_i, double threshold) {
  if (!(threshold > 0)) {
    throw Error("spike_decision: threshold must be positive");
  }
  if (dlog_i >= threshold) return 1;
  if (dlog_i <= -threshold) return -1;
  return std::nullopt;
}

Twist camera_frame_twist(const SensorState& state) {
  Twist xi;
  xi.v = exp_so3(state.r) * state.v;
  xi.w = state.w;
  return xi;
}

RenderedView render_event_patch(int x, int y, const Pose& pose,
                                const MeasurementContext& ctx) {
  PixelRoi roi;
  roi.x0 = x - ctx.patch_radius;
  roi.y0 = y - ctx.patch_radius;
  roi.width = 2 * ctx.patch_radius + 1;
  roi.height = 2 * ctx.patch_radius + 1;
  return render(ctx.scene, pose, ctx.k, roi);
}

double absolute_contrast_in_view(const Event& e, const SensorState& state,
                                 const RenderedView& view,
                                 const CameraIntrinsics& k, double dt) {
  const Vec2 g = gradient_at(view, e.x, e.y);
  const double z = view.depth_at(e.x, e.y);
  const Vec2 uv = normalized_from_pixel(Vec2(e.x, e.y), k);
  const Vec2 udot = motion_field(uv.x(), uv.y(), z, camera_frame_twist(state));
  return -e.polarity * g.dot(udot) * dt;
}

double measurement_q(const Event& e, const SensorState& state,
                     const MeasurementContext& ctx, double dt, double threshold) {
  const RenderedView view = render_event_patch(e.x, e.y, state.pose(), ctx);
  return absolute_contrast_in_view(e, state, view, ctx.k, dt) - threshold;
}

ContrastModel fit_contrast_model(std::span<const double> contrasts) {
  if (contrasts.size() < 2) {
    throw TooFewEvents("fit_contrast_model: need at least 2 values");
  }
  std::vector<double> sorted(contrasts.begin(), contrasts.end());
  std::sort(sorted.begin(), sorted.end());

  const std::size_t n = sorted.size();
  const auto lo = static_cast<std::size_t>(std::floor(0.05 * n));
  const auto hi = std::max(lo + 2, static_cast<std::size_t>(std::ceil(0.95 * n)));
  const std::size_t m = std::min(hi, n) - lo;

  double mean = 0;
  for (std::size_t i = lo; i < lo + m; ++i) mean += sorted[i];
  mean /= static_cast<double>(m);
  double var = 0;
  for (std::size_t i = lo; i < lo + m; ++i) {
    var += (sorted[i] - mean) * (sorted[i] - mean);
  }
  var /= static_cast<double>(m);

  // The central 90% of a Gaussian has variance (1 - 2 z phi(z) / 0.9) sigma^2
  // with z = 1.6449; divide it back out so the fit reports the full spread.
  constexpr double kTrimVarianceFactor = 0.6230244241;
  const double sigma = std::sqrt(var / kTrimVarianceFactor);
  if (sigma < 1e-6) {
    throw DegenerateHistogram("fit_contrast_model: spread below 1e-6");
  }
  return ContrastModel(mean, sigma);
}

CalibrationResult estimate_threshold(std::span<const Event> events,
                                     const std::function<SensorState(double)>& state_at,
                                     const MeasurementContext& ctx) {
  TimeSurface ts(ctx.k.width, ctx.k.height);
  std::vector<double> contrasts;
  contrasts.reserve(events.size());
  std::size_t skipped = 0;
  for (const Event& e : events) {
    const auto dt = ts.update(e);
    if (!dt) {
      ++skipped;
      continue;
    }
    try {
      const SensorState s = state_at(e.t);
      const RenderedView view = render_event_patch(e.x, e.y, s.pose(), ctx);
      contrasts.push_back(absolute_contrast_in_view(e, s, view, ctx.k, *dt));
    } catch (const OutsideMap&) {
      ++skipped;
    } catch (const InsufficientSupport&) {
      ++skipped;
    } catch (const NoVisiblePixels&) {
      ++skipped;
    } catch (const BehindCamera&) {
      ++skipped;
    }
  }
  if (contrasts.size() < 100) {
    throw TooFewEvents("estimate_threshold: fewer than 100 usable events");
  }
  CalibrationResult result{fit_contrast_model(contrasts), std::move(contrasts),
                           0, skipped};
  result.used = result.contrasts.size();
  return result;
}

}  // namespace evekf
