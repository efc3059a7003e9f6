#include "evekf/filter.hpp"

#include <algorithm>
#include <cmath>

namespace evekf {

namespace {
constexpr double kFdStep = 1e-6;  // finite-difference step, linear units and rad
}

ProcessNoise ProcessNoise::isotropic(double q_trans_rate, double q_rot_rate) {
  if (q_trans_rate < 0 || q_rot_rate < 0) {
    throw Error("ProcessNoise: rates must be non-negative");
  }
  ProcessNoise q;
  q.rate.diagonal() << q_trans_rate, q_trans_rate, q_trans_rate,
      q_rot_rate, q_rot_rate, q_rot_rate;
  return q;
}

MeasurementNoise::MeasurementNoise(double variance_) : variance(variance_) {
  if (!(variance > 0)) {
    throw Error("MeasurementNoise: variance must be positive");
  }
}

SensorState propagate_mean(const SensorState& s, const Vec6& w_noise, double dt) {
  const Vec3 dv = w_noise.head<3>();
  const Vec3 dw = w_noise.tail<3>();
  SensorState out;
  out.t = s.t + (s.v + dv) * dt;
  out.r = log_so3(exp_so3((s.w + dw) * dt) * exp_so3(s.r));
  out.v = s.v + dv;
  out.w = s.w + dw;
  return out;
}

Mat12 jacobian_F(const SensorState& s, double dt) {
  Mat12 f;
  const Vec12 x0 = s.to_vector();
  for (int i = 0; i < 12; ++i) {
    Vec12 xp = x0;
    Vec12 xm = x0;
    xp[i] += kFdStep;
    xm[i] -= kFdStep;
    const Vec12 fp =
        propagate_mean(SensorState::from_vector(xp), Vec6::Zero(), dt).to_vector();
    const Vec12 fm =
        propagate_mean(SensorState::from_vector(xm), Vec6::Zero(), dt).to_vector();
    f.col(i) = (fp - fm) / (2.0 * kFdStep);
  }
  return f;
}

Mat12x6 jacobian_L(const SensorState& s, double dt) {
  Mat12x6 l;
  for (int i = 0; i < 6; ++i) {
    Vec6 wp = Vec6::Zero();
    Vec6 wm = Vec6::Zero();
    wp[i] += kFdStep;
    wm[i] -= kFdStep;
    const Vec12 fp = propagate_mean(s, wp, dt).to_vector();
    const Vec12 fm = propagate_mean(s, wm, dt).to_vector();
    l.col(i) = (fp - fm) / (2.0 * kFdStep);
  }
  return l;
}

Belief predict(const Belief& b, double dt, const ProcessNoise& q) {
  if (dt < 0) {
    throw Error("predict: negative time step");
  }
  if (dt == 0) {
    return b;
  }
  Belief out;
  out.mean = propagate_mean(b.mean, Vec6::Zero(), dt);
  const Mat12 f = jacobian_F(b.mean, dt);
  const Mat12x6 l = jacobian_L(b.mean, dt);
  out.cov = f * b.cov * f.transpose() + l * (q.rate * dt) * l.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

std::variant<Innovation, SkipReason> innovate(
    const Event& e, const Belief& b, const TimeSurface& ts,
    const MeasurementContext& ctx, const ContrastModel& model,
    std::optional<MeasurementNoise> noise) {
  const auto t_prev = ts.last_time(e.x, e.y);
  if (!t_prev) {
    return SkipReason::NoPriorEvent;
  }
  const double dt = e.t - *t_prev;
  const double r_var = noise ? noise->variance : model.variance();

  Innovation inn;
  inn.R = r_var;
  try {
    const RenderedView nominal = render_event_patch(e.x, e.y, b.mean.pose(), ctx);
    inn.nu = -(absolute_contrast_in_view(e, b.mean, nominal, ctx.k, dt) -
               model.threshold);

    const Vec12 x0 = b.mean.to_vector();
    for (int i = 0; i < 12; ++i) {
      Vec12 xp = x0;
      Vec12 xm = x0;
      xp[i] += kFdStep;
      xm[i] -= kFdStep;
      const SensorState sp = SensorState::from_vector(xp);
      const SensorState sm = SensorState::from_vector(xm);
      double qp, qm;
      if (i < 6) {
        // pose components move the rendered patch, so re-render per side
        const RenderedView vp = render_event_patch(e.x, e.y, sp.pose(), ctx);
        const RenderedView vm = render_event_patch(e.x, e.y, sm.pose(), ctx);
        qp = absolute_contrast_in_view(e, sp, vp, ctx.k, dt);
        qm = absolute_contrast_in_view(e, sm, vm, ctx.k, dt);
      } else {
        // velocity components leave the rendering untouched
        qp = absolute_contrast_in_view(e, sp, nominal, ctx.k, dt);
        qm = absolute_contrast_in_view(e, sm, nominal, ctx.k, dt);
      }
      inn.H(0, i) = (qp - qm) / (2.0 * kFdStep);
    }
  } catch (const OutsideMap&) {
    return SkipReason::OffMap;
  } catch (const InsufficientSupport&) {
    return SkipReason::OffMap;
  } catch (const NoVisiblePixels&) {
    return SkipReason::OffMap;
  } catch (const BehindCamera&) {
    return SkipReason::OffMap;
  } catch (const RayParallelToPlane&) {
    return SkipReason::OffMap;
  }
  inn.S = (inn.H * b.cov * inn.H.transpose())(0, 0) + r_var;
  return inn;
}

Belief correct(const Belief& b, const Innovation& innovation) {
  if (innovation.S < 1e-15) {
    throw DegenerateInnovationCovariance("correct: innovation variance below 1e-15");
  }
  const Vec12 gain = b.cov * innovation.H.transpose() / innovation.S;

  Belief out;
  SensorState mean =
      SensorState::from_vector(b.mean.to_vector() + gain * innovation.nu);
  mean.r = canonicalize_rotation(mean.r);
  out.mean = mean;

  const Mat12 a = Mat12::Identity() - gain * innovation.H;
  out.cov = a * b.cov * a.transpose() +
            gain * innovation.R * gain.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

RunReport process_stream(const EventStream& stream, const Belief& b0, double t0,
                         const MeasurementContext& ctx, const ContrastModel& model,
                         const FilterConfig& config, const StepObserver& observer) {
  for (std::size_t i = 1; i < stream.events.size(); ++i) {
    if (stream.events[i].t < stream.events[i - 1].t) {
      throw DataError("process_stream: events not in time order");
    }
  }
  if (!stream.events.empty() && stream.events.front().t < t0) {
    throw DataError("process_stream: stream starts before the initial belief");
  }

  RunReport report;
  report.n_events = stream.events.size();

  TimeSurface ts(stream.width, stream.height);
  Belief belief = b0;
  double t_cur = t0;
  std::size_t seen = 0;

  report.snapshots.push_back(Snapshot{t0, b0, 0, 0});

  const std::size_t packet = std::max<std::size_t>(1, config.packet_size);
  const std::size_t stride = std::max<std::size_t>(1, config.snapshot_stride);

  auto skipped_total = [&] {
    return report.n_skipped_no_prior + report.n_skipped_off_map;
  };
  auto check_abort = [&] {
    if (seen >= config.skip_check_min_events &&
        static_cast<double>(skipped_total()) >
            config.skip_abort_fraction * static_cast<double>(seen)) {
      throw FilterDivergence(
          "process_stream: " + std::to_string(skipped_total()) + " of " +
          std::to_string(seen) + " events skipped; run looks misconfigured");
    }
  };

  for (std::size_t base = 0; base < stream.events.size(); base += packet) {
    const std::size_t end = std::min(stream.events.size(), base + packet);
    belief = predict(belief, stream.events[base].t - t_cur, config.process_noise);
    t_cur = stream.events[base].t;

    for (std::size_t i = base; i < end; ++i) {
      const Event& e = stream.events[i];
      const auto result =
          innovate(e, belief, ts, ctx, model, config.measurement_noise);
      if (std::holds_alternative<Innovation>(result)) {
        const Innovation& inn = std::get<Innovation>(result);
        Belief corrected = correct(belief, inn);
        ++report.n_processed;
        if (observer) {
          observer(StepRecord{&e, &belief, &corrected, &inn, std::nullopt});
        }
        belief = std::move(corrected);
      } else {
        const SkipReason reason = std::get<SkipReason>(result);
        if (reason == SkipReason::NoPriorEvent) {
          ++report.n_skipped_no_prior;
        } else {
          ++report.n_skipped_off_map;
        }
        if (observer) {
          observer(StepRecord{&e, &belief, &belief, nullptr, reason});
        }
      }
      ts.update(e);
      ++seen;
      if (seen % stride == 0) {
        report.snapshots.push_back(Snapshot{e.t, belief, seen, skipped_total()});
      }
      if (seen % 1000 == 0) {
        check_abort();
      }
    }
  }
  check_abort();

  if (report.snapshots.back().events_seen != seen) {
    const double t_last = stream.events.empty() ? t0 : stream.events.back().t;
    report.snapshots.push_back(Snapshot{t_last, belief, seen, skipped_total()});
  }
  return report;
}

}  // namespace evekf
