#include "evekf/time_surface.hpp"

#include <cmath>
#include <limits>

namespace evekf {

TimeSurface::TimeSurface(int width, int height)
    : width_(width), height_(height),
      last_(static_cast<std::size_t>(width) * height,
            std::numeric_limits<double>::quiet_NaN()) {
  if (width <= 0 || height <= 0) {
    throw Error("TimeSurface: non-positive dimensions");
  }
}

std::optional<double> TimeSurface::last_time(int x, int y) const {
  if (x < 0 || x >= width_ || y < 0 || y >= height_) {
    throw Error("TimeSurface: pixel outside the sensor");
  }
  const double t = last_[static_cast<std::size_t>(y) * width_ + x];
  if (std::isnan(t)) {
    return std::nullopt;
  }
  return t;
}

std::optional<double> TimeSurface::update(const Event& e) {
  const auto prev = last_time(e.x, e.y);
  if (prev && e.t < *prev) {
    throw NonMonotoneTimestamp("TimeSurface::update: event predates stored timestamp");
  }
  last_[static_cast<std::size_t>(e.y) * width_ + e.x] = e.t;
  if (!prev) {
    return std::nullopt;
  }
  return e.t - *prev;
}

std::optional<double> time_surface_update(TimeSurface& ts, const Event& e) {
  return ts.update(e);
}

}  // namespace evekf
