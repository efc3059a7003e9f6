#pragma once

#include <optional>
#include <vector>

#include "evekf/errors.hpp"
#include "evekf/event_model.hpp"

namespace evekf {

/// Per-pixel timestamp of the most recent event.
class TimeSurface {
 public:
  TimeSurface(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }

  /// Timestamp of the last event at (x, y), or nullopt if none yet.
  std::optional<double> last_time(int x, int y) const;

  /// Records an event and returns the elapsed time since the previous event
  /// at the same pixel (nullopt for the first one). Throws
  /// NonMonotoneTimestamp if the event predates the stored timestamp.
  std::optional<double> update(const Event& e);

 private:
  int width_;
  int height_;
  std::vector<double> last_;  // NaN marks "no event yet"
};

/// Free-function form of TimeSurface::update.
std::optional<double> time_surface_update(TimeSurface& ts, const Event& e);

}  // namespace evekf
