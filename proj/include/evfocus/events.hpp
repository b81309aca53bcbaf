#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace evfocus {

/// A single brightness-change event. Sensor events sit on integer pixels;
/// ideal synthetic events may carry sub-pixel positions. Polarity is kept for
/// I/O but never used by accumulation.
struct Event {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  bool polarity = false;

  bool operator==(const Event&) const = default;

  /// Pixel the event belongs to.
  [[nodiscard]] int px() const noexcept { return static_cast<int>(std::floor(x + 0.5)); }
  [[nodiscard]] int py() const noexcept { return static_cast<int>(std::floor(y + 0.5)); }
};

/// A contiguous slice of the stream. t_ref is the last event timestamp.
struct EventWindow {
  std::vector<Event> events;
  double t_ref = 0.0;
  double t_span = 0.0;

  [[nodiscard]] std::size_t size() const noexcept { return events.size(); }
  [[nodiscard]] bool empty() const noexcept { return events.empty(); }
  [[nodiscard]] double t_begin() const noexcept { return events.empty() ? t_ref : events.front().t; }
};

struct WindowPolicy {
  std::size_t max_count = 80000;
  double max_interval = 0.2;
};

/// Builds a window from an already ordered event sequence.
inline EventWindow make_window(std::vector<Event> events) {
  EventWindow window;
  if (!events.empty()) {
    window.t_ref = events.back().t;
    window.t_span = events.back().t - events.front().t;
  }
  window.events = std::move(events);
  return window;
}

/// Throws if timestamps ever decrease; the message names the first offending index.
inline void check_monotone(std::span<const Event> stream) {
  for (std::size_t i = 1; i < stream.size(); ++i) {
    if (stream[i].t < stream[i - 1].t) {
      throw std::invalid_argument("event timestamps decrease at index " + std::to_string(i) + " (t=" +
                                  std::to_string(stream[i].t) + " < " + std::to_string(stream[i - 1].t) + ")");
    }
  }
}

/// Throws if any event's pixel lies outside a width x height sensor.
inline void check_bounds(std::span<const Event> stream, int width, int height) {
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const int x = stream[i].px();
    const int y = stream[i].py();
    if (!std::isfinite(stream[i].x) || !std::isfinite(stream[i].y) || x < 0 || y < 0 || x >= width || y >= height) {
      throw std::invalid_argument("event " + std::to_string(i) + " at (" + std::to_string(stream[i].x) + ", " +
                                  std::to_string(stream[i].y) + ") lies outside the " + std::to_string(width) +
                                  "x" + std::to_string(height) + " sensor");
    }
  }
}

/// Splits a stream into contiguous, non-overlapping windows. A window closes
/// as soon as adding the next event would exceed either max_count events or
/// max_interval seconds measured from the window's first event.
inline std::vector<EventWindow> form_windows(std::span<const Event> stream, const WindowPolicy& policy) {
  if (policy.max_count < 1) throw std::invalid_argument("max_count must be at least 1");
  if (!(policy.max_interval > 0.0)) throw std::invalid_argument("max_interval must be positive");
  check_monotone(stream);

  std::vector<EventWindow> windows;
  std::size_t begin = 0;
  while (begin < stream.size()) {
    const double t_first = stream[begin].t;
    std::size_t end = begin + 1;
    while (end < stream.size() && end - begin < policy.max_count &&
           stream[end].t - t_first <= policy.max_interval) {
      ++end;
    }
    windows.push_back(make_window({stream.begin() + static_cast<std::ptrdiff_t>(begin),
                                   stream.begin() + static_cast<std::ptrdiff_t>(end)}));
    begin = end;
  }
  return windows;
}

}  // namespace evfocus
