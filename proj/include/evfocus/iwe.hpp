#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "evfocus/grid.hpp"
#include "evfocus/motion.hpp"

namespace evfocus {

enum class SplatMode { Nearest, Bilinear };

inline SplatMode parse_splat(std::string_view name) {
  if (name == "nearest") return SplatMode::Nearest;
  if (name == "bilinear") return SplatMode::Bilinear;
  throw std::invalid_argument("unknown splat mode '" + std::string(name) + "'");
}

/// Image of warped events: event mass per pixel for one depth hypothesis.
struct Iwe {
  Image grid;
  double depth = 0.0;
  std::size_t discarded = 0;
  /// Weighted sum of (t - t_ref) per pixel; empty unless timestamps were given.
  Image time_sum;

  [[nodiscard]] int width() const noexcept { return grid.width(); }
  [[nodiscard]] int height() const noexcept { return grid.height(); }
};

/// Splats each warped event with unit mass. Events outside the sensor are
/// dropped whole and counted in Iwe::discarded. For bilinear splatting an
/// event is in bounds when 0 <= x <= width-1 and 0 <= y <= height-1; for
/// nearest splatting when its rounded pixel is on the sensor.
inline Iwe accumulate(std::span<const WarpedEvent> warped, int width, int height, SplatMode splat,
                      std::span<const double> offsets = {}) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("IWE resolution must be positive");
  if (!offsets.empty() && offsets.size() != warped.size()) {
    throw std::invalid_argument("timestamp offsets must match the warped events");
  }
  const bool timed = !offsets.empty();

  Iwe iwe;
  iwe.grid = Image(width, height);
  if (timed) iwe.time_sum = Image(width, height);

  auto deposit = [&](int x, int y, double w, std::size_t i) {
    iwe.grid(x, y) += w;
    if (timed) iwe.time_sum(x, y) += w * offsets[i];
  };

  for (std::size_t i = 0; i < warped.size(); ++i) {
    const double x = warped[i].x;
    const double y = warped[i].y;
    if (splat == SplatMode::Nearest) {
      const double rx = std::floor(x + 0.5);
      const double ry = std::floor(y + 0.5);
      if (!(rx >= 0.0 && ry >= 0.0 && rx < width && ry < height)) {
        ++iwe.discarded;
        continue;
      }
      deposit(static_cast<int>(rx), static_cast<int>(ry), 1.0, i);
      continue;
    }

    if (!(x >= 0.0 && y >= 0.0 && x <= width - 1 && y <= height - 1)) {
      ++iwe.discarded;
      continue;
    }
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double ax = x - x0;
    const double ay = y - y0;
    deposit(x0, y0, (1.0 - ax) * (1.0 - ay), i);
    if (ax > 0.0) deposit(x0 + 1, y0, ax * (1.0 - ay), i);
    if (ay > 0.0) deposit(x0, y0 + 1, (1.0 - ax) * ay, i);
    if (ax > 0.0 && ay > 0.0) deposit(x0 + 1, y0 + 1, ax * ay, i);
  }
  return iwe;
}

/// Levels 0..K-1, each half the resolution of the one before.
struct IwePyramid {
  std::vector<Iwe> levels;

  [[nodiscard]] std::size_t size() const noexcept { return levels.size(); }
  const Iwe& operator[](std::size_t k) const { return levels[k]; }
};

/// Coarse pixel that a fine pixel folds into: 2x2 blocks, with an odd
/// trailing row or column absorbed by the last block.
inline int coarse_index(int fine, int coarse_extent) { return std::min(fine / 2, coarse_extent - 1); }

inline Image block_sum(const Image& fine) {
  const int w = std::max(1, fine.width() / 2);
  const int h = std::max(1, fine.height() / 2);
  Image coarse(w, h);
  for (int y = 0; y < fine.height(); ++y) {
    const int cy = coarse_index(y, h);
    for (int x = 0; x < fine.width(); ++x) coarse(coarse_index(x, w), cy) += fine(x, y);
  }
  return coarse;
}

inline IwePyramid build_pyramid(const Iwe& base, int num_scales) {
  if (num_scales < 1) throw std::invalid_argument("num_scales must be at least 1");
  const int needed = 1 << (num_scales - 1);
  if (base.width() < needed || base.height() < needed) {
    throw std::invalid_argument("IWE of " + std::to_string(base.width()) + "x" + std::to_string(base.height()) +
                                " is too small for " + std::to_string(num_scales) + " scales");
  }
  IwePyramid pyramid;
  pyramid.levels.reserve(static_cast<std::size_t>(num_scales));
  pyramid.levels.push_back(base);
  for (int k = 1; k < num_scales; ++k) {
    const Iwe& finer = pyramid.levels.back();
    Iwe coarser;
    coarser.depth = base.depth;
    coarser.discarded = base.discarded;
    coarser.grid = block_sum(finer.grid);
    if (!finer.time_sum.empty()) coarser.time_sum = block_sum(finer.time_sum);
    pyramid.levels.push_back(std::move(coarser));
  }
  return pyramid;
}

}  // namespace evfocus
