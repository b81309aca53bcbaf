#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evfocus/events.hpp"
#include "evfocus/focus.hpp"
#include "evfocus/grid.hpp"
#include "evfocus/iwe.hpp"
#include "evfocus/motion.hpp"
#include "evfocus/parallel.hpp"

namespace evfocus {

enum class Sampling { InverseDepth, Linear };

inline Sampling parse_sampling(std::string_view name) {
  if (name == "inverse") return Sampling::InverseDepth;
  if (name == "linear") return Sampling::Linear;
  throw std::invalid_argument("unknown hypothesis sampling '" + std::string(name) + "'");
}

/// Candidate metric depths, strictly increasing.
struct HypothesisSet {
  std::vector<double> depths;
  Sampling sampling = Sampling::InverseDepth;
  double dmin = 0.0;
  double dmax = 0.0;

  [[nodiscard]] std::size_t size() const noexcept { return depths.size(); }
  [[nodiscard]] double operator[](std::size_t i) const { return depths[i]; }

  /// Inverse depth at fractional index `pos`, linear between neighbours.
  [[nodiscard]] double inverse_at(double pos) const {
    const auto last = static_cast<double>(depths.size() - 1);
    pos = std::clamp(pos, 0.0, last);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    if (i + 1 >= depths.size()) return 1.0 / depths.back();
    const double a = pos - static_cast<double>(i);
    return (1.0 - a) / depths[i] + a / depths[i + 1];
  }

  /// Index of the hypothesis nearest to `depth` in inverse depth.
  [[nodiscard]] std::size_t nearest(double depth) const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < depths.size(); ++i) {
      if (std::abs(1.0 / depths[i] - 1.0 / depth) < std::abs(1.0 / depths[best] - 1.0 / depth)) best = i;
    }
    return best;
  }

  static HypothesisSet make(double dmin, double dmax, std::size_t count, Sampling sampling = Sampling::InverseDepth) {
    if (!(dmin > 0.0) || !std::isfinite(dmax)) throw std::invalid_argument("depth range must be positive and finite");
    if (count < 1) throw std::invalid_argument("need at least one depth hypothesis");
    if (count > 1 && !(dmax > dmin)) throw std::invalid_argument("dmax must exceed dmin");
    HypothesisSet set;
    set.sampling = sampling;
    set.dmin = dmin;
    set.dmax = count == 1 ? dmin : dmax;
    if (count == 1) {
      set.depths = {sampling == Sampling::InverseDepth ? 2.0 / (1.0 / dmin + 1.0 / dmax) : 0.5 * (dmin + dmax)};
      set.dmin = set.dmax = set.depths.front();
      return set;
    }
    set.depths.resize(count);
    const double last = static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) {
      const double a = static_cast<double>(i) / last;
      set.depths[i] = sampling == Sampling::InverseDepth ? 1.0 / ((1.0 - a) / dmin + a / dmax)
                                                         : (1.0 - a) * dmin + a * dmax;
    }
    set.depths.front() = dmin;
    set.depths.back() = dmax;
    return set;
  }
};

/// Focus scores over hypotheses (higher = better), laid out [d][y][x].
struct CostVolume {
  HypothesisSet hypotheses;
  int width = 0;
  int height = 0;
  std::vector<double> scores;

  CostVolume() = default;
  CostVolume(HypothesisSet hyps, int w, int h)
    : hypotheses(std::move(hyps)), width(w), height(h),
      scores(hypotheses.size() * static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0.0) {}

  [[nodiscard]] std::size_t depth_count() const noexcept { return hypotheses.size(); }
  [[nodiscard]] std::size_t plane() const noexcept {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  double& at(std::size_t d, int x, int y) {
    return scores[d * plane() + static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + x];
  }
  [[nodiscard]] double at(std::size_t d, int x, int y) const {
    return scores[d * plane() + static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + x];
  }
  [[nodiscard]] std::vector<double> curve(int x, int y) const {
    std::vector<double> out(depth_count());
    for (std::size_t d = 0; d < out.size(); ++d) out[d] = at(d, x, y);
    return out;
  }
  void set_curve(int x, int y, std::span<const double> values) {
    for (std::size_t d = 0; d < values.size(); ++d) at(d, x, y) = values[d];
  }
  void set_slice(std::size_t d, const Image& img) {
    std::copy(img.data().begin(), img.data().end(), scores.begin() + static_cast<std::ptrdiff_t>(d * plane()));
  }
};

struct SweepConfig {
  ObjectiveParams objective;
  SplatMode splat = SplatMode::Bilinear;
  int num_scales = 1;
};

/// Everything one sweep over the hypotheses produces.
struct Sweep {
  /// One volume per pyramid scale, finest first.
  std::vector<CostVolume> scales;
  /// Event mass inside the scoring window at full resolution, per hypothesis.
  CostVolume support;
  std::vector<std::size_t> discarded;
  std::vector<double> objective_values;
};

/// Warps, accumulates and scores the window under every hypothesis.
/// Hypotheses are distributed over `workers` threads; each one is computed
/// start to finish by a single thread, so results do not depend on the
/// worker count.
inline Sweep build_volume(const EventWindow& window, const CameraIntrinsics& cam, const VelocitySample& velocity,
                          const HypothesisSet& hyps, const SweepConfig& config, unsigned workers = 1) {
  cam.validate();
  config.objective.validate();
  if (hyps.size() == 0) throw std::invalid_argument("hypothesis set is empty");
  check_bounds(window.events, cam.width, cam.height);

  const std::size_t depth_count = hyps.size();
  Sweep sweep;
  sweep.discarded.assign(depth_count, 0);
  sweep.objective_values.assign(depth_count, 0.0);
  sweep.support = CostVolume(hyps, cam.width, cam.height);

  // Level sizes follow the pyramid's folding rule.
  {
    int w = cam.width;
    int h = cam.height;
    for (int k = 0; k < config.num_scales; ++k) {
      sweep.scales.emplace_back(hyps, w, h);
      w = std::max(1, w / 2);
      h = std::max(1, h / 2);
    }
  }

  const bool timed = config.objective.kind == ObjectiveKind::Sti;
  std::vector<double> offsets;
  if (timed) {
    offsets.reserve(window.size());
    for (const Event& e : window.events) offsets.push_back(e.t - window.t_ref);
  }
  const double t_span = window.t_ref - window.t_begin();

  parallel_for(depth_count, workers, [&](std::size_t d) {
    const FlowField flow = motion_field(cam, velocity, hyps[d]);
    const std::vector<WarpedEvent> warped = warp_events(window, flow);
    Iwe iwe = accumulate(warped, cam.width, cam.height, config.splat, offsets);
    iwe.depth = hyps[d];
    sweep.discarded[d] = iwe.discarded;
    sweep.support.set_slice(d, box_sum(iwe.grid, config.objective.window));

    const IwePyramid pyramid = build_pyramid(iwe, config.num_scales);
    for (std::size_t k = 0; k < pyramid.size(); ++k) {
      ObjectiveResult scored = objective(pyramid[k], config.objective, t_span);
      if (k == 0) sweep.objective_values[d] = scored.value;
      sweep.scales[k].set_slice(d, scored.map);
    }
  });
  return sweep;
}

/// Number of strict local maxima along a curve; end samples count when they
/// exceed their only neighbour.
inline std::size_t count_strict_maxima(std::span<const double> curve) {
  const std::size_t n = curve.size();
  if (n < 2) return n;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool above_left = i == 0 || curve[i] > curve[i - 1];
    const bool above_right = i + 1 == n || curve[i] > curve[i + 1];
    if (above_left && above_right) ++count;
  }
  return count;
}

/// Trend filtering of one curve: `iterations` passes of the (1,2,1)/4
/// kernel with replicated ends, then one pass replacing every strict local
/// maximum below alpha * max by the mean of its neighbours.
inline void trend_filter_curve(std::vector<double>& curve, int iterations, double alpha) {
  const std::size_t n = curve.size();
  if (n < 2) return;
  std::vector<double> prev(n);
  for (int it = 0; it < iterations; ++it) {
    prev = curve;
    for (std::size_t i = 0; i < n; ++i) {
      const double left = prev[i == 0 ? 0 : i - 1];
      const double right = prev[i + 1 == n ? n - 1 : i + 1];
      curve[i] = 0.25 * left + 0.5 * prev[i] + 0.25 * right;
    }
  }
  if (alpha <= 0.0) return;

  prev = curve;
  const double peak = *std::max_element(prev.begin(), prev.end());
  for (std::size_t i = 0; i < n; ++i) {
    const bool above_left = i == 0 || prev[i] > prev[i - 1];
    const bool above_right = i + 1 == n || prev[i] > prev[i + 1];
    if (!(above_left && above_right) || !(prev[i] < alpha * peak)) continue;
    if (i == 0) {
      curve[i] = prev[1];
    } else if (i + 1 == n) {
      curve[i] = prev[n - 2];
    } else {
      curve[i] = 0.5 * (prev[i - 1] + prev[i + 1]);
    }
  }
}

inline CostVolume trend_filter(CostVolume volume, int iterations, double alpha = 0.7, unsigned workers = 1) {
  if (iterations < 0) throw std::invalid_argument("trend iterations must be non-negative");
  parallel_for(static_cast<std::size_t>(volume.height), workers, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    std::vector<double> curve;
    for (int x = 0; x < volume.width; ++x) {
      curve = volume.curve(x, y);
      trend_filter_curve(curve, iterations, alpha);
      volume.set_curve(x, y, curve);
    }
  });
  return volume;
}

/// Weighted fusion of per-scale volumes at full resolution. Every pixel curve
/// is divided by its maximum first, and coarser volumes are upsampled by
/// nearest neighbour along the pyramid's folding rule.
inline CostVolume multiscale_fuse(std::span<const CostVolume> volumes, std::span<const double> weights,
                                  unsigned workers = 1) {
  if (volumes.empty()) throw std::invalid_argument("no volumes to fuse");
  if (weights.size() != volumes.size()) throw std::invalid_argument("need one weight per scale");
  double weight_sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("scale weights must be non-negative");
    weight_sum += w;
  }
  if (!(weight_sum > 0.0)) throw std::invalid_argument("scale weights must not all be zero");
  const CostVolume& base = volumes.front();
  for (const CostVolume& v : volumes) {
    if (v.hypotheses.depths != base.hypotheses.depths) {
      throw std::invalid_argument("scales were built from different hypothesis sets");
    }
  }

  const std::size_t depth_count = base.depth_count();
  CostVolume fused(base.hypotheses, base.width, base.height);

  // Per scale, the coarse column/row that each full-resolution one folds
  // into; the fold depth follows from the volume's size.
  auto fold_map = [](int full, int target) {
    std::vector<int> map(static_cast<std::size_t>(full));
    for (int i = 0; i < full; ++i) {
      int c = i;
      int extent = full;
      while (extent > target) {
        extent = std::max(1, extent / 2);
        c = coarse_index(c, extent);
      }
      if (extent != target) throw std::invalid_argument("scale volume size does not follow the pyramid");
      map[static_cast<std::size_t>(i)] = c;
    }
    return map;
  };
  std::vector<std::vector<int>> col_map;
  std::vector<std::vector<int>> row_map;
  for (const CostVolume& v : volumes) {
    col_map.push_back(fold_map(base.width, v.width));
    row_map.push_back(fold_map(base.height, v.height));
  }

  parallel_for(static_cast<std::size_t>(base.height), workers, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    std::vector<double> acc(depth_count);
    for (int x = 0; x < base.width; ++x) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t k = 0; k < volumes.size(); ++k) {
        if (weights[k] == 0.0) continue;
        const int cx = col_map[k][static_cast<std::size_t>(x)];
        const int cy = row_map[k][static_cast<std::size_t>(y)];
        double peak = 0.0;
        for (std::size_t d = 0; d < depth_count; ++d) peak = std::max(peak, volumes[k].at(d, cx, cy));
        const double scale = peak > 0.0 ? weights[k] / peak : weights[k];
        for (std::size_t d = 0; d < depth_count; ++d) acc[d] += scale * volumes[k].at(d, cx, cy);
      }
      for (std::size_t d = 0; d < depth_count; ++d) fused.at(d, x, y) = acc[d] / weight_sum;
    }
  });
  return fused;
}

enum class PixelState : std::uint8_t { Invalid = 0, Measured = 1, Filled = 2 };

struct DepthMap {
  static constexpr double kInvalidDepth = -1.0;

  Image depth;
  Grid<PixelState> state;
  Image confidence;

  DepthMap() = default;
  DepthMap(int w, int h) : depth(w, h, kInvalidDepth), state(w, h, PixelState::Invalid), confidence(w, h, 0.0) {}

  [[nodiscard]] int width() const noexcept { return depth.width(); }
  [[nodiscard]] int height() const noexcept { return depth.height(); }
  [[nodiscard]] bool has_depth(int x, int y) const { return state(x, y) != PixelState::Invalid; }
};

/// Sub-bin offset of a parabola through three samples around a maximum,
/// clamped to [-0.5, 0.5]; 0 when the curvature is not negative.
inline double parabolic_offset(double left, double centre, double right) {
  const double curvature = left - 2.0 * centre + right;
  if (!(curvature < 0.0)) return 0.0;
  return std::clamp((left - right) / (2.0 * curvature), -0.5, 0.5);
}

/// Winner-take-all with parabolic refinement in inverse depth. A pixel is
/// measured when the event mass inside its scoring window at the winning
/// hypothesis reaches `min_support`.
inline DepthMap extract_depth(const CostVolume& volume, const CostVolume& support, double min_support,
                              unsigned workers = 1) {
  if (support.width != volume.width || support.height != volume.height ||
      support.depth_count() != volume.depth_count()) {
    throw std::invalid_argument("support volume does not match the cost volume");
  }
  const std::size_t n = volume.depth_count();
  DepthMap map(volume.width, volume.height);
  parallel_for(static_cast<std::size_t>(volume.height), workers, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < volume.width; ++x) {
      std::size_t best = 0;
      double sum = 0.0;
      for (std::size_t d = 0; d < n; ++d) {
        const double s = volume.at(d, x, y);
        if (!std::isfinite(s)) throw std::invalid_argument("cost volume holds non-finite scores");
        sum += s;
        if (s > volume.at(best, x, y)) best = d;
      }
      const double peak = volume.at(best, x, y);
      const double mean = sum / static_cast<double>(n);
      map.confidence(x, y) = mean > 0.0 ? peak / mean : 1.0;
      if (!(support.at(best, x, y) >= min_support)) continue;

      double offset = 0.0;
      if (best > 0 && best + 1 < n) {
        offset = parabolic_offset(volume.at(best - 1, x, y), peak, volume.at(best + 1, x, y));
      }
      map.depth(x, y) = 1.0 / volume.hypotheses.inverse_at(static_cast<double>(best) + offset);
      map.state(x, y) = PixelState::Measured;
    }
  });
  return map;
}

enum class FillPolicy { None, NearestValid, MedianWindow };

inline FillPolicy parse_fill(std::string_view name) {
  if (name == "none") return FillPolicy::None;
  if (name == "nearest-valid") return FillPolicy::NearestValid;
  if (name == "median-window") return FillPolicy::MedianWindow;
  throw std::invalid_argument("unknown fill policy '" + std::string(name) + "'");
}

/// Fills invalid pixels from measured ones and flags them PixelState::Filled.
/// median-window uses the measured pixels in the (2*radius+1)^2 window and
/// leaves a pixel invalid when there are none.
inline DepthMap fill_depth(const DepthMap& map, FillPolicy policy, int median_radius = 2) {
  if (policy == FillPolicy::None) return map;
  DepthMap out = map;
  const int w = map.width();
  const int h = map.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (map.state(x, y) != PixelState::Invalid) continue;

      if (policy == FillPolicy::NearestValid) {
        long best_d2 = -1;
        double best_depth = 0.0;
        const int max_r = std::max(w, h);
        for (int r = 1; r <= max_r; ++r) {
          if (best_d2 >= 0 && static_cast<long>(r) * r > best_d2) break;
          for (int qy = y - r; qy <= y + r; ++qy) {
            for (int qx = x - r; qx <= x + r; ++qx) {
              if (std::max(std::abs(qx - x), std::abs(qy - y)) != r) continue;
              if (!map.state.contains(qx, qy) || map.state(qx, qy) != PixelState::Measured) continue;
              const long d2 = static_cast<long>(qx - x) * (qx - x) + static_cast<long>(qy - y) * (qy - y);
              if (best_d2 < 0 || d2 < best_d2) {
                best_d2 = d2;
                best_depth = map.depth(qx, qy);
              }
            }
          }
        }
        if (best_d2 < 0) continue;
        out.depth(x, y) = best_depth;
        out.state(x, y) = PixelState::Filled;
        continue;
      }

      std::vector<double> values;
      for (int qy = y - median_radius; qy <= y + median_radius; ++qy) {
        for (int qx = x - median_radius; qx <= x + median_radius; ++qx) {
          if (map.state.contains(qx, qy) && map.state(qx, qy) == PixelState::Measured) {
            values.push_back(map.depth(qx, qy));
          }
        }
      }
      if (values.empty()) continue;
      std::sort(values.begin(), values.end());
      const std::size_t mid = values.size() / 2;
      out.depth(x, y) = values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
      out.state(x, y) = PixelState::Filled;
    }
  }
  return out;
}

}  // namespace evfocus
