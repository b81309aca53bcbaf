#pragma once

#include <chrono>
#include <stdexcept>
#include <vector>

#include "evfocus/costvol.hpp"

namespace evfocus {

struct PipelineConfig {
  SweepConfig sweep;
  /// One weight per scale; empty means equal weights.
  std::vector<double> scale_weights;
  int trend_iterations = 4;
  double peak_alpha = 0.7;
  double min_support = 0.5;
  FillPolicy fill = FillPolicy::None;

  [[nodiscard]] std::vector<double> weights() const {
    if (scale_weights.empty()) return std::vector<double>(static_cast<std::size_t>(sweep.num_scales), 1.0);
    return scale_weights;
  }

  void validate() const {
    sweep.objective.validate();
    if (sweep.num_scales < 1) throw std::invalid_argument("need at least one scale");
    if (!scale_weights.empty() && scale_weights.size() != static_cast<std::size_t>(sweep.num_scales)) {
      throw std::invalid_argument("expected " + std::to_string(sweep.num_scales) + " scale weights, got " +
                                  std::to_string(scale_weights.size()));
    }
    if (trend_iterations < 0) throw std::invalid_argument("trend iterations must be non-negative");
    if (!(peak_alpha >= 0.0 && peak_alpha <= 1.0)) throw std::invalid_argument("peak alpha must lie in [0, 1]");
    if (!(min_support >= 0.0)) throw std::invalid_argument("min support must be non-negative");
  }
};

struct WindowTiming {
  double sweep_seconds = 0.0;
  double aggregate_seconds = 0.0;
  double extract_seconds = 0.0;
};

struct WindowResult {
  Sweep sweep;
  /// Trend-filtered, fused volume that depth is read from.
  CostVolume fused;
  DepthMap depth;
  WindowTiming timing;
};

/// Sweep, per-scale trend filtering, multi-scale fusion, extraction and fill
/// for a single window.
inline WindowResult estimate_depth(const EventWindow& window, const CameraIntrinsics& cam,
                                   const VelocitySample& velocity, const HypothesisSet& hyps,
                                   const PipelineConfig& config, unsigned workers = 1) {
  config.validate();
  using Clock = std::chrono::steady_clock;
  auto seconds_since = [](Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
  };

  WindowResult result;
  auto start = Clock::now();
  result.sweep = build_volume(window, cam, velocity, hyps, config.sweep, workers);
  result.timing.sweep_seconds = seconds_since(start);

  start = Clock::now();
  std::vector<CostVolume> filtered;
  filtered.reserve(result.sweep.scales.size());
  for (const CostVolume& v : result.sweep.scales) {
    filtered.push_back(trend_filter(v, config.trend_iterations, config.peak_alpha, workers));
  }
  const std::vector<double> weights = config.weights();
  result.fused = multiscale_fuse(filtered, weights, workers);
  result.timing.aggregate_seconds = seconds_since(start);

  start = Clock::now();
  result.depth = fill_depth(extract_depth(result.fused, result.sweep.support, config.min_support, workers), config.fill);
  result.timing.extract_seconds = seconds_since(start);
  return result;
}

}  // namespace evfocus
