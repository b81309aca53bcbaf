#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

#include "evfocus/costvol.hpp"
#include "evfocus/grid.hpp"

namespace evfocus {

struct MetricReport {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  /// Mean |p - g| over pixels with g <= 10/20/30 m; NaN when none qualify.
  double cutoff_10m = 0.0;
  double cutoff_20m = 0.0;
  double cutoff_30m = 0.0;
  double epe = 0.0;
  std::size_t pixels = 0;
  /// Evaluated pixels left out of rmse_log for a non-positive prediction.
  std::size_t nonpositive = 0;
};

/// Depth metrics over the pixels valid in both maps with truth in (0, max_depth].
///
/// `pred_valid` marks usable predictions; without it every finite prediction
/// counts. Delta thresholds are strict: a ratio of exactly 1.25 fails delta1.
inline MetricReport evaluate(const Image& pred, const Image& truth, double max_depth,
                             const Grid<std::uint8_t>* pred_valid = nullptr) {
  if (pred.width() != truth.width() || pred.height() != truth.height()) {
    throw std::invalid_argument("prediction is " + std::to_string(pred.width()) + "x" +
                                std::to_string(pred.height()) + " but truth is " + std::to_string(truth.width()) +
                                "x" + std::to_string(truth.height()));
  }
  if (pred_valid && (pred_valid->width() != pred.width() || pred_valid->height() != pred.height())) {
    throw std::invalid_argument("validity mask does not match the prediction");
  }
  if (!(max_depth > 0.0)) throw std::invalid_argument("max depth must be positive");

  MetricReport r;
  double abs_rel = 0.0, sq_rel = 0.0, sq = 0.0, sq_log = 0.0, abs_err = 0.0;
  std::size_t d1 = 0, d2 = 0, d3 = 0, log_count = 0;
  double cut_sum[3] = {0.0, 0.0, 0.0};
  std::size_t cut_count[3] = {0, 0, 0};
  constexpr double kCutoffs[3] = {10.0, 20.0, 30.0};
  const double t1 = 1.25, t2 = t1 * t1, t3 = t2 * t1;

  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) {
      const double p = pred(x, y);
      const double g = truth(x, y);
      if (pred_valid && !(*pred_valid)(x, y)) continue;
      if (!std::isfinite(p) || !std::isfinite(g) || !(g > 0.0) || g > max_depth) continue;
      ++r.pixels;
      const double diff = p - g;
      abs_rel += std::abs(diff) / g;
      sq_rel += diff * diff / g;
      sq += diff * diff;
      abs_err += std::abs(diff);
      if (p > 0.0) {
        const double l = std::log(p) - std::log(g);
        sq_log += l * l;
        ++log_count;
        const double ratio = std::max(p / g, g / p);
        d1 += ratio < t1;
        d2 += ratio < t2;
        d3 += ratio < t3;
      } else {
        ++r.nonpositive;
      }
      for (int c = 0; c < 3; ++c) {
        if (g <= kCutoffs[c]) {
          cut_sum[c] += std::abs(diff);
          ++cut_count[c];
        }
      }
    }
  }
  if (r.pixels == 0) throw std::invalid_argument("prediction and truth share no valid pixels");

  const auto n = static_cast<double>(r.pixels);
  r.abs_rel = abs_rel / n;
  r.sq_rel = sq_rel / n;
  r.rmse = std::sqrt(sq / n);
  r.rmse_log = log_count ? std::sqrt(sq_log / static_cast<double>(log_count)) : 0.0;
  r.delta1 = static_cast<double>(d1) / n;
  r.delta2 = static_cast<double>(d2) / n;
  r.delta3 = static_cast<double>(d3) / n;
  r.epe = abs_err / n;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.cutoff_10m = cut_count[0] ? cut_sum[0] / static_cast<double>(cut_count[0]) : nan;
  r.cutoff_20m = cut_count[1] ? cut_sum[1] / static_cast<double>(cut_count[1]) : nan;
  r.cutoff_30m = cut_count[2] ? cut_sum[2] / static_cast<double>(cut_count[2]) : nan;
  return r;
}

/// Measured and filled pixels of a depth map count as predictions.
inline MetricReport evaluate(const DepthMap& pred, const Image& truth, double max_depth) {
  Grid<std::uint8_t> valid(pred.width(), pred.height(), 0);
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) valid(x, y) = pred.has_depth(x, y);
  }
  return evaluate(pred.depth, truth, max_depth, &valid);
}

}  // namespace evfocus
