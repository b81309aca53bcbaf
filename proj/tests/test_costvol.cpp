#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "evfocus/pipeline.hpp"
#include "scenarios.hpp"

using namespace evfocus;
using evfocus::testing::plane_scene;
using evfocus::testing::sweep_hypotheses;

TEST(Hypotheses, InverseSamplingIsUniformInInverseDepth) {
  const HypothesisSet h = HypothesisSet::make(2.0, 80.0, 64);
  ASSERT_EQ(h.size(), 64u);
  EXPECT_EQ(h[0], 2.0);
  EXPECT_EQ(h[63], 80.0);
  const double step = 1.0 / h[1] - 1.0 / h[0];
  for (std::size_t i = 1; i < h.size(); ++i) {
    EXPECT_GT(h[i], h[i - 1]);
    EXPECT_NEAR(1.0 / h[i] - 1.0 / h[i - 1], step, 1e-12);
  }
}

TEST(Hypotheses, LinearSamplingAndNearest) {
  const HypothesisSet h = HypothesisSet::make(1.0, 5.0, 5, Sampling::Linear);
  EXPECT_EQ(h.depths, (std::vector<double>{1, 2, 3, 4, 5}));
  EXPECT_EQ(h.nearest(2.9), 2u);
  EXPECT_EQ(h.nearest(100.0), 4u);
}

TEST(Hypotheses, RejectsBadRanges) {
  EXPECT_THROW((void)HypothesisSet::make(0.0, 10.0, 4), std::invalid_argument);
  EXPECT_THROW((void)HypothesisSet::make(5.0, 2.0, 4), std::invalid_argument);
  EXPECT_THROW((void)HypothesisSet::make(2.0, 10.0, 0), std::invalid_argument);
  EXPECT_EQ(HypothesisSet::make(2.0, 10.0, 1).size(), 1u);
}

TEST(TrendFilter, IdentityConfiguration) {
  std::vector<double> c{0.3, 1.0, 0.2, 0.8, 0.1};
  const auto before = c;
  trend_filter_curve(c, 0, 0.0);
  EXPECT_EQ(c, before);
}

TEST(TrendFilter, KernelOnAnImpulse) {
  std::vector<double> c{0, 0, 4, 0, 0};
  trend_filter_curve(c, 1, 0.0);
  EXPECT_EQ(c, (std::vector<double>{0, 1, 2, 1, 0}));
}

TEST(TrendFilter, SymmetricUnimodalPeakStays) {
  for (int iters : {1, 2, 5, 20}) {
    std::vector<double> c{0, 1, 3, 7, 9, 7, 3, 1, 0};
    trend_filter_curve(c, iters, 0.7);
    EXPECT_EQ(std::max_element(c.begin(), c.end()) - c.begin(), 4) << iters;
  }
}

TEST(TrendFilter, SuppressesWeakSecondaryPeaks) {
  std::vector<double> c{0, 10, 0, 0, 3, 0, 0};
  trend_filter_curve(c, 0, 0.7);
  EXPECT_EQ(count_strict_maxima(c), 1u);
  EXPECT_EQ(c[1], 10.0);
}

TEST(StrictMaxima, CountsEndsAndPlateaus) {
  EXPECT_EQ(count_strict_maxima(std::vector<double>{3, 1, 2}), 2u);
  EXPECT_EQ(count_strict_maxima(std::vector<double>{1, 2, 2, 1}), 0u);
  EXPECT_EQ(count_strict_maxima(std::vector<double>{1, 3, 2}), 1u);
}

TEST(Fuse, SingleScaleNormalisesEachCurve) {
  CostVolume v(HypothesisSet::make(2, 10, 3), 2, 1);
  v.set_curve(0, 0, std::vector<double>{1, 4, 2});
  v.set_curve(1, 0, std::vector<double>{0, 0, 0});
  const std::vector<CostVolume> one{v};
  const CostVolume f = multiscale_fuse(one, std::vector<double>{1.0});
  EXPECT_EQ(f.curve(0, 0), (std::vector<double>{0.25, 1.0, 0.5}));
  EXPECT_EQ(f.curve(1, 0), (std::vector<double>{0, 0, 0}));
}

TEST(Fuse, IdenticalVolumesAreIdempotent) {
  CostVolume v(HypothesisSet::make(2, 10, 4), 3, 3);
  std::mt19937_64 rng(1);
  for (double& s : v.scores) s = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
  const std::vector<CostVolume> single{v}, twice{v, v};
  const CostVolume a = multiscale_fuse(single, std::vector<double>{1.0});
  const CostVolume b = multiscale_fuse(twice, std::vector<double>{1.0, 1.0});
  for (std::size_t i = 0; i < a.scores.size(); ++i) EXPECT_NEAR(a.scores[i], b.scores[i], 1e-15);
}

TEST(Fuse, CoarseScaleConsistentWithFineIsIdempotent) {
  const HypothesisSet h = HypothesisSet::make(2, 10, 4);
  CostVolume coarse(h, 2, 2), fine(h, 4, 4);
  std::mt19937_64 rng(1);
  for (double& s : coarse.scores) s = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
  for (std::size_t d = 0; d < h.size(); ++d) {
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 4; ++x) fine.at(d, x, y) = coarse.at(d, x / 2, y / 2);
    }
  }
  const std::vector<CostVolume> single{fine}, both{fine, coarse};
  const CostVolume a = multiscale_fuse(single, std::vector<double>{1.0});
  const CostVolume b = multiscale_fuse(both, std::vector<double>{1.0, 3.0});
  for (std::size_t i = 0; i < a.scores.size(); ++i) EXPECT_NEAR(a.scores[i], b.scores[i], 1e-15);
  // A zero weight drops its scale entirely.
  std::vector<CostVolume> noisy{fine, coarse};
  for (double& s : noisy[1].scores) s = 1.0 - s;
  EXPECT_EQ(multiscale_fuse(noisy, std::vector<double>{1.0, 0.0}).scores, a.scores);
}

TEST(Fuse, RejectsMismatchedWeights) {
  const std::vector<CostVolume> one{CostVolume(HypothesisSet::make(2, 10, 2), 2, 2)};
  EXPECT_THROW((void)multiscale_fuse(one, std::vector<double>{1.0, 1.0}), std::invalid_argument);
  EXPECT_THROW((void)multiscale_fuse(one, std::vector<double>{0.0}), std::invalid_argument);
  const std::vector<CostVolume> odd{CostVolume(HypothesisSet::make(2, 10, 2), 8, 8),
                                    CostVolume(HypothesisSet::make(2, 10, 2), 3, 3)};
  EXPECT_THROW((void)multiscale_fuse(odd, std::vector<double>{1.0, 1.0}), std::invalid_argument);
}

TEST(Parabola, Offsets) {
  EXPECT_EQ(parabolic_offset(1, 3, 1), 0.0);
  EXPECT_NEAR(parabolic_offset(1, 3, 2), 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(parabolic_offset(2, 3, 1), -1.0 / 6.0, 1e-15);
  EXPECT_EQ(parabolic_offset(1, 1, 1), 0.0);
}

TEST(Extract, PixelWithoutSupportIsInvalid) {
  const HypothesisSet h = HypothesisSet::make(2, 10, 3);
  CostVolume v(h, 2, 1), support(h, 2, 1);
  v.set_curve(0, 0, std::vector<double>{1, 3, 2});
  v.set_curve(1, 0, std::vector<double>{1, 3, 2});
  support.set_curve(0, 0, std::vector<double>{0, 1, 0});
  const DepthMap m = extract_depth(v, support, 0.5);
  EXPECT_EQ(m.state(0, 0), PixelState::Measured);
  EXPECT_NEAR(1.0 / m.depth(0, 0), h.inverse_at(1.0 + 1.0 / 6.0), 1e-15);
  EXPECT_EQ(m.state(1, 0), PixelState::Invalid);
  EXPECT_EQ(m.depth(1, 0), DepthMap::kInvalidDepth);
}

TEST(Fill, NoneAndFullMapsAreUnchanged) {
  DepthMap m(3, 3);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) {
      m.depth(x, y) = 1.0 + x + 3 * y;
      m.state(x, y) = PixelState::Measured;
    }
  }
  for (FillPolicy p : {FillPolicy::None, FillPolicy::NearestValid, FillPolicy::MedianWindow}) {
    const DepthMap out = fill_depth(m, p);
    EXPECT_EQ(out.depth, m.depth);
    EXPECT_EQ(out.state, m.state);
  }
  DepthMap holes(3, 3);
  EXPECT_EQ(fill_depth(holes, FillPolicy::None).state, holes.state);
}

TEST(Fill, NearestValidFillsFromNeighbours) {
  DepthMap m(3, 3);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) {
      m.depth(x, y) = 10.0;
      m.state(x, y) = PixelState::Measured;
    }
  }
  m.depth(1, 1) = DepthMap::kInvalidDepth;
  m.state(1, 1) = PixelState::Invalid;
  for (FillPolicy p : {FillPolicy::NearestValid, FillPolicy::MedianWindow}) {
    const DepthMap out = fill_depth(m, p);
    EXPECT_EQ(out.depth(1, 1), 10.0);
    EXPECT_EQ(out.state(1, 1), PixelState::Filled);
  }
}

TEST(Fill, NearestValidPicksClosestMeasuredPixel) {
  DepthMap m(7, 1);
  m.depth(0, 0) = 4.0;
  m.state(0, 0) = PixelState::Measured;
  m.depth(6, 0) = 8.0;
  m.state(6, 0) = PixelState::Measured;
  const DepthMap out = fill_depth(m, FillPolicy::NearestValid);
  EXPECT_EQ(out.depth(2, 0), 4.0);
  EXPECT_EQ(out.depth(4, 0), 8.0);
}

TEST(Sweep, SingleHypothesisVolume) {
  const auto s = plane_scene();
  const HypothesisSet one = HypothesisSet::make(2, 50, 1);
  const WindowResult r = estimate_depth(s.data.window, s.camera, s.velocity, one, {});
  EXPECT_EQ(r.fused.depth_count(), 1u);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      if (r.depth.has_depth(x, y)) {
        EXPECT_EQ(r.depth.depth(x, y), one[0]);
        EXPECT_EQ(r.depth.confidence(x, y), 1.0);
      }
    }
  }
}

TEST(Sweep, PureRotationSlicesIdenticalAndFlatConfidence) {
  auto s = plane_scene();
  VelocitySample rot;
  rot.angular = {0.0, 0.1, 0.05};
  const HypothesisSet h = sweep_hypotheses(16);
  SweepConfig sc;
  sc.num_scales = 3;
  const Sweep sweep = build_volume(s.data.window, s.camera, rot, h, sc);
  for (const CostVolume& v : sweep.scales) {
    for (std::size_t d = 1; d < h.size(); ++d) {
      EXPECT_TRUE(std::equal(v.scores.begin(), v.scores.begin() + static_cast<std::ptrdiff_t>(v.plane()),
                             v.scores.begin() + static_cast<std::ptrdiff_t>(d * v.plane())));
    }
  }
  PipelineConfig pc;
  pc.sweep = sc;
  const WindowResult r = estimate_depth(s.data.window, s.camera, rot, h, pc);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      const auto c = r.fused.curve(x, y);
      const double lo = *std::min_element(c.begin(), c.end());
      const double hi = *std::max_element(c.begin(), c.end());
      EXPECT_LE(hi - lo, 1e-6 * std::max(1e-300, std::abs(hi)));
      EXPECT_NEAR(r.depth.confidence(x, y), 1.0, 1e-6);
    }
  }
}

TEST(Sweep, DeterministicAcrossWorkerCounts) {
  const auto s = plane_scene();
  PipelineConfig pc;
  pc.sweep.num_scales = 3;
  const HypothesisSet h = sweep_hypotheses();
  const WindowResult a = estimate_depth(s.data.window, s.camera, s.velocity, h, pc, 1);
  for (unsigned w : {2u, 3u, 8u}) {
    const WindowResult b = estimate_depth(s.data.window, s.camera, s.velocity, h, pc, w);
    EXPECT_EQ(a.fused.scores, b.fused.scores) << w;
    EXPECT_EQ(a.depth.depth, b.depth.depth) << w;
    EXPECT_EQ(a.depth.state, b.depth.state) << w;
  }
}

TEST(Sweep, DiscardTallyCountsEventsLeavingTheSensor) {
  const auto s = plane_scene();
  const HypothesisSet h = sweep_hypotheses();
  const Sweep sweep = build_volume(s.data.window, s.camera, s.velocity, h, {});
  // Nearby hypotheses move events farther, so discards never decrease toward dmin.
  for (std::size_t d = 1; d < h.size(); ++d) EXPECT_LE(sweep.discarded[d], sweep.discarded[d - 1]);
}

TEST(PipelineConfig, Validation) {
  PipelineConfig c;
  EXPECT_NO_THROW(c.validate());
  c.sweep.num_scales = 2;
  c.scale_weights = {1.0};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.scale_weights = {1.0, 0.5};
  EXPECT_NO_THROW(c.validate());
  c.peak_alpha = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
