#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "evfocus/costvol.hpp"
#include "evfocus/events.hpp"
#include "evfocus/motion.hpp"
#include "evfocus/pipeline.hpp"

namespace evfocus {

enum class SceneGeometry { Plane, TwoPlanes, Stripes };

inline SceneGeometry parse_geometry(std::string_view name) {
  if (name == "plane") return SceneGeometry::Plane;
  if (name == "two_planes") return SceneGeometry::TwoPlanes;
  if (name == "stripes") return SceneGeometry::Stripes;
  throw std::invalid_argument("unknown scene geometry '" + std::string(name) + "'");
}

inline std::string_view geometry_name(SceneGeometry g) {
  switch (g) {
    case SceneGeometry::Plane: return "plane";
    case SceneGeometry::TwoPlanes: return "two_planes";
    case SceneGeometry::Stripes: return "stripes";
  }
  return "?";
}

/// Deterministic uniforms keyed by (key, counter).
class CounterUniform {
public:
  explicit CounterUniform(std::uint64_t key) : key_(CounterNormal::mix(key ^ 0xbb67ae8584caa73bULL)) {}
  [[nodiscard]] double operator()(std::uint64_t counter) const {
    return static_cast<double>(CounterNormal::mix(key_ + CounterNormal::mix(counter)) >> 11) * 0x1.0p-53;
  }

private:
  std::uint64_t key_;
};

/// Fronto-parallel scene geometry plus the texture edges that fire events.
///
/// Edge samples are points in the camera frame at the reference time. The
/// texture builders place vertical edges and sample them on integer rows.
struct SceneSpec {
  SceneGeometry geometry = SceneGeometry::Plane;
  double depth = 10.0;
  /// Right-hand plane depth for TwoPlanes.
  double depth2 = 20.0;
  /// First column of the right-hand plane for TwoPlanes.
  int split_column = 0;
  double stripe_period = 2.0;
  /// Log-intensity contrast threshold; recorded, not used by the geometric generator.
  double contrast_threshold = 0.2;
  std::vector<Eigen::Vector3d> edges;

  [[nodiscard]] double depth_at_column(double x) const {
    if (geometry == SceneGeometry::TwoPlanes && x >= split_column) return depth2;
    return depth;
  }

  void validate(const CameraIntrinsics& cam) const {
    auto in_range = [](double d) { return d >= 1.0 && d <= 200.0; };
    if (!in_range(depth) || (geometry == SceneGeometry::TwoPlanes && !in_range(depth2))) {
      throw std::invalid_argument("scene depths must lie in [1, 200] m");
    }
    if (geometry == SceneGeometry::Stripes && !(stripe_period > 0.0)) {
      throw std::invalid_argument("stripe period must be positive");
    }
    for (const Eigen::Vector3d& p : edges) {
      if (!(p.z() > 0.0)) throw std::invalid_argument("edge sample behind the camera");
      const double u = cam.f * p.x() / p.z() + cam.cu;
      const double v = cam.f * p.y() / p.z() + cam.cv;
      if (!(u >= 0.0 && v >= 0.0 && u <= cam.width - 1 && v <= cam.height - 1)) {
        throw std::invalid_argument("edge sample projects outside the sensor");
      }
    }
  }
};

inline Eigen::Vector3d back_project(const CameraIntrinsics& cam, double u, double v, double depth) {
  return {(u - cam.cu) * depth / cam.f, (v - cam.cv) * depth / cam.f, depth};
}

/// Adds a vertical edge at sub-pixel column `u`, sampled on rows [v0, v1].
inline void add_vertical_edge(SceneSpec& scene, const CameraIntrinsics& cam, double u, int v0, int v1) {
  for (int v = std::max(0, v0); v <= std::min(cam.height - 1, v1); ++v) {
    scene.edges.push_back(back_project(cam, u, v, scene.depth_at_column(u)));
  }
}

struct TextureParams {
  /// Random vertical edges on pixel centres for Plane/TwoPlanes; edges closer
  /// than min_separation in both directions are rejected.
  int num_edges = 16;
  int min_separation = 10;
  int min_length = 6;
  int max_length = 20;
  /// Columns kept free at the left and right borders.
  double margin = 4.0;
  /// Stripes: count, first edge column and row span.
  int stripe_count = 8;
  double stripe_start = 20.0;
  int stripe_row_begin = 8;
  int stripe_row_end = 55;
};

/// Populates scene.edges from texture parameters; identical inputs give
/// identical edges.
inline void build_texture(SceneSpec& scene, const CameraIntrinsics& cam, const TextureParams& tex,
                          std::uint64_t seed) {
  scene.edges.clear();
  if (scene.geometry == SceneGeometry::Stripes) {
    for (int k = 0; k < tex.stripe_count; ++k) {
      add_vertical_edge(scene, cam, tex.stripe_start + k * scene.stripe_period, tex.stripe_row_begin,
                        tex.stripe_row_end);
    }
    return;
  }
  const CounterUniform uniform(seed);
  std::uint64_t counter = 0;
  const double lo = tex.margin;
  const double hi = cam.width - 1 - tex.margin;
  struct Placed {
    double u;
    int v0, v1;
  };
  std::vector<Placed> placed;
  const int attempts = 64 * tex.num_edges;
  for (int a = 0; a < attempts && std::ssize(placed) < tex.num_edges; ++a) {
    double u = std::round(lo + (hi - lo) * uniform(counter++));
    if (scene.geometry == SceneGeometry::TwoPlanes && std::abs(u - scene.split_column) < 1.0) {
      u += u < scene.split_column ? -1.0 : 1.0;
    }
    const int span = tex.max_length - tex.min_length + 1;
    const int length = tex.min_length + static_cast<int>(uniform(counter++) * span);
    const int v0 = static_cast<int>(uniform(counter++) * std::max(1, cam.height - length));
    const int v1 = v0 + length - 1;
    const bool clear = std::none_of(placed.begin(), placed.end(), [&](const Placed& p) {
      const bool rows_near = v0 <= p.v1 + tex.min_separation && p.v0 <= v1 + tex.min_separation;
      return rows_near && std::abs(u - p.u) < tex.min_separation;
    });
    if (!clear) continue;
    placed.push_back({u, v0, v1});
    add_vertical_edge(scene, cam, u, v0, v1);
  }
}

struct GroundTruth {
  Image depth;
  std::vector<double> event_depth;
  /// Pixels holding an edge sample at the reference time that fired at least
  /// one event; the support of the focused image.
  Grid<std::uint8_t> reference_pixels;
};

/// Uniform: events at uniformly random instants along each trajectory.
/// Crossing: events at the instants a trajectory crosses a pixel-centre
/// column or row, as a sensor pixel fires when an edge passes it.
enum class Emission { Uniform, Crossing };

inline Emission parse_emission(std::string_view name) {
  if (name == "uniform") return Emission::Uniform;
  if (name == "crossing") return Emission::Crossing;
  throw std::invalid_argument("unknown emission model '" + std::string(name) + "'");
}

inline std::string_view emission_name(Emission e) { return e == Emission::Uniform ? "uniform" : "crossing"; }

struct GeneratorParams {
  Emission emission = Emission::Uniform;
  double duration = 0.1;
  /// Uniform: events per edge sample. Crossing: events per crossing.
  int events_per_edge = 8;
  double jitter = 0.0;
  /// Reference time of the scene; events fall in [t_end - duration, t_end].
  double t_end = 0.1;
  bool quantize = false;
};

struct SyntheticWindow {
  EventWindow window;
  GroundTruth truth;
};

/// Emits events along each edge sample's image trajectory.
///
/// A sample with reference position p sits at p - V*tau at time
/// t_end + tau (tau <= 0), where V is the true flow at its pixel, so warping
/// with the true depth sends every event back to p. Event instants follow
/// the emission model; `jitter` adds Gaussian position noise and
/// `quantize` snaps positions to integer pixels like a real sensor. Positions
/// whose pixel is off the sensor emit nothing.
inline SyntheticWindow generate(const SceneSpec& scene, const CameraIntrinsics& cam, const VelocitySample& velocity,
                                const GeneratorParams& params, std::uint64_t seed) {
  cam.validate();
  scene.validate(cam);
  if (!(params.duration > 0.0)) throw std::invalid_argument("duration must be positive");
  if (params.events_per_edge < 1) throw std::invalid_argument("events_per_edge must be at least 1");
  if (!(params.jitter >= 0.0)) throw std::invalid_argument("jitter must be non-negative");

  struct Tagged {
    Event event;
    double depth;
  };
  std::vector<Tagged> tagged;
  Grid<std::uint8_t> reference(cam.width, cam.height, 0);
  tagged.reserve(scene.edges.size() * static_cast<std::size_t>(params.events_per_edge));
  auto on_sensor = [&](int x, int y) { return x >= 0 && y >= 0 && x < cam.width && y < cam.height; };

  for (std::size_t s = 0; s < scene.edges.size(); ++s) {
    const Eigen::Vector3d& point = scene.edges[s];
    const double z = point.z();
    const double pu = cam.f * point.x() / z + cam.cu;
    const double pv = cam.f * point.y() / z + cam.cv;
    const Flow v_ref = flow_at(cam, velocity, z, pu, pv);

    const std::uint64_t key = CounterNormal::mix(seed) ^ CounterNormal::mix(static_cast<std::uint64_t>(s) + 1);
    const CounterUniform uniform(key);
    const CounterNormal normal(key);

    std::vector<double> taus;
    if (params.emission == Emission::Uniform) {
      for (int j = 0; j < params.events_per_edge; ++j) {
        taus.push_back(-params.duration * uniform(2 * static_cast<std::uint64_t>(j)));
      }
    } else {
      std::vector<double> crossings;
      auto add_crossings = [&](double p0, double rate) {
        if (rate == 0.0) return;
        const double p_old = p0 + rate * params.duration;
        const double lo = std::ceil(std::min(p0, p_old));
        const double hi = std::floor(std::max(p0, p_old));
        for (double n = lo; n <= hi; n += 1.0) {
          const double tau = (p0 - n) / rate;
          if (tau <= 0.0 && tau >= -params.duration) crossings.push_back(tau);
        }
      };
      add_crossings(pu, v_ref.du);
      add_crossings(pv, v_ref.dv);
      std::sort(crossings.begin(), crossings.end());
      crossings.erase(std::unique(crossings.begin(), crossings.end(),
                                  [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                      crossings.end());
      for (double tau : crossings) taus.insert(taus.end(), static_cast<std::size_t>(params.events_per_edge), tau);
    }

    for (std::size_t j = 0; j < taus.size(); ++j) {
      const auto c = static_cast<std::uint64_t>(j);
      const double tau = taus[j];
      Event e;
      e.t = params.t_end + tau;
      e.x = pu - v_ref.du * tau;
      e.y = pv - v_ref.dv * tau;
      // The warp reads the flow at the event's own pixel; use that flow when
      // it keeps the event on the same pixel.
      if (on_sensor(e.px(), e.py())) {
        const Flow v_pix = flow_at(cam, velocity, z, e.px(), e.py());
        Event refined = e;
        refined.x = pu - v_pix.du * tau;
        refined.y = pv - v_pix.dv * tau;
        if (refined.px() == e.px() && refined.py() == e.py()) e = refined;
      }
      if (params.jitter > 0.0) {
        e.x += params.jitter * normal(2 * c);
        e.y += params.jitter * normal(2 * c + 1);
      }
      if (params.quantize) {
        e.x = std::round(e.x);
        e.y = std::round(e.y);
      }
      e.polarity = uniform(2 * c + 1) < 0.5;
      if (!on_sensor(e.px(), e.py())) continue;
      tagged.push_back({e, z});
      const int rx = static_cast<int>(std::floor(pu + 0.5));
      const int ry = static_cast<int>(std::floor(pv + 0.5));
      if (on_sensor(rx, ry)) reference(rx, ry) = 1;
    }
  }

  std::stable_sort(tagged.begin(), tagged.end(), [](const Tagged& a, const Tagged& b) { return a.event.t < b.event.t; });

  SyntheticWindow out;
  std::vector<Event> events;
  events.reserve(tagged.size());
  out.truth.event_depth.reserve(tagged.size());
  for (const Tagged& t : tagged) {
    events.push_back(t.event);
    out.truth.event_depth.push_back(t.depth);
  }
  out.window = make_window(std::move(events));
  out.truth.reference_pixels = std::move(reference);
  out.truth.depth = Image(cam.width, cam.height);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) out.truth.depth(x, y) = scene.depth_at_column(x);
  }
  return out;
}

/// Pixels that received at least one raw (unwarped) event.
inline Grid<std::uint8_t> event_pixels(const EventWindow& window, int width, int height) {
  Grid<std::uint8_t> mask(width, height, 0);
  for (const Event& e : window.events) mask(e.px(), e.py()) = 1;
  return mask;
}

struct DepthErrorReport {
  std::size_t event_pixels = 0;
  /// Event pixels whose winning bin is the hypothesis nearest the truth.
  double bin_accuracy = 0.0;
  /// Event pixels whose winning bin is two or more bins from the truth.
  double aliased_fraction = 0.0;
  /// Median |d - d*| / d* over measured event pixels.
  double median_abs_rel = 0.0;
  std::size_t measured_pixels = 0;
  /// Winning bin minus true bin per pixel; 0 off the event pixels.
  Grid<int> bin_error;
  WindowResult result;
};

/// Brute-force oracle: runs the full pipeline and scores it against truth on
/// the reference-time edge pixels, falling back to raw event pixels when the
/// truth carries no reference mask.
inline DepthErrorReport oracle_depth_error(const EventWindow& window, const CameraIntrinsics& cam,
                                           const VelocitySample& velocity, const HypothesisSet& hyps,
                                           const PipelineConfig& config, const GroundTruth& truth,
                                           unsigned workers = 1) {
  DepthErrorReport report;
  report.result = estimate_depth(window, cam, velocity, hyps, config, workers);
  const CostVolume& volume = report.result.fused;
  const DepthMap& depth = report.result.depth;
  const Grid<std::uint8_t> mask = truth.reference_pixels.width() == cam.width
                                       ? truth.reference_pixels
                                       : event_pixels(window, cam.width, cam.height);
  report.bin_error = Grid<int>(cam.width, cam.height, 0);

  std::size_t correct = 0;
  std::size_t aliased = 0;
  std::vector<double> rel;
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      if (!mask(x, y)) continue;
      ++report.event_pixels;
      const double g = truth.depth(x, y);
      std::size_t best = 0;
      for (std::size_t d = 1; d < volume.depth_count(); ++d) {
        if (volume.at(d, x, y) > volume.at(best, x, y)) best = d;
      }
      const int err = static_cast<int>(best) - static_cast<int>(hyps.nearest(g));
      report.bin_error(x, y) = err;
      if (err == 0) ++correct;
      if (std::abs(err) >= 2) ++aliased;
      if (depth.state(x, y) == PixelState::Measured) rel.push_back(std::abs(depth.depth(x, y) - g) / g);
    }
  }
  if (report.event_pixels > 0) {
    report.bin_accuracy = static_cast<double>(correct) / static_cast<double>(report.event_pixels);
    report.aliased_fraction = static_cast<double>(aliased) / static_cast<double>(report.event_pixels);
  }
  report.measured_pixels = rel.size();
  if (!rel.empty()) {
    const auto mid = rel.begin() + static_cast<std::ptrdiff_t>(rel.size() / 2);
    std::nth_element(rel.begin(), mid, rel.end());
    report.median_abs_rel = *mid;
  }
  return report;
}

}  // namespace evfocus
