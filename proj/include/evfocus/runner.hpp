#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "evfocus/config.hpp"
#include "evfocus/io.hpp"
#include "evfocus/pipeline.hpp"
#include "evfocus/synth.hpp"

namespace evfocus {

struct RunInputs {
  CameraIntrinsics camera;
  std::vector<Event> events;
  std::vector<VelocitySample> track;
};

/// Reads and checks the camera, event stream and velocity track named by the
/// config. Every failure is a FormatError.
inline RunInputs load_inputs(const RunConfig& config) {
  auto require = [](const std::filesystem::path& p, const char* what) {
    if (p.empty()) throw io::FormatError(std::string("no ") + what + " file given");
    if (!std::filesystem::is_regular_file(p)) {
      throw io::FormatError(std::string(what) + " file '" + p.string() + "' does not exist");
    }
  };
  require(config.camera, "camera");
  require(config.events, "events");
  require(config.velocity, "velocity");

  RunInputs in;
  in.camera = io::read_camera(config.camera);
  in.events = io::read_events(config.events);
  in.track = io::read_velocity_track(config.velocity);
  try {
    check_monotone(in.events);
    check_bounds(in.events, in.camera.width, in.camera.height);
  } catch (const std::invalid_argument& err) {
    throw io::FormatError(config.events.string() + ": " + err.what());
  }
  if (in.events.empty()) throw io::FormatError(config.events.string() + ": no events");
  return in;
}

/// Noise seed for window k; window 0 uses the run seed unchanged.
inline std::uint64_t window_seed(std::uint64_t seed, std::size_t k) {
  return k == 0 ? seed : CounterNormal::mix(seed ^ CounterNormal::mix(k));
}

struct WindowRun {
  std::size_t index = 0;
  EventWindow window;
  VelocitySample velocity;
  WindowResult result;
};

/// Runs the pipeline on every window and hands each result to `sink` in order.
inline std::size_t run_windows(const RunInputs& in, const RunConfig& config, unsigned workers,
                               const std::function<void(const WindowRun&)>& sink) {
  config.validate();
  const HypothesisSet hyps = config.hypotheses();
  std::vector<EventWindow> windows = form_windows(in.events, config.window);
  for (std::size_t k = 0; k < windows.size(); ++k) {
    WindowRun run;
    run.index = k;
    run.window = std::move(windows[k]);
    const double t0 = run.window.t_begin();
    const double t1 = run.window.t_ref;
    run.velocity = interpolate_velocity(in.track, t0, t1);
    if (config.noise > 0.0) {
      run.velocity = inject_velocity_noise(run.velocity, config.noise, window_seed(config.seed, k),
                                           mean_norms(in.track, t0, t1));
    }
    run.result = estimate_depth(run.window, in.camera, run.velocity, hyps, config.pipeline, workers);
    sink(run);
  }
  return windows.size();
}

/// Builds the scene described by a simulation config and generates its events.
/// The texture uses the seed directly and the generator a value mixed from it.
inline SyntheticWindow simulate(const SimConfig& config, SceneSpec* scene_out = nullptr) {
  config.validate();
  SceneSpec scene = config.scene.scene;
  if (!config.scene.explicit_edges) build_texture(scene, config.camera, config.scene.texture, config.seed);
  SyntheticWindow out = generate(scene, config.camera, config.velocity, config.generator,
                                 CounterNormal::mix(config.seed));
  if (scene_out) *scene_out = std::move(scene);
  return out;
}

/// Constant-velocity track covering a simulated window.
inline std::vector<VelocitySample> simulated_track(const SimConfig& config) {
  VelocitySample a = config.velocity;
  VelocitySample b = config.velocity;
  a.t = config.generator.t_end - config.generator.duration;
  b.t = config.generator.t_end;
  return {a, b};
}

inline std::string window_name(const char* stem, std::size_t k, const char* suffix) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04zu%s", stem, k, suffix);
  return buf;
}

/// Pixels sampled for the diagnostics: up to `count` measured pixels spread
/// evenly over raster order.
inline std::vector<std::pair<int, int>> diagnostic_pixels(const DepthMap& map, int count) {
  std::vector<std::pair<int, int>> measured;
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      if (map.state(x, y) == PixelState::Measured) measured.emplace_back(x, y);
    }
  }
  if (count <= 0 || measured.empty()) return {};
  if (measured.size() <= static_cast<std::size_t>(count)) return measured;
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < count; ++i) out.push_back(measured[measured.size() * static_cast<std::size_t>(i) / static_cast<std::size_t>(count)]);
  return out;
}

inline io::Json window_diagnostics(const WindowRun& run, const HypothesisSet& hyps, int sample_count) {
  const WindowResult& r = run.result;
  std::size_t measured = 0, filled = 0;
  for (int y = 0; y < r.depth.height(); ++y) {
    for (int x = 0; x < r.depth.width(); ++x) {
      measured += r.depth.state(x, y) == PixelState::Measured;
      filled += r.depth.state(x, y) == PixelState::Filled;
    }
  }
  io::Json curves = io::Json::array();
  for (const auto& [x, y] : diagnostic_pixels(r.depth, sample_count)) {
    curves.push_back({{"x", x},
                      {"y", y},
                      {"depth", r.depth.depth(x, y)},
                      {"confidence", r.depth.confidence(x, y)},
                      {"fused", r.fused.curve(x, y)},
                      {"raw", r.sweep.scales.front().curve(x, y)}});
  }
  return {{"window", run.index},
                {"events", run.window.size()},
                {"t_begin", run.window.t_begin()},
                {"t_ref", run.window.t_ref},
                {"velocity",
                 {{"linear", {run.velocity.linear.x(), run.velocity.linear.y(), run.velocity.linear.z()}},
                  {"angular", {run.velocity.angular.x(), run.velocity.angular.y(), run.velocity.angular.z()}}}},
                {"hypotheses", hyps.depths},
                {"objective_values", r.sweep.objective_values},
                {"discarded", r.sweep.discarded},
                {"measured_pixels", measured},
                {"filled_pixels", filled},
                {"curves", curves},
                {"timing",
                 {{"sweep_s", r.timing.sweep_seconds},
                  {"aggregate_s", r.timing.aggregate_seconds},
                  {"extract_s", r.timing.extract_seconds}}}};
}

}  // namespace evfocus
