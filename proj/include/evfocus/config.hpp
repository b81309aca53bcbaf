#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "evfocus/io.hpp"
#include "evfocus/pipeline.hpp"
#include "evfocus/synth.hpp"

namespace evfocus {

/// Settings for `depth`, `eval` and `ablate`. Paths are resolved against the
/// directory of the file they were read from.
struct RunConfig {
  std::filesystem::path camera;
  std::filesystem::path events;
  std::filesystem::path velocity;
  std::filesystem::path truth;
  std::filesystem::path out;

  double dmin = 2.0;
  double dmax = 80.0;
  int num_hypotheses = 64;
  Sampling sampling = Sampling::InverseDepth;
  PipelineConfig pipeline;
  WindowPolicy window;
  double noise = 0.0;
  std::uint64_t seed = 0;
  double max_depth = 80.0;
  /// Pixels whose score curves go into each window's diagnostics.
  int diagnostic_pixels = 16;

  [[nodiscard]] HypothesisSet hypotheses() const {
    return HypothesisSet::make(dmin, dmax, static_cast<std::size_t>(num_hypotheses), sampling);
  }

  /// Parameter ranges only; file existence is checked by the commands.
  void validate() const {
    if (num_hypotheses < 1) throw std::invalid_argument("num_hypotheses must be at least 1");
    (void)hypotheses();
    pipeline.validate();
    if (window.max_count < 1) throw std::invalid_argument("window max_count must be at least 1");
    if (!(window.max_interval > 0.0)) throw std::invalid_argument("window max_interval must be positive");
    if (!(noise >= 0.0) || !std::isfinite(noise)) throw std::invalid_argument("noise level must be non-negative");
    if (!(max_depth > 0.0)) throw std::invalid_argument("max_depth must be positive");
    if (diagnostic_pixels < 0) throw std::invalid_argument("diagnostic_pixels must be non-negative");
  }
};

namespace detail {

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

inline std::string sampling_name(Sampling s) { return s == Sampling::InverseDepth ? "inverse" : "linear"; }

inline std::string fill_name(FillPolicy f) {
  switch (f) {
    case FillPolicy::None: return "none";
    case FillPolicy::NearestValid: return "nearest-valid";
    case FillPolicy::MedianWindow: return "median-window";
  }
  return "none";
}

inline std::string splat_name(SplatMode s) { return s == SplatMode::Bilinear ? "bilinear" : "nearest"; }

template <typename Fn>
auto checked(const std::string& where, Fn&& fn) {
  try {
    return fn();
  } catch (const io::FormatError&) {
    throw;
  } catch (const std::invalid_argument& err) {
    throw io::FormatError(where + ": " + err.what());
  }
}

}  // namespace detail

inline RunConfig run_config_from_json(const io::Json& j, const std::filesystem::path& base,
                                      const std::string& where = "config") {
  using io::field_or;
  RunConfig c;
  c.camera = detail::resolve(base, field_or<std::string>(j, "camera", "", where));
  c.events = detail::resolve(base, field_or<std::string>(j, "events", "", where));
  c.velocity = detail::resolve(base, field_or<std::string>(j, "velocity", "", where));
  c.truth = detail::resolve(base, field_or<std::string>(j, "truth", "", where));
  c.out = detail::resolve(base, field_or<std::string>(j, "out", "", where));

  if (j.contains("hypotheses")) {
    const io::Json& h = j.at("hypotheses");
    const std::string w = where + ".hypotheses";
    c.dmin = field_or(h, "dmin", c.dmin, w);
    c.dmax = field_or(h, "dmax", c.dmax, w);
    c.num_hypotheses = field_or(h, "count", c.num_hypotheses, w);
    c.sampling = detail::checked(w, [&] { return parse_sampling(field_or<std::string>(h, "sampling", "inverse", w)); });
  }
  ObjectiveParams& obj = c.pipeline.sweep.objective;
  if (j.contains("objective")) {
    const io::Json& o = j.at("objective");
    const std::string w = where + ".objective";
    obj.kind = detail::checked(w, [&] { return parse_objective(field_or<std::string>(o, "kind", "fcd", w)); });
    if (o.contains("weights")) {
      const auto ws = io::field<std::vector<double>>(o, "weights", w);
      if (ws.size() != obj.weights.w.size()) throw io::FormatError(w + ": 'weights' needs 6 entries");
      std::copy(ws.begin(), ws.end(), obj.weights.w.begin());
    }
    obj.window = field_or(o, "window", obj.window, w);
    obj.sosa_lambda = field_or(o, "sosa_lambda", obj.sosa_lambda, w);
    obj.fcd_sigma = field_or(o, "fcd_sigma", obj.fcd_sigma, w);
  }
  PipelineConfig& p = c.pipeline;
  if (j.contains("aggregation")) {
    const io::Json& a = j.at("aggregation");
    const std::string w = where + ".aggregation";
    p.sweep.num_scales = field_or(a, "scales", p.sweep.num_scales, w);
    p.scale_weights = field_or(a, "scale_weights", p.scale_weights, w);
    p.trend_iterations = field_or(a, "trend_iters", p.trend_iterations, w);
    p.peak_alpha = field_or(a, "peak_alpha", p.peak_alpha, w);
    p.min_support = field_or(a, "min_support", p.min_support, w);
    p.fill = detail::checked(w, [&] { return parse_fill(field_or<std::string>(a, "fill", "none", w)); });
    p.sweep.splat = detail::checked(w, [&] { return parse_splat(field_or<std::string>(a, "splat", "bilinear", w)); });
  }
  if (j.contains("window")) {
    const io::Json& wj = j.at("window");
    const std::string w = where + ".window";
    const auto count = field_or<long long>(wj, "max_count", static_cast<long long>(c.window.max_count), w);
    if (count < 1) throw io::FormatError(w + ": max_count must be at least 1");
    c.window.max_count = static_cast<std::size_t>(count);
    c.window.max_interval = field_or(wj, "max_interval", c.window.max_interval, w);
  }
  if (j.contains("noise")) {
    const io::Json& n = j.at("noise");
    c.noise = field_or(n, "level", c.noise, where + ".noise");
    c.seed = field_or(n, "seed", c.seed, where + ".noise");
  }
  c.max_depth = field_or(j, "max_depth", c.max_depth, where);
  c.diagnostic_pixels = field_or(j, "diagnostic_pixels", c.diagnostic_pixels, where);
  detail::checked(where, [&] {
    c.validate();
    return 0;
  });
  return c;
}

inline io::Json run_config_to_json(const RunConfig& c) {
  auto abs = [](const std::filesystem::path& p) { return p.empty() ? std::string() : std::filesystem::absolute(p).string(); };
  const ObjectiveParams& obj = c.pipeline.sweep.objective;
  const PipelineConfig& p = c.pipeline;
  return {
      {"camera", abs(c.camera)},
      {"events", abs(c.events)},
      {"velocity", abs(c.velocity)},
      {"truth", abs(c.truth)},
      {"out", abs(c.out)},
      {"hypotheses",
       {{"dmin", c.dmin}, {"dmax", c.dmax}, {"count", c.num_hypotheses}, {"sampling", detail::sampling_name(c.sampling)}}},
      {"objective",
       {{"kind", std::string(objective_name(obj.kind))},
        {"weights", obj.weights.w},
        {"window", obj.window},
        {"sosa_lambda", obj.sosa_lambda},
        {"fcd_sigma", obj.fcd_sigma}}},
      {"aggregation",
       {{"scales", p.sweep.num_scales},
        {"scale_weights", p.scale_weights},
        {"trend_iters", p.trend_iterations},
        {"peak_alpha", p.peak_alpha},
        {"min_support", p.min_support},
        {"fill", detail::fill_name(p.fill)},
        {"splat", detail::splat_name(p.sweep.splat)}}},
      {"window", {{"max_count", c.window.max_count}, {"max_interval", c.window.max_interval}}},
      {"noise", {{"level", c.noise}, {"seed", c.seed}}},
      {"max_depth", c.max_depth},
      {"diagnostic_pixels", c.diagnostic_pixels},
  };
}

/// Settings for `simulate`.
struct SimConfig {
  CameraIntrinsics camera{200.0, 31.5, 31.5, 64, 64};
  io::SceneFile scene;
  VelocitySample velocity;
  GeneratorParams generator;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  /// "text" or "binary"; binary needs integer coordinates.
  std::string format = "text";

  SimConfig() {
    velocity.linear = {1.0, 0.0, 0.0};
    generator.events_per_edge = 20;
  }

  void validate() const {
    camera.validate();
    if (!velocity.finite()) throw std::invalid_argument("velocity must be finite");
    if (!(generator.duration > 0.0)) throw std::invalid_argument("duration must be positive");
    if (generator.events_per_edge < 1) throw std::invalid_argument("events_per_edge must be at least 1");
    if (!(generator.jitter >= 0.0)) throw std::invalid_argument("jitter must be non-negative");
    if (format != "text" && format != "binary") throw std::invalid_argument("format must be 'text' or 'binary'");
    if (format == "binary" && !generator.quantize) {
      throw std::invalid_argument("binary output needs integer coordinates; set generator.quantize");
    }
  }
};

inline SimConfig sim_config_from_json(const io::Json& j, const std::filesystem::path& base,
                                      const std::string& where = "config") {
  using io::field_or;
  SimConfig c;
  if (j.contains("camera")) {
    const io::Json& cam = j.at("camera");
    c.camera = cam.is_string() ? io::read_camera(detail::resolve(base, cam.get<std::string>()))
                               : io::camera_from_json(cam, where + ".camera");
  }
  if (j.contains("scene")) {
    const io::Json& s = j.at("scene");
    c.scene = s.is_string() ? io::scene_from_json(io::read_json(detail::resolve(base, s.get<std::string>())))
                            : io::scene_from_json(s, where + ".scene");
  }
  if (j.contains("velocity")) {
    const io::Json& v = j.at("velocity");
    const std::string w = where + ".velocity";
    const auto lin = field_or<std::vector<double>>(v, "linear", {1.0, 0.0, 0.0}, w);
    const auto ang = field_or<std::vector<double>>(v, "angular", {0.0, 0.0, 0.0}, w);
    if (lin.size() != 3 || ang.size() != 3) throw io::FormatError(w + ": linear and angular need 3 entries");
    c.velocity.linear = {lin[0], lin[1], lin[2]};
    c.velocity.angular = {ang[0], ang[1], ang[2]};
  }
  if (j.contains("generator")) {
    const io::Json& g = j.at("generator");
    const std::string w = where + ".generator";
    GeneratorParams& gp = c.generator;
    gp.emission = detail::checked(w, [&] { return parse_emission(field_or<std::string>(g, "emission", "uniform", w)); });
    gp.duration = field_or(g, "duration", gp.duration, w);
    gp.events_per_edge = field_or(g, "events_per_edge", gp.events_per_edge, w);
    gp.jitter = field_or(g, "jitter", gp.jitter, w);
    gp.t_end = field_or(g, "t_end", gp.t_end, w);
    gp.quantize = field_or(g, "quantize", gp.quantize, w);
  }
  c.seed = field_or(j, "seed", c.seed, where);
  c.out = detail::resolve(base, field_or<std::string>(j, "out", "", where));
  c.format = field_or<std::string>(j, "format", c.format, where);
  detail::checked(where, [&] {
    c.validate();
    return 0;
  });
  return c;
}

inline io::Json sim_config_to_json(const SimConfig& c) {
  const GeneratorParams& g = c.generator;
  return {
      {"camera", io::camera_to_json(c.camera)},
      {"scene", io::scene_to_json(c.scene)},
      {"velocity",
       {{"linear", {c.velocity.linear.x(), c.velocity.linear.y(), c.velocity.linear.z()}},
        {"angular", {c.velocity.angular.x(), c.velocity.angular.y(), c.velocity.angular.z()}}}},
      {"generator",
       {{"emission", std::string(emission_name(g.emission))},
        {"duration", g.duration},
        {"events_per_edge", g.events_per_edge},
        {"jitter", g.jitter},
        {"t_end", g.t_end},
        {"quantize", g.quantize}}},
      {"seed", c.seed},
      {"out", c.out.empty() ? std::string() : std::filesystem::absolute(c.out).string()},
      {"format", c.format},
  };
}

}  // namespace evfocus
