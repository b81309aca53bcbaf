// evfocus: depth from event streams by sweeping depth hypotheses and scoring
// the focus of the motion-compensated event image.
//
//   evfocus simulate --out data/plane
//   evfocus depth --config data/plane/run.json
//   evfocus eval --pred data/plane/depth --truth data/plane/truth
//   evfocus ablate --config data/plane/run.json --levels 0 0.1 0.2 0.5 1 --seeds 1 2 3

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evfocus/config.hpp"
#include "evfocus/io.hpp"
#include "evfocus/parallel.hpp"
#include "evfocus/report.hpp"
#include "evfocus/runner.hpp"

namespace fs = std::filesystem;
using namespace evfocus;
using io::Json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

/// Bad flags, configs or inputs, detected before any computation.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config;
  unsigned threads = 0;
  std::optional<std::uint64_t> seed;
  bool verbose = false;

  [[nodiscard]] unsigned workers() const { return threads == 0 ? default_workers() : threads; }
};

struct SimulateFlags {
  std::string out, scene, camera, format, emission;
  std::optional<int> events_per_edge;
};

struct DepthFlags {
  std::string out, camera, events, velocity, truth;
  std::optional<double> dmin, dmax, peak_alpha, min_support, sosa_lambda, noise, max_interval, max_depth;
  std::optional<int> num_hypotheses, scales, trend_iters, window_radius;
  std::optional<long long> max_count;
  std::string sampling, fill, splat, objective;
  std::vector<double> scale_weights, fcd_weights;
};

struct EvalFlags {
  std::string pred, truth, out;
  std::optional<double> max_depth;
};

struct AblateFlags {
  std::vector<double> levels;
  std::vector<std::uint64_t> seeds;
};

/// Config files may be plain configs or manifests written by a previous run;
/// a manifest's `config` entry is the config it ran with.
Json load_config_json(const std::string& path, fs::path& base) {
  if (path.empty()) {
    base = fs::current_path();
    return Json::object();
  }
  Json j = io::read_json(path);
  base = fs::absolute(path).parent_path();
  if (!j.is_object()) throw ConfigError(path + ": expected a JSON object");
  if (j.contains("command") && j.contains("config")) return j.at("config");
  return j;
}

std::string absolute(const std::string& p) { return fs::absolute(p).string(); }

void ensure_writable_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory '" + dir.string() + "'");
  const fs::path probe = dir / ".evfocus_probe";
  {
    std::ofstream out(probe);
    if (!out) throw ConfigError("output directory '" + dir.string() + "' is not writable");
  }
  fs::remove(probe, ec);
}

Json manifest(const char* command, const Json& config, const Globals& g) {
  return {{"command", command}, {"config", config}, {"threads", g.workers()}, {"tool", "evfocus"}};
}

// simulate ---------------------------------------------------------------------

int run_simulate(const Globals& g, const SimulateFlags& f) {
  SimConfig cfg;
  fs::path out_dir;
  try {
    fs::path base;
    Json j = load_config_json(g.config, base);
    if (!f.scene.empty()) {
      if (!fs::is_regular_file(f.scene)) throw ConfigError("scene file '" + f.scene + "' does not exist");
      j["scene"] = absolute(f.scene);
    }
    if (!f.camera.empty()) j["camera"] = absolute(f.camera);
    if (!f.out.empty()) j["out"] = absolute(f.out);
    if (!f.format.empty()) j["format"] = f.format;
    if (!f.emission.empty()) j["generator"]["emission"] = f.emission;
    if (f.events_per_edge) j["generator"]["events_per_edge"] = *f.events_per_edge;
    if (g.seed) j["seed"] = *g.seed;
    if (j.contains("scene") && j.at("scene").is_string()) {
      const fs::path p = detail::resolve(base, j.at("scene").get<std::string>());
      if (!fs::is_regular_file(p)) throw ConfigError("scene file '" + p.string() + "' does not exist");
    }
    cfg = sim_config_from_json(j, base);
    if (cfg.out.empty()) throw ConfigError("no output directory; pass --out or set 'out'");
    out_dir = cfg.out;
    ensure_writable_dir(out_dir);
    ensure_writable_dir(out_dir / "truth");
  } catch (const io::FormatError& err) {
    throw ConfigError(err.what());
  } catch (const std::invalid_argument& err) {
    throw ConfigError(err.what());
  }

  SceneSpec scene;
  const SyntheticWindow syn = simulate(cfg, &scene);

  const fs::path events_path = out_dir / (cfg.format == "binary" ? "events.bin" : "events.txt");
  io::write_events(events_path, syn.window.events);
  io::write_velocity_track(out_dir / "velocity.txt", simulated_track(cfg));
  io::write_json(out_dir / "camera.json", io::camera_to_json(cfg.camera));
  io::SceneFile built = cfg.scene;
  built.scene = scene;
  built.explicit_edges = true;
  io::write_json(out_dir / "scene.json", io::scene_to_json(built));

  Image sparse(cfg.camera.width, cfg.camera.height, 0.0);
  for (int y = 0; y < sparse.height(); ++y) {
    for (int x = 0; x < sparse.width(); ++x) {
      if (syn.truth.reference_pixels(x, y)) sparse(x, y) = syn.truth.depth(x, y);
    }
  }
  io::write_pfm(out_dir / "truth" / window_name("depth", 0, ".pfm"), sparse);
  io::write_pfm(out_dir / "truth_dense.pfm", syn.truth.depth);

  RunConfig run;
  run.camera = out_dir / "camera.json";
  run.events = events_path;
  run.velocity = out_dir / "velocity.txt";
  run.truth = out_dir / "truth";
  run.out = out_dir / "depth";
  io::write_json(out_dir / "run.json", run_config_to_json(run));

  Json m = manifest("simulate", sim_config_to_json(cfg), g);
  m["events"] = syn.window.size();
  m["edge_points"] = scene.edges.size();
  std::size_t reference = 0;
  for (std::uint8_t v : syn.truth.reference_pixels.data()) reference += v != 0;
  m["reference_pixels"] = reference;
  io::write_json(out_dir / "manifest.json", m);
  std::cout << "simulate: " << syn.window.size() << " events from " << scene.edges.size() << " edge points -> "
            << out_dir.string() << '\n';
  return kExitOk;
}

// depth / ablate shared config ------------------------------------------------

RunConfig build_run_config(const Globals& g, const DepthFlags& f, Json* raw = nullptr) {
  try {
    fs::path base;
    Json j = load_config_json(g.config, base);
    auto set_path = [&](const char* key, const std::string& v) {
      if (!v.empty()) j[key] = absolute(v);
    };
    set_path("out", f.out);
    set_path("camera", f.camera);
    set_path("events", f.events);
    set_path("velocity", f.velocity);
    set_path("truth", f.truth);
    if (f.dmin) j["hypotheses"]["dmin"] = *f.dmin;
    if (f.dmax) j["hypotheses"]["dmax"] = *f.dmax;
    if (f.num_hypotheses) j["hypotheses"]["count"] = *f.num_hypotheses;
    if (!f.sampling.empty()) j["hypotheses"]["sampling"] = f.sampling;
    if (!f.objective.empty()) j["objective"]["kind"] = f.objective;
    if (!f.fcd_weights.empty()) j["objective"]["weights"] = f.fcd_weights;
    if (f.window_radius) j["objective"]["window"] = *f.window_radius;
    if (f.sosa_lambda) j["objective"]["sosa_lambda"] = *f.sosa_lambda;
    if (f.scales) j["aggregation"]["scales"] = *f.scales;
    if (!f.scale_weights.empty()) j["aggregation"]["scale_weights"] = f.scale_weights;
    if (f.trend_iters) j["aggregation"]["trend_iters"] = *f.trend_iters;
    if (f.peak_alpha) j["aggregation"]["peak_alpha"] = *f.peak_alpha;
    if (f.min_support) j["aggregation"]["min_support"] = *f.min_support;
    if (!f.fill.empty()) j["aggregation"]["fill"] = f.fill;
    if (!f.splat.empty()) j["aggregation"]["splat"] = f.splat;
    if (f.max_count) j["window"]["max_count"] = *f.max_count;
    if (f.max_interval) j["window"]["max_interval"] = *f.max_interval;
    if (f.noise) j["noise"]["level"] = *f.noise;
    if (g.seed) j["noise"]["seed"] = *g.seed;
    if (f.max_depth) j["max_depth"] = *f.max_depth;
    if (raw) *raw = j;
    return run_config_from_json(j, base);
  } catch (const io::FormatError& err) {
    throw ConfigError(err.what());
  } catch (const std::invalid_argument& err) {
    throw ConfigError(err.what());
  }
}

RunInputs load_checked(const RunConfig& cfg) {
  try {
    return load_inputs(cfg);
  } catch (const io::FormatError& err) {
    throw ConfigError(err.what());
  }
}

// depth ------------------------------------------------------------------------

int run_depth(const Globals& g, const DepthFlags& f) {
  const RunConfig cfg = build_run_config(g, f);
  if (cfg.out.empty()) throw ConfigError("no output directory; pass --out or set 'out'");
  const RunInputs in = load_checked(cfg);
  ensure_writable_dir(cfg.out);

  const HypothesisSet hyps = cfg.hypotheses();
  Json windows = Json::array();
  const std::size_t count = run_windows(in, cfg, g.workers(), [&](const WindowRun& run) {
    const std::string pfm = window_name("depth", run.index, ".pfm");
    const std::string mask = window_name("depth", run.index, "_mask.pgm");
    const std::string diag = window_name("diag", run.index, ".json");
    io::write_pfm(cfg.out / pfm, run.result.depth.depth);
    io::write_pgm(cfg.out / mask, io::depth_mask(run.result.depth));
    const Json d = window_diagnostics(run, hyps, cfg.diagnostic_pixels);
    io::write_json(cfg.out / diag, d);
    windows.push_back({{"depth", pfm}, {"mask", mask}, {"diagnostics", diag}, {"events", run.window.size()}});
    if (g.verbose) {
      std::cerr << "window " << run.index << ": " << run.window.size() << " events, "
                << d.at("measured_pixels").get<std::size_t>() << " measured pixels, sweep "
                << run.result.timing.sweep_seconds << " s\n";
    }
  });

  Json m = manifest("depth", run_config_to_json(cfg), g);
  m["windows"] = windows;
  io::write_json(cfg.out / "manifest.json", m);
  std::cout << "depth: " << count << " window(s) -> " << cfg.out.string() << '\n';
  return kExitOk;
}

// eval -------------------------------------------------------------------------

std::map<std::string, fs::path> list_pfm(const fs::path& dir, const char* what) {
  if (!fs::is_directory(dir)) throw ConfigError(std::string(what) + " directory '" + dir.string() + "' does not exist");
  std::map<std::string, fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pfm") files[entry.path().filename().string()] = entry.path();
  }
  return files;
}

/// Validity of a stored prediction: its mask when present, else every pixel
/// not holding the invalid-depth sentinel.
Grid<std::uint8_t> prediction_mask(const fs::path& pfm, const Image& pred) {
  const fs::path mask_path = pfm.parent_path() / (pfm.stem().string() + "_mask.pgm");
  if (fs::is_regular_file(mask_path)) {
    Grid<std::uint8_t> mask = io::read_pgm(mask_path);
    if (mask.width() != pred.width() || mask.height() != pred.height()) {
      throw io::FormatError(mask_path.string() + ": mask size differs from its depth map");
    }
    return mask;
  }
  Grid<std::uint8_t> mask(pred.width(), pred.height(), 0);
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) mask(x, y) = pred(x, y) != DepthMap::kInvalidDepth;
  }
  return mask;
}

int run_eval(const Globals& g, const EvalFlags& f) {
  fs::path pred_dir = f.pred, truth_dir = f.truth;
  double max_depth = 80.0;
  if (!g.config.empty()) {
    DepthFlags none;
    const RunConfig cfg = build_run_config(g, none);
    if (pred_dir.empty()) pred_dir = cfg.out;
    if (truth_dir.empty()) truth_dir = cfg.truth;
    max_depth = cfg.max_depth;
  }
  if (f.max_depth) max_depth = *f.max_depth;
  if (!(max_depth > 0.0)) throw ConfigError("max depth must be positive");
  if (pred_dir.empty() || truth_dir.empty()) throw ConfigError("eval needs --pred and --truth directories");

  const auto preds = list_pfm(pred_dir, "prediction");
  const auto truths = list_pfm(truth_dir, "truth");
  std::vector<std::string> unmatched;
  for (const auto& [name, _] : preds) {
    if (!truths.contains(name)) unmatched.push_back("prediction without truth: " + name);
  }
  for (const auto& [name, _] : truths) {
    if (!preds.contains(name)) unmatched.push_back("truth without prediction: " + name);
  }
  if (!unmatched.empty()) {
    for (const std::string& u : unmatched) std::cerr << u << '\n';
    throw ConfigError("prediction and truth file sets differ");
  }
  if (preds.empty()) throw ConfigError("no .pfm files in '" + pred_dir.string() + "'");

  Json files = Json::array();
  MetricPool pool;
  std::vector<std::pair<std::string, MetricReport>> rows;
  try {
    for (const auto& [name, path] : preds) {
      const Image pred = io::read_pfm(path);
      const Image truth = io::read_pfm(truths.at(name));
      const Grid<std::uint8_t> mask = prediction_mask(path, pred);
      const MetricReport r = evaluate(pred, truth, max_depth, &mask);
      pool.add(pred, truth, &mask);
      files.push_back({{"file", name}, {"metrics", report_to_json(r)}});
      rows.emplace_back(name, r);
      if (r.nonpositive > 0) std::cerr << name << ": " << r.nonpositive << " non-positive predictions\n";
    }
  } catch (const io::FormatError& err) {
    throw ConfigError(err.what());
  } catch (const std::invalid_argument& err) {
    throw ConfigError(err.what());
  }
  const MetricReport pooled = pool.evaluate(max_depth);
  rows.emplace_back("pooled", pooled);

  const fs::path out = f.out.empty() ? pred_dir / "eval.json" : fs::path(f.out);
  Json report = {{"command", "eval"},
                 {"pred", fs::absolute(pred_dir).string()},
                 {"truth", fs::absolute(truth_dir).string()},
                 {"max_depth", max_depth},
                 {"files", files},
                 {"pooled", report_to_json(pooled)}};
  io::write_json(out, report);
  std::cout << format_table(rows, full_columns(), "file");
  return kExitOk;
}

// ablate -----------------------------------------------------------------------

double median(std::vector<double> v) {
  std::erase_if(v, [](double x) { return !std::isfinite(x); });
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Per-column median over a set of reports.
MetricReport median_report(const std::vector<MetricReport>& reports) {
  MetricReport m;
  for (const TableColumn& c : full_columns()) {
    std::vector<double> v;
    for (const MetricReport& r : reports) v.push_back(r.*(c.field));
    m.*(c.field) = median(v);
  }
  std::vector<double> px;
  for (const MetricReport& r : reports) px.push_back(static_cast<double>(r.pixels));
  m.pixels = static_cast<std::size_t>(median(px));
  return m;
}

int run_ablate(const Globals& g, const DepthFlags& f, AblateFlags a) {
  Json raw;
  RunConfig cfg = build_run_config(g, f, &raw);
  if (a.levels.empty() && raw.contains("ablate")) a.levels = raw["ablate"].value("levels", std::vector<double>{});
  if (a.seeds.empty() && raw.contains("ablate")) a.seeds = raw["ablate"].value("seeds", std::vector<std::uint64_t>{});
  if (a.seeds.empty()) a.seeds = {cfg.seed};
  if (a.levels.empty()) throw ConfigError("ablate needs at least one noise level (--levels)");
  for (double l : a.levels) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("noise levels must be non-negative");
  }
  if (cfg.out.empty()) throw ConfigError("no output directory; pass --out or set 'out'");
  if (cfg.truth.empty()) throw ConfigError("ablate needs a truth directory (--truth or 'truth')");
  const RunInputs in = load_checked(cfg);
  ensure_writable_dir(cfg.out);

  const std::size_t window_count = form_windows(in.events, cfg.window).size();
  std::vector<Image> truths;
  try {
    for (std::size_t k = 0; k < window_count; ++k) {
      const fs::path p = cfg.truth / window_name("depth", k, ".pfm");
      if (!fs::is_regular_file(p)) throw ConfigError("missing truth map '" + p.string() + "'");
      truths.push_back(io::read_pfm(p));
      if (truths.back().width() != in.camera.width || truths.back().height() != in.camera.height) {
        throw ConfigError(p.string() + ": size differs from the camera");
      }
    }
  } catch (const io::FormatError& err) {
    throw ConfigError(err.what());
  }

  Json runs = Json::array();
  std::vector<std::pair<std::string, MetricReport>> rows;
  Json medians = Json::array();
  for (double level : a.levels) {
    std::vector<MetricReport> reports;
    for (std::uint64_t seed : a.seeds) {
      RunConfig c = cfg;
      c.noise = level;
      c.seed = seed;
      MetricPool pool;
      run_windows(in, c, g.workers(), [&](const WindowRun& run) {
        const Grid<std::uint8_t> valid = io::depth_mask(run.result.depth);
        pool.add(run.result.depth.depth, truths[run.index], &valid);
      });
      const MetricReport r = pool.evaluate(c.max_depth);
      reports.push_back(r);
      runs.push_back({{"level", level}, {"seed", seed}, {"metrics", report_to_json(r)}});
      if (g.verbose) std::cerr << "level " << level << " seed " << seed << ": abs_rel " << r.abs_rel << '\n';
    }
    const MetricReport med = median_report(reports);
    char label[32];
    std::snprintf(label, sizeof label, "%g%%", 100.0 * level);
    rows.emplace_back(label, med);
    medians.push_back({{"level", level}, {"metrics", report_to_json(med)}});
  }

  const std::string table = format_table(rows, noise_columns(), "noise");
  Json config = run_config_to_json(cfg);
  config["ablate"] = {{"levels", a.levels}, {"seeds", a.seeds}};
  Json m = manifest("ablate", config, g);
  m["runs"] = runs;
  m["median"] = medians;
  io::write_json(cfg.out / "ablation.json", m);
  {
    std::ofstream out(cfg.out / "ablation.txt");
    out << table;
    if (!out) throw std::runtime_error("failed writing ablation table");
  }
  std::cout << table;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monocular depth from event streams by motion compensation"};
  app.fallthrough();
  app.require_subcommand(1);

  Globals g;
  app.add_option("--config", g.config, "JSON config or a manifest from an earlier run");
  app.add_option("--threads", g.threads, "Worker threads (0 = all processors)");
  app.add_option("--seed", g.seed, "Seed for simulation or velocity noise");
  app.add_flag("-v,--verbose", g.verbose, "Progress on stderr");

  SimulateFlags sf;
  CLI::App* sim = app.add_subcommand("simulate", "Generate a synthetic event dataset with ground truth");
  sim->add_option("--out", sf.out, "Output directory");
  sim->add_option("--scene", sf.scene, "Scene JSON file");
  sim->add_option("--camera", sf.camera, "Camera JSON file");
  sim->add_option("--format", sf.format, "Event file format")->check(CLI::IsMember({"text", "binary"}));
  sim->add_option("--emission", sf.emission, "uniform or crossing");
  sim->add_option("--events-per-edge", sf.events_per_edge, "Events per edge sample (per crossing for crossing)");

  DepthFlags df;
  auto add_depth_flags = [&](CLI::App* c) {
    c->add_option("--out", df.out, "Output directory");
    c->add_option("--camera", df.camera, "Camera JSON file");
    c->add_option("--events", df.events, "Event stream (.txt, or .bin/.dat binary)");
    c->add_option("--velocity", df.velocity, "Velocity track");
    c->add_option("--truth", df.truth, "Ground-truth directory");
    c->add_option("--dmin", df.dmin, "Nearest hypothesis depth (m)");
    c->add_option("--dmax", df.dmax, "Farthest hypothesis depth (m)");
    c->add_option("--num-hypotheses", df.num_hypotheses, "Number of depth hypotheses");
    c->add_option("--sampling", df.sampling, "inverse or linear hypothesis spacing");
    c->add_option("--scales", df.scales, "Pyramid scales fused");
    c->add_option("--scale-weights", df.scale_weights, "One fusion weight per scale");
    c->add_option("--trend-iters", df.trend_iters, "Trend smoothing passes");
    c->add_option("--peak-alpha", df.peak_alpha, "Secondary peak suppression in [0, 1]");
    c->add_option("--min-support", df.min_support, "Event mass needed in the window to measure a pixel");
    c->add_option("--fill", df.fill, "none, nearest-valid or median-window");
    c->add_option("--splat", df.splat, "bilinear or nearest event accumulation");
    c->add_option("--objective", df.objective, "fcd, var, sti, soe or sosa");
    c->add_option("--fcd-weights", df.fcd_weights, "Six gradient channel weights")->expected(6);
    c->add_option("--window-radius", df.window_radius, "Side r of the r x r scoring window (odd)");
    c->add_option("--sosa-lambda", df.sosa_lambda, "sosa decay");
    c->add_option("--noise", df.noise, "Velocity noise level (fraction of the velocity norm)");
    c->add_option("--max-count", df.max_count, "Events per window at most");
    c->add_option("--max-interval", df.max_interval, "Seconds per window at most");
    c->add_option("--max-depth", df.max_depth, "Evaluation depth cap (m)");
  };
  CLI::App* depth = app.add_subcommand("depth", "Estimate one depth map per event window");
  add_depth_flags(depth);

  EvalFlags ef;
  CLI::App* eval = app.add_subcommand("eval", "Score depth maps against ground truth");
  eval->add_option("--pred", ef.pred, "Directory of predicted .pfm maps");
  eval->add_option("--truth", ef.truth, "Directory of ground-truth .pfm maps");
  eval->add_option("--max-depth", ef.max_depth, "Truth beyond this depth is ignored (m)");
  eval->add_option("--out", ef.out, "Report JSON path (default: <pred>/eval.json)");

  AblateFlags af;
  CLI::App* ablate = app.add_subcommand("ablate", "Velocity-noise ablation over levels and seeds");
  add_depth_flags(ablate);
  ablate->add_option("--levels", af.levels, "Noise levels, e.g. 0 0.1 0.2 0.5 1");
  ablate->add_option("--seeds", af.seeds, "Noise seeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*sim) return run_simulate(g, sf);
    if (*depth) return run_depth(g, df);
    if (*eval) return run_eval(g, ef);
    if (*ablate) return run_ablate(g, df, af);
  } catch (const ConfigError& err) {
    std::cerr << "evfocus: " << err.what() << '\n';
    return kExitConfig;
  } catch (const io::FormatError& err) {
    std::cerr << "evfocus: " << err.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& err) {
    std::cerr << "evfocus: " << err.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
