#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "evfocus/config.hpp"
#include "evfocus/io.hpp"
#include "scenarios.hpp"

using namespace evfocus;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("evfocus_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(EventsText, ParsesCommentsAndDecimalCoordinates) {
  std::istringstream in("# t u v p\n0.001 3 4 1\n\n0.002 3.25 4.5 0  # trailing\n");
  const auto ev = io::parse_events_text(in);
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_EQ(ev[1].x, 3.25);
  EXPECT_EQ(ev[1].y, 4.5);
  EXPECT_TRUE(ev[0].polarity);
  EXPECT_FALSE(ev[1].polarity);
}

TEST(EventsText, RejectsMalformedLines) {
  for (const char* bad : {"0.1 2 3\n", "0.1 2 3 2\n", "x 2 3 1\n", "0.1 2 3 1 9\n", "0.1 nan 3 1\n"}) {
    std::istringstream in(bad);
    EXPECT_THROW((void)io::parse_events_text(in), io::FormatError) << bad;
  }
}

TEST(EventsText, SyntheticStreamRoundTripsExactly) {
  const auto s = evfocus::testing::plane_scene();
  std::stringstream buf;
  io::write_events_text(buf, s.data.window.events);
  EXPECT_EQ(io::parse_events_text(buf), s.data.window.events);
}

TEST(EventsBinary, RoundTripsIntegerStreams) {
  const std::vector<Event> ev{{0.125, 3, 4, true}, {0.25, 345, 259, false}, {1e-7, 0, 0, true}};
  std::stringstream buf;
  io::write_events_binary(buf, ev);
  EXPECT_EQ(buf.str().size(), ev.size() * io::kBinaryRecord);
  EXPECT_EQ(io::parse_events_binary(buf), ev);
}

TEST(EventsBinary, RejectsSubPixelAndTruncatedInput) {
  std::stringstream buf;
  EXPECT_THROW(io::write_events_binary(buf, std::vector<Event>{{0.0, 1.5, 2, true}}), std::invalid_argument);
  std::istringstream truncated(std::string(io::kBinaryRecord + 3, '\0'));
  EXPECT_THROW((void)io::parse_events_binary(truncated), io::FormatError);
}

TEST(EventsFile, ExtensionSelectsFormat) {
  const fs::path dir = temp_dir("events");
  const std::vector<Event> ev{{0.5, 1, 2, true}, {0.75, 3, 4, false}};
  for (const char* name : {"a.txt", "a.bin"}) {
    io::write_events(dir / name, ev);
    EXPECT_EQ(io::read_events(dir / name), ev);
  }
  EXPECT_THROW((void)io::read_events(dir / "missing.txt"), io::FormatError);
}

TEST(Velocity, TrackRoundTrips) {
  std::vector<VelocitySample> track(3);
  for (int i = 0; i < 3; ++i) {
    track[static_cast<std::size_t>(i)].t = 0.1 * i;
    track[static_cast<std::size_t>(i)].linear = {1.0 / 3.0 + i, -0.2, 1e-9};
    track[static_cast<std::size_t>(i)].angular = {0.0, 0.7, -i * 0.01};
  }
  std::stringstream buf;
  io::write_velocity_track(buf, track);
  const auto back = io::parse_velocity_track(buf);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].t, track[i].t);
    EXPECT_EQ(back[i].linear, track[i].linear);
    EXPECT_EQ(back[i].angular, track[i].angular);
  }
  std::istringstream unordered("0.2 1 0 0 0 0 0\n0.1 1 0 0 0 0 0\n");
  EXPECT_THROW((void)io::parse_velocity_track(unordered), io::FormatError);
}

TEST(Images, PfmRoundTripsAndKeepsOrientation) {
  const fs::path dir = temp_dir("pfm");
  Image img(3, 2);
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 3; ++x) img(x, y) = 10.0 * y + x + 0.5;
  }
  img(2, 1) = DepthMap::kInvalidDepth;
  io::write_pfm(dir / "d.pfm", img);
  EXPECT_EQ(io::read_pfm(dir / "d.pfm"), img);
}

TEST(Images, PgmRoundTripsAndMasksEncodeState) {
  const fs::path dir = temp_dir("pgm");
  DepthMap m(2, 2);
  m.state(0, 0) = PixelState::Measured;
  m.state(1, 1) = PixelState::Filled;
  const auto mask = io::depth_mask(m);
  EXPECT_EQ(mask(0, 0), io::kMaskMeasured);
  EXPECT_EQ(mask(1, 1), io::kMaskFilled);
  EXPECT_EQ(mask(1, 0), 0);
  io::write_pgm(dir / "m.pgm", mask);
  EXPECT_EQ(io::read_pgm(dir / "m.pgm"), mask);
}

TEST(Camera, JsonValidation) {
  EXPECT_NO_THROW((void)io::camera_from_json({{"f", 200}, {"cu", 31.5}, {"cv", 31.5}, {"width", 64}, {"height", 64}}));
  EXPECT_THROW((void)io::camera_from_json({{"f", -1}, {"cu", 31.5}, {"cv", 31.5}, {"width", 64}, {"height", 64}}),
               io::FormatError);
  EXPECT_THROW((void)io::camera_from_json({{"f", 200}, {"cu", 31.5}}), io::FormatError);
}

TEST(Scene, JsonRoundTrip) {
  io::SceneFile sf;
  sf.scene.geometry = SceneGeometry::TwoPlanes;
  sf.scene.depth2 = 25.0;
  sf.scene.split_column = 20;
  sf.texture.num_edges = 5;
  const io::SceneFile back = io::scene_from_json(io::scene_to_json(sf));
  EXPECT_EQ(back.scene.geometry, SceneGeometry::TwoPlanes);
  EXPECT_EQ(back.scene.depth2, 25.0);
  EXPECT_EQ(back.texture.num_edges, 5);
  EXPECT_FALSE(back.explicit_edges);
  EXPECT_THROW((void)io::scene_from_json({{"geometry", "sphere"}}), io::FormatError);
  EXPECT_THROW((void)io::scene_from_json({{"edges", {{1, 2}}}}), io::FormatError);
}

TEST(RunConfigJson, RoundTripsAndResolvesRelativePaths) {
  const io::Json j = {{"events", "ev.txt"},
                      {"hypotheses", {{"dmin", 1.5}, {"dmax", 30}, {"count", 40}, {"sampling", "linear"}}},
                      {"objective", {{"kind", "sosa"}, {"window", 3}, {"sosa_lambda", 0.5}}},
                      {"aggregation", {{"scales", 2}, {"scale_weights", {1.0, 0.5}}, {"fill", "median-window"}}},
                      {"noise", {{"level", 0.2}, {"seed", 99}}}};
  const RunConfig c = run_config_from_json(j, "/data/run");
  EXPECT_EQ(c.events, fs::path("/data/run/ev.txt"));
  EXPECT_EQ(c.num_hypotheses, 40);
  EXPECT_EQ(c.sampling, Sampling::Linear);
  EXPECT_EQ(c.pipeline.sweep.objective.kind, ObjectiveKind::Sosa);
  EXPECT_EQ(c.pipeline.fill, FillPolicy::MedianWindow);
  EXPECT_EQ(c.seed, 99u);

  const RunConfig back = run_config_from_json(run_config_to_json(c), "/elsewhere");
  EXPECT_EQ(back.events, c.events);
  EXPECT_EQ(run_config_to_json(back), run_config_to_json(c));
}

TEST(RunConfigJson, DefaultsMatchLibraryDefaults) {
  const RunConfig c = run_config_from_json(io::Json::object(), "/");
  EXPECT_EQ(c.num_hypotheses, 64);
  EXPECT_EQ(c.dmin, 2.0);
  EXPECT_EQ(c.dmax, 80.0);
  EXPECT_EQ(c.pipeline.sweep.num_scales, 1);
  EXPECT_EQ(c.window.max_count, 80000u);
  EXPECT_EQ(c.window.max_interval, 0.2);
}

TEST(RunConfigJson, RejectsInvalidParameters) {
  const std::vector<io::Json> bad = {
      {{"hypotheses", {{"count", 0}}}},
      {{"hypotheses", {{"dmin", 10}, {"dmax", 5}}}},
      {{"objective", {{"kind", "magic"}}}},
      {{"objective", {{"window", 4}}}},
      {{"objective", {{"weights", {1, 1}}}}},
      {{"aggregation", {{"scales", 2}, {"scale_weights", {1.0}}}}},
      {{"aggregation", {{"peak_alpha", 2.0}}}},
      {{"window", {{"max_count", 0}}}},
      {{"noise", {{"level", -0.1}}}},
      {{"hypotheses", {{"count", "many"}}}},
  };
  for (const io::Json& j : bad) EXPECT_THROW((void)run_config_from_json(j, "/"), io::FormatError) << j.dump();
}

TEST(SimConfigJson, RoundTripAndValidation) {
  SimConfig c;
  c.seed = 12;
  c.generator.emission = Emission::Crossing;
  const SimConfig back = sim_config_from_json(sim_config_to_json(c), "/");
  EXPECT_EQ(back.seed, 12u);
  EXPECT_EQ(back.generator.emission, Emission::Crossing);
  EXPECT_EQ(sim_config_to_json(back), sim_config_to_json(c));
  EXPECT_THROW((void)sim_config_from_json({{"format", "binary"}}, "/"), io::FormatError);
  EXPECT_NO_THROW((void)sim_config_from_json({{"format", "binary"}, {"generator", {{"quantize", true}}}}, "/"));
  EXPECT_THROW((void)sim_config_from_json({{"velocity", {{"linear", {1, 0}}}}}, "/"), io::FormatError);
}
