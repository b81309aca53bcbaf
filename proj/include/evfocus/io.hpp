#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <iterator>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "evfocus/costvol.hpp"
#include "evfocus/events.hpp"
#include "evfocus/grid.hpp"
#include "evfocus/motion.hpp"
#include "evfocus/synth.hpp"

namespace evfocus::io {

using Json = nlohmann::json;

/// Malformed or unreadable input. Callers treat it as a configuration error.
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::ifstream open_in(const std::filesystem::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw FormatError("cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Line with any `#` comment removed, trimmed.
inline std::string_view content(std::string_view line) { return trim(line.substr(0, line.find('#'))); }

inline std::vector<std::string_view> fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t j = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > j) out.push_back(line.substr(j, i - j));
  }
  return out;
}

inline double to_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw FormatError(where + ": '" + std::string(s) + "' is not a finite number");
  }
  return v;
}

/// Shortest text that parses back to the same double.
inline std::string exact(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(const unsigned char* p) {
  std::array<unsigned char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace detail

// Events ----------------------------------------------------------------------

/// Text events: `t u v p` per line, `#` comments. Coordinates may carry a
/// fractional part (synthetic sub-pixel events); sensor data uses integers.
inline std::vector<Event> parse_events_text(std::istream& in, const std::string& name = "events") {
  std::vector<Event> events;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view s = detail::content(line);
    if (s.empty()) continue;
    const auto f = detail::fields(s);
    const std::string where = name + ":" + std::to_string(lineno);
    if (f.size() != 4) throw FormatError(where + ": expected 't u v p', got " + std::to_string(f.size()) + " fields");
    Event e;
    e.t = detail::to_double(f[0], where);
    e.x = detail::to_double(f[1], where);
    e.y = detail::to_double(f[2], where);
    if (f[3] == "0") {
      e.polarity = false;
    } else if (f[3] == "1") {
      e.polarity = true;
    } else {
      throw FormatError(where + ": polarity must be 0 or 1");
    }
    if (e.x < -0.5 || e.y < -0.5) throw FormatError(where + ": negative pixel coordinate");
    events.push_back(e);
  }
  return events;
}

inline void write_events_text(std::ostream& out, std::span<const Event> events) {
  out << "# t u v p\n";
  for (const Event& e : events) {
    out << detail::exact(e.t) << ' ' << detail::exact(e.x) << ' ' << detail::exact(e.y) << ' '
        << (e.polarity ? 1 : 0) << '\n';
  }
}

inline constexpr std::size_t kBinaryRecord = 8 + 2 + 2 + 1;

/// Binary events: little-endian (float64 t, uint16 u, uint16 v, uint8 p).
inline std::vector<Event> parse_events_binary(std::istream& in, const std::string& name = "events") {
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % kBinaryRecord != 0) {
    throw FormatError(name + ": size " + std::to_string(bytes.size()) + " is not a multiple of the " +
                      std::to_string(kBinaryRecord) + "-byte record");
  }
  std::vector<Event> events(bytes.size() / kBinaryRecord);
  for (std::size_t i = 0; i < events.size(); ++i) {
    const unsigned char* p = bytes.data() + i * kBinaryRecord;
    Event& e = events[i];
    e.t = detail::get_le<double>(p);
    e.x = detail::get_le<std::uint16_t>(p + 8);
    e.y = detail::get_le<std::uint16_t>(p + 10);
    if (p[12] > 1) throw FormatError(name + ": record " + std::to_string(i) + " has polarity " + std::to_string(p[12]));
    e.polarity = p[12] == 1;
    if (!std::isfinite(e.t)) throw FormatError(name + ": record " + std::to_string(i) + " has a non-finite time");
  }
  return events;
}

/// Throws when a coordinate is not an integer in the uint16 range.
inline void write_events_binary(std::ostream& out, std::span<const Event> events) {
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    for (double c : {e.x, e.y}) {
      if (c != std::floor(c) || c < 0.0 || c > 65535.0) {
        throw std::invalid_argument("event " + std::to_string(i) +
                                    " has a coordinate the binary format cannot hold; use the text format");
      }
    }
    detail::put_le<double>(out, e.t);
    detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(e.x));
    detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(e.y));
    detail::put_le<std::uint8_t>(out, e.polarity ? 1 : 0);
  }
}

inline bool is_binary_events(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  return ext == ".bin" || ext == ".dat";
}

inline std::vector<Event> read_events(const std::filesystem::path& path) {
  const bool binary = is_binary_events(path);
  std::ifstream in = detail::open_in(path, binary);
  return binary ? parse_events_binary(in, path.string()) : parse_events_text(in, path.string());
}

inline void write_events(const std::filesystem::path& path, std::span<const Event> events) {
  const bool binary = is_binary_events(path);
  std::ofstream out = detail::open_out(path, binary);
  if (binary) {
    write_events_binary(out, events);
  } else {
    write_events_text(out, events);
  }
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

// Velocity track ---------------------------------------------------------------

inline std::vector<VelocitySample> parse_velocity_track(std::istream& in, const std::string& name = "velocity") {
  std::vector<VelocitySample> track;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view s = detail::content(line);
    if (s.empty()) continue;
    const auto f = detail::fields(s);
    const std::string where = name + ":" + std::to_string(lineno);
    if (f.size() != 7) throw FormatError(where + ": expected 't tx ty tz wx wy wz'");
    VelocitySample v;
    v.t = detail::to_double(f[0], where);
    for (int i = 0; i < 3; ++i) {
      v.linear[i] = detail::to_double(f[static_cast<std::size_t>(1 + i)], where);
      v.angular[i] = detail::to_double(f[static_cast<std::size_t>(4 + i)], where);
    }
    track.push_back(v);
  }
  try {
    evfocus::detail::check_track(track);
  } catch (const std::invalid_argument& err) {
    throw FormatError(name + ": " + err.what());
  }
  return track;
}

inline void write_velocity_track(std::ostream& out, std::span<const VelocitySample> track) {
  out << "# t tx ty tz wx wy wz\n";
  for (const VelocitySample& v : track) {
    out << detail::exact(v.t);
    for (int i = 0; i < 3; ++i) out << ' ' << detail::exact(v.linear[i]);
    for (int i = 0; i < 3; ++i) out << ' ' << detail::exact(v.angular[i]);
    out << '\n';
  }
}

inline std::vector<VelocitySample> read_velocity_track(const std::filesystem::path& path) {
  std::ifstream in = detail::open_in(path);
  return parse_velocity_track(in, path.string());
}

inline void write_velocity_track(const std::filesystem::path& path, std::span<const VelocitySample> track) {
  std::ofstream out = detail::open_out(path);
  write_velocity_track(out, track);
}

// JSON ------------------------------------------------------------------------

inline Json read_json(const std::filesystem::path& path) {
  std::ifstream in = detail::open_in(path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& err) {
    throw FormatError(path.string() + ": " + err.what());
  }
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out = detail::open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

template <typename T>
T field(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw FormatError(where + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw FormatError(where + ": key '" + key + "' has the wrong type");
  }
}

template <typename T>
T field_or(const Json& j, const char* key, T fallback, const std::string& where) {
  return j.contains(key) ? field<T>(j, key, where) : fallback;
}

inline CameraIntrinsics camera_from_json(const Json& j, const std::string& where = "camera") {
  CameraIntrinsics cam{field<double>(j, "f", where), field<double>(j, "cu", where), field<double>(j, "cv", where),
                       field<int>(j, "width", where), field<int>(j, "height", where)};
  try {
    cam.validate();
  } catch (const std::invalid_argument& err) {
    throw FormatError(where + ": " + err.what());
  }
  return cam;
}

inline Json camera_to_json(const CameraIntrinsics& cam) {
  return {{"f", cam.f}, {"cu", cam.cu}, {"cv", cam.cv}, {"width", cam.width}, {"height", cam.height}};
}

inline CameraIntrinsics read_camera(const std::filesystem::path& path) {
  return camera_from_json(read_json(path), path.string());
}

/// Scene JSON: geometry and depths, plus either an explicit `edges` list of
/// camera-frame points or a `texture` block for the texture builder.
struct SceneFile {
  SceneSpec scene;
  TextureParams texture;
  bool explicit_edges = false;
};

inline SceneFile scene_from_json(const Json& j, const std::string& where = "scene") {
  SceneFile sf;
  SceneSpec& s = sf.scene;
  try {
    s.geometry = parse_geometry(field_or<std::string>(j, "geometry", "plane", where));
  } catch (const std::invalid_argument& err) {
    throw FormatError(where + ": " + err.what());
  }
  s.depth = field_or(j, "depth", s.depth, where);
  s.depth2 = field_or(j, "depth2", s.depth2, where);
  s.split_column = field_or(j, "split_column", s.split_column, where);
  s.stripe_period = field_or(j, "stripe_period", s.stripe_period, where);
  s.contrast_threshold = field_or(j, "contrast_threshold", s.contrast_threshold, where);
  if (j.contains("texture")) {
    const Json& t = j.at("texture");
    const std::string tw = where + ".texture";
    TextureParams& tex = sf.texture;
    tex.num_edges = field_or(t, "num_edges", tex.num_edges, tw);
    tex.min_separation = field_or(t, "min_separation", tex.min_separation, tw);
    tex.min_length = field_or(t, "min_length", tex.min_length, tw);
    tex.max_length = field_or(t, "max_length", tex.max_length, tw);
    tex.margin = field_or(t, "margin", tex.margin, tw);
    tex.stripe_count = field_or(t, "stripe_count", tex.stripe_count, tw);
    tex.stripe_start = field_or(t, "stripe_start", tex.stripe_start, tw);
    tex.stripe_row_begin = field_or(t, "stripe_row_begin", tex.stripe_row_begin, tw);
    tex.stripe_row_end = field_or(t, "stripe_row_end", tex.stripe_row_end, tw);
    if (tex.num_edges < 0 || tex.min_length < 1 || tex.max_length < tex.min_length || tex.stripe_count < 0) {
      throw FormatError(tw + ": inconsistent texture parameters");
    }
  }
  if (j.contains("edges")) {
    sf.explicit_edges = true;
    try {
      for (const auto& p : j.at("edges")) {
        const auto v = p.get<std::vector<double>>();
        if (v.size() != 3) throw FormatError(where + ": every edge point needs 3 coordinates");
        s.edges.emplace_back(v[0], v[1], v[2]);
      }
    } catch (const Json::exception&) {
      throw FormatError(where + ": 'edges' must be a list of [x, y, z] points");
    }
  }
  return sf;
}

inline Json scene_to_json(const SceneFile& sf) {
  const SceneSpec& s = sf.scene;
  Json j = {{"geometry", std::string(geometry_name(s.geometry))},
            {"depth", s.depth},
            {"depth2", s.depth2},
            {"split_column", s.split_column},
            {"stripe_period", s.stripe_period},
            {"contrast_threshold", s.contrast_threshold}};
  if (sf.explicit_edges) {
    Json edges = Json::array();
    for (const Eigen::Vector3d& p : s.edges) edges.push_back({p.x(), p.y(), p.z()});
    j["edges"] = edges;
  } else {
    const TextureParams& t = sf.texture;
    j["texture"] = {{"num_edges", t.num_edges},           {"min_separation", t.min_separation},
                    {"min_length", t.min_length},         {"max_length", t.max_length},
                    {"margin", t.margin},                 {"stripe_count", t.stripe_count},
                    {"stripe_start", t.stripe_start},     {"stripe_row_begin", t.stripe_row_begin},
                    {"stripe_row_end", t.stripe_row_end}};
  }
  return j;
}

// Images ----------------------------------------------------------------------

/// Single-channel PFM, little-endian, rows stored bottom to top.
inline void write_pfm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out = detail::open_out(path, true);
  out << "Pf\n" << img.width() << ' ' << img.height() << "\n-1.0\n";
  for (int y = img.height() - 1; y >= 0; --y) {
    for (int x = 0; x < img.width(); ++x) detail::put_le<float>(out, static_cast<float>(img(x, y)));
  }
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

inline Image read_pfm(const std::filesystem::path& path) {
  std::ifstream in = detail::open_in(path, true);
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  if (!in || magic != "Pf" || w <= 0 || h <= 0 || scale == 0.0) {
    throw FormatError(path.string() + ": not a single-channel PFM");
  }
  in.get();
  const bool little = scale < 0.0;
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 4);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw FormatError(path.string() + ": truncated PFM");
  Image img(w, h);
  std::size_t k = 0;
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x, k += 4) {
      unsigned char* p = bytes.data() + k;
      if (little != (std::endian::native == std::endian::little)) std::reverse(p, p + 4);
      float v;
      std::memcpy(&v, p, 4);
      img(x, y) = v;
    }
  }
  return img;
}

/// 8-bit binary PGM.
inline void write_pgm(const std::filesystem::path& path, const Grid<std::uint8_t>& img) {
  std::ofstream out = detail::open_out(path, true);
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  const auto d = img.data();
  out.write(reinterpret_cast<const char*>(d.data()), static_cast<std::streamsize>(d.size()));
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

inline Grid<std::uint8_t> read_pgm(const std::filesystem::path& path) {
  std::ifstream in = detail::open_in(path, true);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (!in || magic != "P5" || w <= 0 || h <= 0 || maxval != 255) throw FormatError(path.string() + ": not an 8-bit PGM");
  in.get();
  Grid<std::uint8_t> img(w, h);
  auto d = img.data();
  in.read(reinterpret_cast<char*>(d.data()), static_cast<std::streamsize>(d.size()));
  if (in.gcount() != static_cast<std::streamsize>(d.size())) throw FormatError(path.string() + ": truncated PGM");
  return img;
}

/// Scales an image into 8 bits by its maximum; an all-zero image stays black.
inline Grid<std::uint8_t> to_pgm(const Image& img) {
  double peak = 0.0;
  for (double v : img.data()) peak = std::max(peak, v);
  Grid<std::uint8_t> out(img.width(), img.height(), 0);
  if (peak <= 0.0) return out;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      out(x, y) = static_cast<std::uint8_t>(std::lround(255.0 * std::max(0.0, img(x, y)) / peak));
    }
  }
  return out;
}

inline constexpr std::uint8_t kMaskMeasured = 255;
inline constexpr std::uint8_t kMaskFilled = 128;

inline Grid<std::uint8_t> depth_mask(const DepthMap& map) {
  Grid<std::uint8_t> mask(map.width(), map.height(), 0);
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      const PixelState s = map.state(x, y);
      mask(x, y) = s == PixelState::Measured ? kMaskMeasured : s == PixelState::Filled ? kMaskFilled : 0;
    }
  }
  return mask;
}

}  // namespace evfocus::io
