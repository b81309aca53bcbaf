#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "evfocus/pipeline.hpp"
#include "evfocus/synth.hpp"

namespace evfocus::testing {

/// 64x64 sensor, f = 200 px, principal point at the centre.
inline CameraIntrinsics desk_camera() { return {200.0, 31.5, 31.5, 64, 64}; }

inline VelocitySample lateral(double speed = 1.0) {
  VelocitySample v;
  v.linear = {speed, 0.0, 0.0};
  return v;
}

struct Scenario {
  CameraIntrinsics camera;
  VelocitySample velocity;
  SceneSpec scene;
  SyntheticWindow data;
};

/// Textured plane at 10 m, 0.1 s of lateral motion at 1 m/s, zero jitter.
inline Scenario plane_scene(std::uint64_t texture_seed = 3, std::uint64_t event_seed = 7, int events_per_edge = 20) {
  Scenario s{desk_camera(), lateral(), {}, {}};
  s.scene.depth = 10.0;
  build_texture(s.scene, s.camera, TextureParams{}, texture_seed);
  GeneratorParams gp;
  gp.events_per_edge = events_per_edge;
  s.data = generate(s.scene, s.camera, s.velocity, gp, event_seed);
  return s;
}

/// Left half at 10 m, right half (from column 32) at 20 m.
inline Scenario two_plane_scene() {
  Scenario s{desk_camera(), lateral(), {}, {}};
  s.scene.geometry = SceneGeometry::TwoPlanes;
  s.scene.depth = 10.0;
  s.scene.depth2 = 20.0;
  s.scene.split_column = 32;
  build_texture(s.scene, s.camera, TextureParams{}, 3);
  GeneratorParams gp;
  gp.events_per_edge = 20;
  s.data = generate(s.scene, s.camera, s.velocity, gp, 7);
  return s;
}

/// Eight vertical stripes 3 px apart at 10 m with crossing emission: under
/// the hypothesis whose displacement differs from the truth by one period,
/// neighbouring stripes stack on top of each other.
inline Scenario stripe_scene() {
  Scenario s{desk_camera(), lateral(), {}, {}};
  s.scene.geometry = SceneGeometry::Stripes;
  s.scene.depth = 10.0;
  s.scene.stripe_period = 3.0;
  TextureParams tex;
  tex.stripe_count = 8;
  tex.stripe_start = 20.0;
  build_texture(s.scene, s.camera, tex, 3);
  GeneratorParams gp;
  gp.emission = Emission::Crossing;
  gp.events_per_edge = 5;
  s.data = generate(s.scene, s.camera, s.velocity, gp, 7);
  return s;
}

/// Reference-time pixel positions of the scene's edge samples.
inline std::vector<Eigen::Vector2d> reference_points(const Scenario& s) {
  std::vector<Eigen::Vector2d> out;
  for (const Eigen::Vector3d& p : s.scene.edges) {
    out.emplace_back(s.camera.f * p.x() / p.z() + s.camera.cu, s.camera.f * p.y() / p.z() + s.camera.cv);
  }
  return out;
}

/// Largest bounding-box diagonal over the clusters formed by assigning each
/// warped event to its nearest reference point.
inline double trajectory_spread(std::span<const WarpedEvent> warped, const std::vector<Eigen::Vector2d>& refs) {
  std::vector<Eigen::Vector4d> box(refs.size(), Eigen::Vector4d(INFINITY, INFINITY, -INFINITY, -INFINITY));
  for (const WarpedEvent& w : warped) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < refs.size(); ++i) {
      if ((refs[i] - Eigen::Vector2d(w.x, w.y)).squaredNorm() < (refs[best] - Eigen::Vector2d(w.x, w.y)).squaredNorm()) {
        best = i;
      }
    }
    Eigen::Vector4d& b = box[best];
    b = Eigen::Vector4d(std::min(b[0], w.x), std::min(b[1], w.y), std::max(b[2], w.x), std::max(b[3], w.y));
  }
  double spread = 0.0;
  for (const Eigen::Vector4d& b : box) {
    if (b[0] <= b[2]) spread = std::max(spread, std::hypot(b[2] - b[0], b[3] - b[1]));
  }
  return spread;
}

/// 32 inverse-depth hypotheses over [2, 50] m.
inline HypothesisSet sweep_hypotheses(std::size_t count = 32) { return HypothesisSet::make(2.0, 50.0, count); }

}  // namespace evfocus::testing
