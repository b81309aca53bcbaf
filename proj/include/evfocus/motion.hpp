#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "evfocus/events.hpp"
#include "evfocus/grid.hpp"

namespace evfocus {

struct CameraIntrinsics {
  double f = 0.0;
  double cu = 0.0;
  double cv = 0.0;
  int width = 0;
  int height = 0;

  void validate() const {
    if (!(f > 0.0) || !std::isfinite(f)) throw std::invalid_argument("focal length must be positive and finite");
    if (width <= 0 || height <= 0) throw std::invalid_argument("resolution must be positive");
    if (!(cu > 0.0 && cu < width)) throw std::invalid_argument("principal point cu must lie in (0, width)");
    if (!(cv > 0.0 && cv < height)) throw std::invalid_argument("principal point cv must lie in (0, height)");
  }
};

/// Camera velocity at time t: linear (m/s) and angular (rad/s).
struct VelocitySample {
  double t = 0.0;
  Eigen::Vector3d linear = Eigen::Vector3d::Zero();
  Eigen::Vector3d angular = Eigen::Vector3d::Zero();

  [[nodiscard]] bool finite() const { return linear.allFinite() && angular.allFinite() && std::isfinite(t); }
};

struct Flow {
  double du = 0.0;
  double dv = 0.0;

  bool operator==(const Flow&) const = default;
};

/// Per-pixel image velocity (px/s) for one depth hypothesis.
using FlowField = Grid<Flow>;

struct WarpedEvent {
  double x = 0.0;
  double y = 0.0;
};

/// Motion-field velocity at a (possibly sub-pixel) position for depth d.
///
/// The rotational block uses f*v' in the first row's third column, the
/// standard form whose scaling agrees with the second row.
inline Flow flow_at(const CameraIntrinsics& cam, const VelocitySample& vel, double d, double u, double v) {
  const double up = u - cam.cu;
  const double vp = v - cam.cv;
  const double f = cam.f;
  const Eigen::Vector3d& T = vel.linear;
  const Eigen::Vector3d& w = vel.angular;

  const double inv_d = 1.0 / d;
  const double trans_u = inv_d * (-f * T.x() + up * T.z());
  const double trans_v = inv_d * (-f * T.y() + vp * T.z());
  const double rot_u = (up * vp * w.x() - (f * f + up * up) * w.y() + f * vp * w.z()) / f;
  const double rot_v = ((f * f + vp * vp) * w.x() - up * vp * w.y() - f * up * w.z()) / f;
  return {trans_u + rot_u, trans_v + rot_v};
}

inline FlowField motion_field(const CameraIntrinsics& cam, const VelocitySample& vel, double d) {
  if (!(d > 0.0)) throw std::invalid_argument("depth hypothesis must be positive");
  if (!vel.finite()) throw std::invalid_argument("velocity must be finite");
  FlowField field(cam.width, cam.height);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) field(x, y) = flow_at(cam, vel, d, x, y);
  }
  return field;
}

/// Moves every event to the window's reference time along the flow sampled
/// at its own pixel: p' = p + V(p) * (t - t_ref).
inline std::vector<WarpedEvent> warp_events(const EventWindow& window, const FlowField& flow) {
  std::vector<WarpedEvent> warped;
  warped.reserve(window.size());
  for (const Event& e : window.events) {
    const double dt = e.t - window.t_ref;
    const Flow& v = flow(e.px(), e.py());
    warped.push_back({e.x + v.du * dt, e.y + v.dv * dt});
  }
  return warped;
}

namespace detail {

inline Eigen::Matrix<double, 6, 1> stacked(const VelocitySample& s) {
  Eigen::Matrix<double, 6, 1> out;
  out << s.linear, s.angular;
  return out;
}

inline Eigen::Matrix<double, 6, 1> value_at(std::span<const VelocitySample> track, double t) {
  if (t <= track.front().t) return stacked(track.front());
  if (t >= track.back().t) return stacked(track.back());
  const auto upper = std::upper_bound(track.begin(), track.end(), t,
                                      [](double value, const VelocitySample& s) { return value < s.t; });
  const VelocitySample& b = *upper;
  const VelocitySample& a = *(upper - 1);
  const double alpha = (t - a.t) / (b.t - a.t);
  return (1.0 - alpha) * stacked(a) + alpha * stacked(b);
}

inline void check_track(std::span<const VelocitySample> track) {
  if (track.empty()) throw std::invalid_argument("velocity track is empty");
  for (std::size_t i = 1; i < track.size(); ++i) {
    if (!(track[i].t > track[i - 1].t)) {
      throw std::invalid_argument("velocity track timestamps must be strictly increasing");
    }
  }
}

}  // namespace detail

/// Time average over [t_a, t_b] of the piecewise-linear interpolant of the
/// track, holding the end samples constant outside its range.
inline VelocitySample interpolate_velocity(std::span<const VelocitySample> track, double t_a, double t_b) {
  detail::check_track(track);
  if (t_b < t_a) throw std::invalid_argument("interpolation interval is reversed");

  Eigen::Matrix<double, 6, 1> mean;
  if (t_b == t_a) {
    mean = detail::value_at(track, t_a);
  } else {
    // The interpolant is linear between consecutive breakpoints, so the
    // trapezoid rule over them is exact.
    std::vector<double> knots{t_a};
    for (const VelocitySample& s : track) {
      if (s.t > t_a && s.t < t_b) knots.push_back(s.t);
    }
    knots.push_back(t_b);
    Eigen::Matrix<double, 6, 1> integral = Eigen::Matrix<double, 6, 1>::Zero();
    for (std::size_t i = 1; i < knots.size(); ++i) {
      integral += 0.5 * (knots[i] - knots[i - 1]) *
                  (detail::value_at(track, knots[i - 1]) + detail::value_at(track, knots[i]));
    }
    mean = integral / (t_b - t_a);
  }

  VelocitySample out;
  out.t = 0.5 * (t_a + t_b);
  out.linear = mean.head<3>();
  out.angular = mean.tail<3>();
  return out;
}

/// Norms that scale velocity noise: the mean of ||T|| and ||w|| over the
/// samples inside [t_a, t_b], or of the interval average when none fall inside.
struct VelocityNorms {
  double linear = 0.0;
  double angular = 0.0;
};

inline VelocityNorms mean_norms(std::span<const VelocitySample> track, double t_a, double t_b) {
  detail::check_track(track);
  VelocityNorms norms;
  std::size_t inside = 0;
  for (const VelocitySample& s : track) {
    if (s.t >= t_a && s.t <= t_b) {
      norms.linear += s.linear.norm();
      norms.angular += s.angular.norm();
      ++inside;
    }
  }
  if (inside == 0) {
    const VelocitySample avg = interpolate_velocity(track, t_a, t_b);
    return {avg.linear.norm(), avg.angular.norm()};
  }
  norms.linear /= static_cast<double>(inside);
  norms.angular /= static_cast<double>(inside);
  return norms;
}

/// Counter-based normal generator: the k-th draw for a key depends only on
/// (key, k), so concurrent callers never share state.
class CounterNormal {
public:
  explicit CounterNormal(std::uint64_t key) : key_(mix(key ^ 0x6a09e667f3bcc908ULL)) {}

  [[nodiscard]] double operator()(std::uint64_t counter) const {
    // Box-Muller on two independent uniforms in (0, 1].
    const double u1 = uniform(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

private:
  [[nodiscard]] double uniform(std::uint64_t counter) const {
    const std::uint64_t bits = mix(key_ + mix(counter));
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
  }

  std::uint64_t key_;
};

/// Adds zero-mean Gaussian noise with standard deviation level*||T|| to each
/// linear component and level*||w|| to each angular component.
inline VelocitySample inject_velocity_noise(const VelocitySample& vel, double level, std::uint64_t seed,
                                            const VelocityNorms& norms) {
  if (!(level >= 0.0)) throw std::invalid_argument("noise level must be non-negative");
  if (level == 0.0) return vel;
  const CounterNormal normal(seed);
  VelocitySample out = vel;
  for (int i = 0; i < 3; ++i) {
    out.linear[i] += level * norms.linear * normal(static_cast<std::uint64_t>(i));
    out.angular[i] += level * norms.angular * normal(static_cast<std::uint64_t>(3 + i));
  }
  return out;
}

inline VelocitySample inject_velocity_noise(const VelocitySample& vel, double level, std::uint64_t seed) {
  return inject_velocity_noise(vel, level, seed, {vel.linear.norm(), vel.angular.norm()});
}

}  // namespace evfocus
