#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evfocus/grid.hpp"
#include "evfocus/iwe.hpp"

namespace evfocus {

/// First- and second-order derivative maps of an image plus the Gxx*Gyy
/// product channel, in the fixed order x, y, xx, yy, xy, xx*yy.
struct GradientStack {
  static constexpr int kChannels = 6;
  std::array<Image, kChannels> channels;

  Image& gx() { return channels[0]; }
  Image& gy() { return channels[1]; }
  Image& gxx() { return channels[2]; }
  Image& gyy() { return channels[3]; }
  Image& gxy() { return channels[4]; }
  Image& gxx_gyy() { return channels[5]; }
  const Image& gx() const { return channels[0]; }
  const Image& gy() const { return channels[1]; }
  const Image& gxx() const { return channels[2]; }
  const Image& gyy() const { return channels[3]; }
  const Image& gxy() const { return channels[4]; }
  const Image& gxx_gyy() const { return channels[5]; }
};

struct FocusWeights {
  std::array<double, GradientStack::kChannels> w{1.0, 1.0, 1.0, 1.0, 1.0, 1.0};

  void validate() const {
    if (std::none_of(w.begin(), w.end(), [](double v) { return v != 0.0; })) {
      throw std::invalid_argument("at least one focus weight must be nonzero");
    }
    if (std::any_of(w.begin(), w.end(), [](double v) { return !std::isfinite(v); })) {
      throw std::invalid_argument("focus weights must be finite");
    }
  }
};

namespace detail {

// Derivatives along one axis of a line of n samples read through `at`;
// central in the interior, one-sided at the two ends.
template <typename At>
double first_difference(At at, int i, int n) {
  if (i == 0) return at(1) - at(0);
  if (i == n - 1) return at(n - 1) - at(n - 2);
  return 0.5 * (at(i + 1) - at(i - 1));
}

template <typename At>
double second_difference(At at, int i, int n) {
  if (i == 0) return at(0) - 2.0 * at(1) + at(2);
  if (i == n - 1) return at(n - 1) - 2.0 * at(n - 2) + at(n - 3);
  return at(i + 1) - 2.0 * at(i) + at(i - 1);
}

}  // namespace detail

inline GradientStack gradient_stack(const Image& img) {
  const int w = img.width();
  const int h = img.height();
  if (w < 3 || h < 3) throw std::invalid_argument("gradient stack needs at least a 3x3 image");

  GradientStack s;
  for (Image& c : s.channels) c = Image(w, h);
  for (int y = 0; y < h; ++y) {
    auto row = [&](int x) { return img(x, y); };
    for (int x = 0; x < w; ++x) {
      s.gx()(x, y) = detail::first_difference(row, x, w);
      s.gxx()(x, y) = detail::second_difference(row, x, w);
    }
  }
  for (int x = 0; x < w; ++x) {
    auto col = [&](int y) { return img(x, y); };
    auto gx_col = [&](int y) { return s.gx()(x, y); };
    for (int y = 0; y < h; ++y) {
      s.gy()(x, y) = detail::first_difference(col, y, h);
      s.gyy()(x, y) = detail::second_difference(col, y, h);
      s.gxy()(x, y) = detail::first_difference(gx_col, y, h);
    }
  }
  auto prod = s.gxx_gyy().data();
  auto gxx = s.gxx().data();
  auto gyy = s.gyy().data();
  for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = gxx[i] * gyy[i];
  return s;
}

/// R = sum_X w_X * |G_X|.
inline Image combine(const GradientStack& stack, const FocusWeights& weights) {
  weights.validate();
  const Image& first = stack.channels[0];
  Image r(first.width(), first.height());
  auto out = r.data();
  for (int c = 0; c < GradientStack::kChannels; ++c) {
    const double wc = weights.w[static_cast<std::size_t>(c)];
    if (wc == 0.0) continue;
    auto in = stack.channels[static_cast<std::size_t>(c)].data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += wc * std::abs(in[i]);
  }
  return r;
}

/// Sum of `img` over the side x side window centred on each pixel, clipped
/// at the borders. Separable, and never subtracts, so zeros stay exact.
inline Image box_sum(const Image& img, int side) {
  if (side < 1 || side % 2 == 0) throw std::invalid_argument("window side must be a positive odd integer");
  const int half = side / 2;
  const int w = img.width();
  const int h = img.height();
  Image rows(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int q = std::max(0, x - half); q <= std::min(w - 1, x + half); ++q) acc += img(q, y);
      rows(x, y) = acc;
    }
  }
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int q = std::max(0, y - half); q <= std::min(h - 1, y + half); ++q) acc += rows(x, q);
      out(x, y) = acc;
    }
  }
  return out;
}

/// C(p) = sqrt(sum over the side x side window at p of R(q)^2).
inline Image window_energy(const Image& r, int side) {
  Image squared = r;
  for (double& v : squared.data()) v *= v;
  Image c = box_sum(squared, side);
  for (double& v : c.data()) v = std::sqrt(v);
  return c;
}

/// Separable Gaussian blur; the kernel is renormalised where it is clipped
/// by the border, so constant images stay constant. sigma <= 0 is a no-op.
inline Image gaussian_blur(const Image& img, double sigma) {
  if (!(sigma > 0.0)) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
  }
  const int w = img.width();
  const int h = img.height();
  auto pass = [&](const Image& in, bool horizontal) {
    Image out(w, h);
    const int n = horizontal ? w : h;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int c = horizontal ? x : y;
        double acc = 0.0;
        double norm = 0.0;
        for (int q = std::max(0, c - radius); q <= std::min(n - 1, c + radius); ++q) {
          const double k = kernel[static_cast<std::size_t>(q - c + radius)];
          acc += k * (horizontal ? in(q, y) : in(x, q));
          norm += k;
        }
        out(x, y) = acc / norm;
      }
    }
    return out;
  };
  return pass(pass(img, true), false);
}

enum class ObjectiveKind { Fcd, Var, Sti, Soe, Sosa };

inline ObjectiveKind parse_objective(std::string_view name) {
  if (name == "fcd") return ObjectiveKind::Fcd;
  if (name == "var") return ObjectiveKind::Var;
  if (name == "sti") return ObjectiveKind::Sti;
  if (name == "soe") return ObjectiveKind::Soe;
  if (name == "sosa") return ObjectiveKind::Sosa;
  throw std::invalid_argument("unknown objective '" + std::string(name) + "'");
}

inline std::string_view objective_name(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::Fcd: return "fcd";
    case ObjectiveKind::Var: return "var";
    case ObjectiveKind::Sti: return "sti";
    case ObjectiveKind::Soe: return "soe";
    case ObjectiveKind::Sosa: return "sosa";
  }
  return "?";
}

struct ObjectiveParams {
  ObjectiveKind kind = ObjectiveKind::Fcd;
  FocusWeights weights;
  int window = 5;
  double sosa_lambda = 1.0;
  /// Gaussian blur applied to the IWE before the gradient stack (fcd only).
  double fcd_sigma = 1.0;

  void validate() const {
    if (!(fcd_sigma >= 0.0) || !std::isfinite(fcd_sigma)) throw std::invalid_argument("fcd sigma must be non-negative");
    weights.validate();
    if (window < 1 || window % 2 == 0) throw std::invalid_argument("window side must be a positive odd integer");
    if (!(sosa_lambda > 0.0) || !std::isfinite(sosa_lambda)) throw std::invalid_argument("sosa lambda must be positive");
  }
};

/// Scalar focus score (higher = more focused) plus a per-pixel score map.
///
/// For fcd the map is the windowed gradient energy C and the scalar its sum.
/// For the other kinds the map is the window sum of each pixel's
/// contribution to the scalar, shifted where needed so it stays non-negative
/// without changing which hypothesis scores best.
struct ObjectiveResult {
  double value = 0.0;
  Image map;
};

namespace detail {

// Exponent cap keeping soe finite on dense pixels.
inline constexpr double kMaxExponent = 700.0;

inline Image mean_offset(const Iwe& iwe) {
  if (iwe.time_sum.empty()) throw std::invalid_argument("sti needs per-event timestamp offsets");
  Image mean(iwe.width(), iwe.height());
  auto mass = iwe.grid.data();
  auto tsum = iwe.time_sum.data();
  auto out = mean.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mass[i] > 0.0 ? tsum[i] / mass[i] : 0.0;
  return mean;
}

}  // namespace detail

/// `t_span` bounds |t - t_ref| over the window; sti uses it to keep its map
/// non-negative.
inline ObjectiveResult objective(const Iwe& iwe, const ObjectiveParams& params, double t_span = 0.0) {
  params.validate();
  const Image& img = iwe.grid;
  ObjectiveResult result;
  Image terms(img.width(), img.height());
  auto in = img.data();
  auto out = terms.data();
  const double n = static_cast<double>(in.size());

  switch (params.kind) {
    case ObjectiveKind::Fcd: {
      result.map = window_energy(combine(gradient_stack(gaussian_blur(img, params.fcd_sigma)), params.weights),
                                 params.window);
      result.value = grid_sum(result.map);
      return result;
    }
    case ObjectiveKind::Var: {
      const double mu = grid_sum(img) / n;
      double acc = 0.0;
      for (std::size_t i = 0; i < in.size(); ++i) {
        out[i] = (in[i] - mu) * (in[i] - mu);
        acc += out[i];
      }
      result.value = acc / n;
      break;
    }
    case ObjectiveKind::Sti: {
      const Image mean = detail::mean_offset(iwe);
      auto m = mean.data();
      double acc = 0.0;
      for (std::size_t i = 0; i < m.size(); ++i) {
        acc += m[i] * m[i];
        out[i] = t_span * t_span - m[i] * m[i];
      }
      result.value = -acc;
      break;
    }
    case ObjectiveKind::Soe: {
      double acc = 0.0;
      for (std::size_t i = 0; i < in.size(); ++i) {
        out[i] = std::expm1(std::min(in[i], detail::kMaxExponent));
        acc += out[i];
      }
      result.value = acc;
      break;
    }
    case ObjectiveKind::Sosa: {
      double acc = 0.0;
      for (std::size_t i = 0; i < in.size(); ++i) {
        out[i] = std::exp(-params.sosa_lambda * in[i]);
        acc += out[i];
      }
      result.value = acc;
      break;
    }
  }
  result.map = box_sum(terms, params.window);
  return result;
}

}  // namespace evfocus
