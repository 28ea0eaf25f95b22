#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "phrl/core.hpp"
#include "phrl/scene.hpp"

namespace phrl {

template <class T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> pixels;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), pixels(size_t(w) * h, fill) {}

  T& at(int x, int y) { return pixels[size_t(y) * width + x]; }
  const T& at(int x, int y) const { return pixels[size_t(y) * width + x]; }

  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height;
  }
  bool operator==(const Image&) const = default;
};

using GrayImage = Image<uint8_t>;   // [0, 255]
using DepthImage = Image<float>;    // meters, 0 = invalid
using RgbImage = Image<Rgb8>;
using MaskImage = Image<uint8_t>;   // 0 / 1

/// Aligned color + depth frame straight out of the renderer.
struct RgbdImage {
  RgbImage rgb;
  DepthImage depth;

  bool operator==(const RgbdImage&) const = default;
};

/// HSV with h in degrees [0, 360), s and v in [0, 1]. Hue may be given
/// outside the base interval (e.g. 380 for reds); it wraps.
struct Hsv {
  double h = 0.0, s = 0.0, v = 0.0;
};

inline Rgb8 hsv_to_rgb(const Hsv& hsv) {
  double h = std::fmod(hsv.h, 360.0);
  if (h < 0.0) h += 360.0;
  const double c = hsv.v * hsv.s;
  const double x = c * (1.0 - std::abs(std::fmod(h / 60.0, 2.0) - 1.0));
  const double m = hsv.v - c;
  double r = 0, g = 0, b = 0;
  switch (int(h / 60.0)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  auto u8 = [&](double v) { return uint8_t(std::lround(255.0 * (v + m))); };
  return {u8(r), u8(g), u8(b)};
}

inline Hsv rgb_to_hsv(const Rgb8& p) {
  const double r = p.r / 255.0, g = p.g / 255.0, b = p.b / 255.0;
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double d = mx - mn;
  Hsv out;
  out.v = mx;
  out.s = mx > 0.0 ? d / mx : 0.0;
  if (d > 0.0) {
    if (mx == r) out.h = 60.0 * std::fmod((g - b) / d + 6.0, 6.0);
    else if (mx == g) out.h = 60.0 * ((b - r) / d + 2.0);
    else out.h = 60.0 * ((r - g) / d + 4.0);
  }
  return out;
}

/// Rec.601 luma, the fixed grayscale conversion for policy input.
inline GrayImage to_grayscale(const RgbImage& rgb) {
  GrayImage g(rgb.width, rgb.height);
  for (size_t i = 0; i < rgb.pixels.size(); ++i) {
    const Rgb8 p = rgb.pixels[i];
    g.pixels[i] = static_cast<uint8_t>(
        std::lround(0.299 * p.r + 0.587 * p.g + 0.114 * p.b));
  }
  return g;
}

/// 2x box downsample; gray rounds to nearest, depth averages valid
/// samples only (0 when the whole cell is invalid).
inline GrayImage downsample2(const GrayImage& in) {
  GrayImage out(in.width / 2, in.height / 2);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      const int s = in.at(2 * x, 2 * y) + in.at(2 * x + 1, 2 * y) +
                    in.at(2 * x, 2 * y + 1) + in.at(2 * x + 1, 2 * y + 1);
      out.at(x, y) = static_cast<uint8_t>((s + 2) / 4);
    }
  return out;
}

inline DepthImage downsample2(const DepthImage& in) {
  DepthImage out(in.width / 2, in.height / 2);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      float sum = 0.0f;
      int n = 0;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const float d = in.at(2 * x + dx, 2 * y + dy);
          if (d > 0.0f) {
            sum += d;
            ++n;
          }
        }
      out.at(x, y) = n > 0 ? sum / n : 0.0f;
    }
  return out;
}

}  // namespace phrl
