#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "phrl/core.hpp"
#include "phrl/image.hpp"

namespace phrl {

enum class BlurKind { Gaussian, Motion, Median };
enum class FilterKind { Sharpen, Emboss };
enum class NoiseKind { Gaussian, Multiplicative };

namespace detail {

using Plane = Image<float>;

inline Plane to_plane(const GrayImage& g) {
  Plane p(g.width, g.height);
  for (size_t i = 0; i < g.pixels.size(); ++i) p.pixels[i] = float(g.pixels[i]);
  return p;
}

inline GrayImage to_gray(const Plane& p) {
  GrayImage g(p.width, p.height);
  for (size_t i = 0; i < p.pixels.size(); ++i)
    g.pixels[i] = uint8_t(std::clamp<long>(std::lround(double(p.pixels[i])), 0, 255));
  return g;
}

inline void clamp_plane(Plane& p, double lo, double hi) {
  for (float& v : p.pixels) v = float(std::clamp(double(v), lo, hi));
}

inline int reflect(int i, int n) { return std::clamp(i, 0, n - 1); }  // replicate pad

/// Dense 2-D convolution with replicate borders, plus flat offset.
inline Plane conv2(const Plane& in, const std::vector<double>& k, int n, double offset) {
  Plane out(in.width, in.height);
  const int c = n / 2;
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      double s = offset;
      for (int ky = 0; ky < n; ++ky)
        for (int kx = 0; kx < n; ++kx) {
          const double w = k[size_t(ky) * n + kx];
          if (w == 0.0) continue;
          s += w * in.at(reflect(x + kx - c, in.width), reflect(y + ky - c, in.height));
        }
      out.at(x, y) = float(s);
    }
  return out;
}

inline Plane conv_separable(const Plane& in, const std::vector<double>& k) {
  const int n = int(k.size()), c = n / 2;
  Plane mid(in.width, in.height), out(in.width, in.height);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * in.at(reflect(x + i - c, in.width), y);
      mid.at(x, y) = float(s);
    }
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * mid.at(x, reflect(y + i - c, in.height));
      out.at(x, y) = float(s);
    }
  return out;
}

inline std::vector<double> gaussian_kernel(int size) {
  if (size < 1 || size % 2 == 0) throw ConfigError("blur size must be odd and >= 1");
  if (size == 1) return {1.0};
  const double sigma = size / 6.0;
  std::vector<double> k(size);
  const int c = size / 2;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    k[i] = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

/// 1-pixel-wide line through the kernel center at the given angle,
/// rasterized one cell per column (or per row when steep), normalized.
inline std::vector<double> motion_kernel(int size, double angle) {
  if (size < 1 || size % 2 == 0) throw ConfigError("blur size must be odd and >= 1");
  std::vector<double> k(size_t(size) * size, 0.0);
  const int c = size / 2;
  const double dx = std::cos(angle), dy = std::sin(angle);
  int count = 0;
  if (std::abs(dx) >= std::abs(dy)) {
    for (int i = -c; i <= c; ++i) {
      const int px = c + i;
      const int py = c + int(std::lround(i * dy / dx));
      if (py < 0 || py >= size) continue;
      k[size_t(py) * size + px] = 1.0;
      ++count;
    }
  } else {
    for (int i = -c; i <= c; ++i) {
      const int py = c + i;
      const int px = c + int(std::lround(i * dx / dy));
      if (px < 0 || px >= size) continue;
      k[size_t(py) * size + px] = 1.0;
      ++count;
    }
  }
  for (double& v : k) v /= count;
  return k;
}

template <class T>
inline Image<T> median_filter(const Image<T>& in, int size) {
  if (size < 1 || size % 2 == 0) throw ConfigError("blur size must be odd and >= 1");
  if (size == 1) return in;
  Image<T> out(in.width, in.height);
  std::vector<T> window;
  window.reserve(size_t(size) * size);
  const int c = size / 2;
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      window.clear();
      for (int ky = -c; ky <= c; ++ky)
        for (int kx = -c; kx <= c; ++kx)
          window.push_back(in.at(reflect(x + kx, in.width), reflect(y + ky, in.height)));
      auto mid = window.begin() + window.size() / 2;
      std::nth_element(window.begin(), mid, window.end());
      out.at(x, y) = *mid;
    }
  return out;
}

inline std::vector<double> filter_kernel(FilterKind kind) {
  if (kind == FilterKind::Sharpen)
    return {0, -1, 0, -1, 5, -1, 0, -1, 0};
  return {-2, -1, 0, -1, 1, 1, 0, 1, 2};   // emboss (plus mid-level offset)
}

/// Histogram -> equalization mapping in float; identity when the
/// histogram is a single bin.
inline std::array<float, 256> eq_mapping(const std::array<long, 256>& hist, long total) {
  std::array<float, 256> map{};
  long cdf_min = 0;
  for (int v = 0; v < 256; ++v)
    if (hist[v] > 0) {
      cdf_min = hist[v];
      break;
    }
  if (total <= cdf_min) {            // constant region: leave values alone
    for (int v = 0; v < 256; ++v) map[v] = float(v);
    return map;
  }
  long cdf = 0;
  for (int v = 0; v < 256; ++v) {
    cdf += hist[v];
    map[v] = float(255.0 * double(cdf - cdf_min) / double(total - cdf_min));
  }
  return map;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Grayscale ops

inline GrayImage brightness_contrast(const GrayImage& in, double alpha, double beta) {
  GrayImage out(in.width, in.height);
  for (size_t i = 0; i < in.pixels.size(); ++i)
    out.pixels[i] = uint8_t(std::clamp<long>(
        std::lround(alpha * (in.pixels[i] - 128.0) + 128.0 + beta), 0, 255));
  return out;
}

inline GrayImage blur(const GrayImage& in, BlurKind kind, int size, double angle = 0.0) {
  using namespace detail;
  if (kind == BlurKind::Median) return median_filter(in, size);
  if (size == 1) return in;
  const Plane p = to_plane(in);
  return to_gray(kind == BlurKind::Gaussian
                     ? conv_separable(p, gaussian_kernel(size))
                     : conv2(p, motion_kernel(size, angle), size, 0.0));
}

inline GrayImage solarize(const GrayImage& in, int threshold) {
  GrayImage out(in.width, in.height);
  for (size_t i = 0; i < in.pixels.size(); ++i)
    out.pixels[i] = in.pixels[i] >= threshold ? uint8_t(255 - in.pixels[i]) : in.pixels[i];
  return out;
}

inline GrayImage filter2d(const GrayImage& in, FilterKind kind) {
  const double offset = kind == FilterKind::Emboss ? 128.0 : 0.0;
  return detail::to_gray(detail::conv2(detail::to_plane(in), detail::filter_kernel(kind), 3, offset));
}

inline GrayImage hist_eq(const GrayImage& in) {
  std::array<long, 256> hist{};
  for (uint8_t v : in.pixels) ++hist[v];
  const auto map = detail::eq_mapping(hist, long(in.pixels.size()));
  GrayImage out(in.width, in.height);
  for (size_t i = 0; i < in.pixels.size(); ++i)
    out.pixels[i] = uint8_t(std::clamp<long>(std::lround(double(map[in.pixels[i]])), 0, 255));
  return out;
}

inline GrayImage clahe(const GrayImage& in, double clip, int tiles) {
  if (tiles < 1) throw ConfigError("clahe tile count must be >= 1");
  const int n = tiles;
  std::vector<std::array<float, 256>> maps(size_t(n) * n);
  auto tile_x0 = [&](int t) { return t * in.width / n; };
  auto tile_y0 = [&](int t) { return t * in.height / n; };
  for (int ty = 0; ty < n; ++ty)
    for (int tx = 0; tx < n; ++tx) {
      std::array<long, 256> hist{};
      long total = 0;
      for (int y = tile_y0(ty); y < tile_y0(ty + 1); ++y)
        for (int x = tile_x0(tx); x < tile_x0(tx + 1); ++x) {
          ++hist[in.at(x, y)];
          ++total;
        }
      int nonzero = 0;
      for (long h : hist) nonzero += h > 0;
      if (nonzero <= 1) {   // single-bin tile: identity, even under clipping
        auto& m = maps[size_t(ty) * n + tx];
        for (int v = 0; v < 256; ++v) m[v] = float(v);
        continue;
      }
      if (std::isfinite(clip)) {
        // Clip each bin and spread the excess evenly so the total count
        // (and therefore the mapping's normalization) is preserved.
        const long limit = std::max(1L, long(clip * double(total) / 256.0));
        long excess = 0;
        for (long& h : hist)
          if (h > limit) {
            excess += h - limit;
            h = limit;
          }
        const long add = excess / 256, rem = excess % 256;
        for (int v = 0; v < 256; ++v) hist[v] += add + (v < rem ? 1 : 0);
      }
      maps[size_t(ty) * n + tx] = detail::eq_mapping(hist, total);
    }

  GrayImage out(in.width, in.height);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      // Bilinear blend between the four nearest tile mappings.
      const double gx = (x + 0.5) * n / in.width - 0.5;
      const double gy = (y + 0.5) * n / in.height - 0.5;
      const int x0 = std::clamp(int(std::floor(gx)), 0, n - 1);
      const int y0 = std::clamp(int(std::floor(gy)), 0, n - 1);
      const int x1 = std::min(x0 + 1, n - 1);
      const int y1 = std::min(y0 + 1, n - 1);
      const double wx = std::clamp(gx - x0, 0.0, 1.0);
      const double wy = std::clamp(gy - y0, 0.0, 1.0);
      const uint8_t v = in.at(x, y);
      const double m =
          (1 - wy) * ((1 - wx) * maps[size_t(y0) * n + x0][v] + wx * maps[size_t(y0) * n + x1][v]) +
          wy * ((1 - wx) * maps[size_t(y1) * n + x0][v] + wx * maps[size_t(y1) * n + x1][v]);
      out.at(x, y) = uint8_t(std::clamp<long>(std::lround(m), 0, 255));
    }
  return out;
}

namespace detail {

// IJG base luminance quantization table (zig-zag free, row major).
inline const std::array<int, 64> kJpegLuminance = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

inline std::array<int, 64> jpeg_quant_table(int quality) {
  if (quality < 1 || quality > 100) throw ConfigError("jpeg quality must be in 1..100");
  const int s = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> t{};
  for (int i = 0; i < 64; ++i)
    t[i] = std::clamp((kJpegLuminance[i] * s + 50) / 100, 1, 255);
  return t;
}

struct Dct8 {
  double c[8][8];
  Dct8() {
    for (int u = 0; u < 8; ++u)
      for (int x = 0; x < 8; ++x)
        c[u][x] = 0.5 * (u == 0 ? 1.0 / std::sqrt(2.0) : 1.0) *
                  std::cos((2 * x + 1) * u * M_PI / 16.0);
  }
};

}  // namespace detail

inline GrayImage jpeg_artifacts(const GrayImage& in, int quality) {
  const auto q = detail::jpeg_quant_table(quality);
  static const detail::Dct8 dct;
  GrayImage out(in.width, in.height);
  double f[8][8], F[8][8], tmp[8][8];
  for (int by = 0; by < in.height; by += 8)
    for (int bx = 0; bx < in.width; bx += 8) {
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
          f[y][x] = in.at(detail::reflect(bx + x, in.width),
                          detail::reflect(by + y, in.height)) - 128.0;
      // F = C f C^T, quantize, then f' = C^T F C.
      for (int u = 0; u < 8; ++u)
        for (int x = 0; x < 8; ++x) {
          double s = 0.0;
          for (int y = 0; y < 8; ++y) s += dct.c[u][y] * f[y][x];
          tmp[u][x] = s;
        }
      for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) {
          double s = 0.0;
          for (int x = 0; x < 8; ++x) s += tmp[u][x] * dct.c[v][x];
          const int qv = q[size_t(u) * 8 + v];
          F[u][v] = std::lround(s / qv) * double(qv);
        }
      for (int y = 0; y < 8; ++y)
        for (int v = 0; v < 8; ++v) {
          double s = 0.0;
          for (int u = 0; u < 8; ++u) s += dct.c[u][y] * F[u][v];
          tmp[y][v] = s;
        }
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
          if (bx + x >= in.width || by + y >= in.height) continue;
          double s = 0.0;
          for (int v = 0; v < 8; ++v) s += tmp[y][v] * dct.c[v][x];
          out.at(bx + x, by + y) =
              uint8_t(std::clamp<long>(std::lround(s + 128.0), 0, 255));
        }
    }
  return out;
}

inline GrayImage noise(const GrayImage& in, NoiseKind kind, double sigma, Rng& rng) {
  if (sigma < 0) throw ConfigError("noise sigma must be >= 0");
  GrayImage out(in.width, in.height);
  for (size_t i = 0; i < in.pixels.size(); ++i) {
    const double v = in.pixels[i];
    const double r = kind == NoiseKind::Gaussian ? v + rng.normal(0.0, sigma)
                                                 : v * rng.normal(1.0, sigma);
    out.pixels[i] = uint8_t(std::clamp<long>(std::lround(r), 0, 255));
  }
  return out;
}

inline GrayImage coarse_dropout(const GrayImage& in, bool salt, int n_holes,
                                int hole_size, Rng& rng) {
  if (n_holes < 0 || hole_size < 1) throw ConfigError("bad dropout parameters");
  GrayImage out = in;
  const uint8_t fill = salt ? 255 : 0;
  for (int h = 0; h < n_holes; ++h) {
    const int x0 = rng.uniform_int(0, std::max(0, in.width - hole_size));
    const int y0 = rng.uniform_int(0, std::max(0, in.height - hole_size));
    for (int y = y0; y < std::min(in.height, y0 + hole_size); ++y)
      for (int x = x0; x < std::min(in.width, x0 + hole_size); ++x) out.at(x, y) = fill;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Depth ops. Values are meters in [0, depth_max]; 0 marks invalid pixels.
// Mid-level (for the emboss offset) is depth_max/2, the analogue of 128.

inline DepthImage blur(const DepthImage& in, BlurKind kind, int size, double angle,
                       double depth_max) {
  using namespace detail;
  if (kind == BlurKind::Median) return median_filter(in, size);
  if (size == 1) return in;
  Plane p = kind == BlurKind::Gaussian ? conv_separable(in, gaussian_kernel(size))
                                       : conv2(in, motion_kernel(size, angle), size, 0.0);
  clamp_plane(p, 0.0, depth_max);
  return p;
}

inline DepthImage filter2d(const DepthImage& in, FilterKind kind, double depth_max) {
  const double offset = kind == FilterKind::Emboss ? depth_max / 2.0 : 0.0;
  detail::Plane p = detail::conv2(in, detail::filter_kernel(kind), 3, offset);
  detail::clamp_plane(p, 0.0, depth_max);
  return p;
}

inline DepthImage noise(const DepthImage& in, NoiseKind kind, double sigma, Rng& rng,
                        double depth_max) {
  if (sigma < 0) throw ConfigError("noise sigma must be >= 0");
  DepthImage out(in.width, in.height);
  for (size_t i = 0; i < in.pixels.size(); ++i) {
    const double v = in.pixels[i];
    if (v <= 0.0) {
      out.pixels[i] = 0.0f;   // invalid pixels stay invalid
      continue;
    }
    const double r = kind == NoiseKind::Gaussian ? v + rng.normal(0.0, sigma)
                                                 : v * rng.normal(1.0, sigma);
    out.pixels[i] = float(std::clamp(r, 0.0, depth_max));
  }
  return out;
}

inline DepthImage threshold_dilate(const DepthImage& in, double threshold, int radius) {
  if (radius < 0) throw ConfigError("dilation radius must be >= 0");
  DepthImage out = in;
  for (float& v : out.pixels)
    if (double(v) > threshold) v = 0.0f;
  if (radius == 0) return out;
  // Dilate the invalid mask by an L1 ball (plus-shaped disc).
  DepthImage dil = out;
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      if (out.at(x, y) != 0.0f) continue;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius + std::abs(dy); dx <= radius - std::abs(dy); ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx >= 0 && nx < out.width && ny >= 0 && ny < out.height)
            dil.at(nx, ny) = 0.0f;
        }
    }
  return dil;
}

inline DepthImage coarse_dropout(const DepthImage& in, bool salt, int n_holes,
                                 int hole_size, Rng& rng, double depth_max) {
  if (n_holes < 0 || hole_size < 1) throw ConfigError("bad dropout parameters");
  DepthImage out = in;
  const float fill = salt ? float(depth_max) : 0.0f;
  for (int h = 0; h < n_holes; ++h) {
    const int x0 = rng.uniform_int(0, std::max(0, in.width - hole_size));
    const int y0 = rng.uniform_int(0, std::max(0, in.height - hole_size));
    for (int y = y0; y < std::min(in.height, y0 + hole_size); ++y)
      for (int x = x0; x < std::min(in.width, x0 + hole_size); ++x) out.at(x, y) = fill;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipelines

enum class AugChannel { Gray, Depth };

struct AugOp {
  std::string name;
  double probability = 0.3;
  // Ordered (name, [lo, hi]) parameter ranges; sampling order is the
  // declaration order, which fixes the RNG stream layout.
  std::vector<std::pair<std::string, std::array<double, 2>>> params;

  double sample(const std::string& key, Rng& rng) const {
    for (const auto& [k, r] : params)
      if (k == key) return rng.uniform(r[0], r[1]);
    throw ConfigError("augmentation op '" + name + "' missing parameter '" + key + "'");
  }
};

struct AugSpec {
  AugChannel channel = AugChannel::Gray;
  std::vector<AugOp> ops;
};

namespace detail {

inline int odd_size(double v) {
  const int s = std::max(1, int(std::lround(v)));
  return s % 2 == 0 ? s + 1 : s;
}

inline int round_int(double v) { return int(std::lround(v)); }

}  // namespace detail

inline const std::vector<std::string>& gray_op_names() {
  static const std::vector<std::string> names = {
      "brightness_contrast", "motion_blur", "gaussian_blur", "median_blur",
      "solarize",            "emboss",      "hist_eq",       "sharpen",
      "clahe",               "jpeg",        "mult_noise",    "gauss_noise"};
  return names;
}

inline const std::vector<std::string>& depth_op_names() {
  static const std::vector<std::string> names = {
      "threshold_dilate", "sharpen",        "emboss",       "motion_blur",
      "gaussian_blur",    "median_blur",    "mult_noise",   "gauss_noise",
      "pepper_dropout",   "salt_dropout"};
  return names;
}

/// All appendix grayscale ops, each firing with probability 0.3.
inline AugSpec default_gray_spec() {
  AugSpec s;
  s.channel = AugChannel::Gray;
  auto add = [&](std::string name,
                 std::vector<std::pair<std::string, std::array<double, 2>>> p = {}) {
    s.ops.push_back({std::move(name), 0.3, std::move(p)});
  };
  add("brightness_contrast", {{"alpha", {0.8, 1.2}}, {"beta", {-30, 30}}});
  add("motion_blur", {{"size", {3, 7}}, {"angle", {0.0, M_PI}}});
  add("gaussian_blur", {{"size", {3, 7}}});
  add("median_blur", {{"size", {3, 5}}});
  add("solarize", {{"threshold", {64, 192}}});
  add("emboss");
  add("hist_eq");
  add("sharpen");
  add("clahe", {{"clip", {2, 4}}, {"tiles", {4, 8}}});
  add("jpeg", {{"quality", {30, 90}}});
  add("mult_noise", {{"sigma", {0.05, 0.15}}});
  add("gauss_noise", {{"sigma", {5, 20}}});
  return s;
}

/// All appendix depth ops; parameter ranges are twice as wide as the
/// grayscale counterparts to mimic the heavier stereo-depth noise.
inline AugSpec default_depth_spec() {
  AugSpec s;
  s.channel = AugChannel::Depth;
  auto add = [&](std::string name,
                 std::vector<std::pair<std::string, std::array<double, 2>>> p = {}) {
    s.ops.push_back({std::move(name), 0.3, std::move(p)});
  };
  add("threshold_dilate", {{"threshold", {0.5, 1.1}}, {"radius", {1, 3}}});
  add("sharpen");
  add("emboss");
  add("motion_blur", {{"size", {3, 11}}, {"angle", {0.0, M_PI}}});
  add("gaussian_blur", {{"size", {3, 11}}});
  add("median_blur", {{"size", {3, 7}}});
  add("mult_noise", {{"sigma", {0.1, 0.3}}});
  add("gauss_noise", {{"sigma", {0.02, 0.08}}});
  add("pepper_dropout", {{"n_holes", {2, 8}}, {"hole_size", {4, 16}}});
  add("salt_dropout", {{"n_holes", {2, 8}}, {"hole_size", {4, 16}}});
  return s;
}

inline void validate(const AugSpec& spec) {
  const auto& names =
      spec.channel == AugChannel::Gray ? gray_op_names() : depth_op_names();
  for (const AugOp& op : spec.ops) {
    if (std::find(names.begin(), names.end(), op.name) == names.end())
      throw UnknownOpError("op '" + op.name + "' is not registered for this channel");
    if (op.probability < 0.0 || op.probability > 1.0)
      throw ConfigError("op probability must be in [0, 1]");
    for (const auto& [k, r] : op.params)
      if (!(r[0] <= r[1])) throw ConfigError("empty parameter range for '" + k + "'");
  }
}

inline GrayImage apply_pipeline(const GrayImage& in, const AugSpec& spec, Rng& rng) {
  if (spec.channel != AugChannel::Gray)
    throw ChannelMismatchError("grayscale image requires a gray-channel spec");
  validate(spec);
  GrayImage img = in;
  for (const AugOp& op : spec.ops) {
    if (!rng.bernoulli(op.probability)) continue;
    using detail::odd_size;
    using detail::round_int;
    if (op.name == "brightness_contrast") {
      const double a = op.sample("alpha", rng), b = op.sample("beta", rng);
      img = brightness_contrast(img, a, b);
    } else if (op.name == "motion_blur") {
      const int s = odd_size(op.sample("size", rng));
      img = blur(img, BlurKind::Motion, s, op.sample("angle", rng));
    } else if (op.name == "gaussian_blur") {
      img = blur(img, BlurKind::Gaussian, odd_size(op.sample("size", rng)));
    } else if (op.name == "median_blur") {
      img = blur(img, BlurKind::Median, odd_size(op.sample("size", rng)));
    } else if (op.name == "solarize") {
      img = solarize(img, round_int(op.sample("threshold", rng)));
    } else if (op.name == "emboss") {
      img = filter2d(img, FilterKind::Emboss);
    } else if (op.name == "hist_eq") {
      img = hist_eq(img);
    } else if (op.name == "sharpen") {
      img = filter2d(img, FilterKind::Sharpen);
    } else if (op.name == "clahe") {
      const double clip = op.sample("clip", rng);
      img = clahe(img, clip, round_int(op.sample("tiles", rng)));
    } else if (op.name == "jpeg") {
      img = jpeg_artifacts(img, round_int(op.sample("quality", rng)));
    } else if (op.name == "mult_noise") {
      img = noise(img, NoiseKind::Multiplicative, op.sample("sigma", rng), rng);
    } else if (op.name == "gauss_noise") {
      img = noise(img, NoiseKind::Gaussian, op.sample("sigma", rng), rng);
    }
  }
  return img;
}

inline DepthImage apply_pipeline(const DepthImage& in, const AugSpec& spec, Rng& rng,
                                 double depth_max) {
  if (spec.channel != AugChannel::Depth)
    throw ChannelMismatchError("depth image requires a depth-channel spec");
  validate(spec);
  DepthImage img = in;
  for (const AugOp& op : spec.ops) {
    if (!rng.bernoulli(op.probability)) continue;
    using detail::odd_size;
    using detail::round_int;
    if (op.name == "threshold_dilate") {
      const double t = op.sample("threshold", rng);
      img = threshold_dilate(img, t, round_int(op.sample("radius", rng)));
    } else if (op.name == "sharpen") {
      img = filter2d(img, FilterKind::Sharpen, depth_max);
    } else if (op.name == "emboss") {
      img = filter2d(img, FilterKind::Emboss, depth_max);
    } else if (op.name == "motion_blur") {
      const int s = odd_size(op.sample("size", rng));
      img = blur(img, BlurKind::Motion, s, op.sample("angle", rng), depth_max);
    } else if (op.name == "gaussian_blur") {
      img = blur(img, BlurKind::Gaussian, odd_size(op.sample("size", rng)), 0.0, depth_max);
    } else if (op.name == "median_blur") {
      img = blur(img, BlurKind::Median, odd_size(op.sample("size", rng)), 0.0, depth_max);
    } else if (op.name == "mult_noise") {
      img = noise(img, NoiseKind::Multiplicative, op.sample("sigma", rng), rng, depth_max);
    } else if (op.name == "gauss_noise") {
      img = noise(img, NoiseKind::Gaussian, op.sample("sigma", rng), rng, depth_max);
    } else if (op.name == "pepper_dropout") {
      const int n = round_int(op.sample("n_holes", rng));
      img = coarse_dropout(img, false, n, round_int(op.sample("hole_size", rng)), rng, depth_max);
    } else if (op.name == "salt_dropout") {
      const int n = round_int(op.sample("n_holes", rng));
      img = coarse_dropout(img, true, n, round_int(op.sample("hole_size", rng)), rng, depth_max);
    }
  }
  return img;
}

}  // namespace phrl
