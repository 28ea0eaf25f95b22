#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "phrl/image.hpp"

namespace phrl {

namespace detail {

// Netpbm header token reader: skips whitespace and '#' comment lines.
inline int pnm_token(std::istream& in) {
  for (;;) {
    int c = in.get();
    if (c == '#') {
      while (c != '\n' && c != EOF) c = in.get();
      continue;
    }
    if (c == EOF) throw IoError("truncated netpbm header");
    if (!std::isspace(c)) {
      in.unget();
      break;
    }
  }
  int value = 0;
  if (!(in >> value)) throw IoError("malformed netpbm header");
  return value;
}

}  // namespace detail

inline void write_ppm(const std::string& path, const RgbImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  for (const Rgb8& p : img.pixels) {
    const char buf[3] = {char(p.r), char(p.g), char(p.b)};
    out.write(buf, 3);
  }
  if (!out) throw IoError("short write: " + path);
}

inline RgbImage read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  char m0 = 0, m1 = 0;
  in.get(m0).get(m1);
  if (m0 != 'P' || m1 != '6') throw IoError("not a binary PPM (P6): " + path);
  const int w = detail::pnm_token(in);
  const int h = detail::pnm_token(in);
  const int maxval = detail::pnm_token(in);
  if (maxval != 255) throw IoError("only maxval 255 PPM supported: " + path);
  in.get();  // single whitespace byte before raster
  RgbImage img(w, h);
  for (Rgb8& p : img.pixels) {
    char buf[3];
    in.read(buf, 3);
    p = {uint8_t(buf[0]), uint8_t(buf[1]), uint8_t(buf[2])};
  }
  if (!in) throw IoError("truncated PPM raster: " + path);
  return img;
}

/// Depth is stored as 16-bit PGM in integer millimeters (big-endian raster
/// per the netpbm convention); 0 marks invalid pixels.
inline void write_pgm16(const std::string& path, const DepthImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "P5\n" << img.width << " " << img.height << "\n65535\n";
  for (float z : img.pixels) {
    long mm = std::lround(double(z) * 1000.0);
    mm = std::clamp(mm, 0L, 65535L);
    const char buf[2] = {char((mm >> 8) & 0xff), char(mm & 0xff)};
    out.write(buf, 2);
  }
  if (!out) throw IoError("short write: " + path);
}

inline DepthImage read_pgm16(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  char m0 = 0, m1 = 0;
  in.get(m0).get(m1);
  if (m0 != 'P' || m1 != '5') throw IoError("not a binary PGM (P5): " + path);
  const int w = detail::pnm_token(in);
  const int h = detail::pnm_token(in);
  const int maxval = detail::pnm_token(in);
  if (maxval != 65535) throw IoError("only 16-bit PGM supported: " + path);
  in.get();
  DepthImage img(w, h);
  for (float& z : img.pixels) {
    char buf[2];
    in.read(buf, 2);
    const unsigned mm = (unsigned(uint8_t(buf[0])) << 8) | unsigned(uint8_t(buf[1]));
    z = float(mm) / 1000.0f;
  }
  if (!in) throw IoError("truncated PGM raster: " + path);
  return img;
}

/// 8-bit PGM for grayscale previews.
inline void write_pgm8(const std::string& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            std::streamsize(img.pixels.size()));
  if (!out) throw IoError("short write: " + path);
}

inline GrayImage read_pgm8(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  char m0 = 0, m1 = 0;
  in.get(m0).get(m1);
  if (m0 != 'P' || m1 != '5') throw IoError("not a binary PGM (P5): " + path);
  const int w = detail::pnm_token(in);
  const int h = detail::pnm_token(in);
  const int maxval = detail::pnm_token(in);
  if (maxval != 255) throw IoError("expected 8-bit PGM: " + path);
  in.get();
  GrayImage img(w, h);
  in.read(reinterpret_cast<char*>(img.pixels.data()), std::streamsize(img.pixels.size()));
  if (!in) throw IoError("truncated PGM raster: " + path);
  return img;
}

}  // namespace phrl
