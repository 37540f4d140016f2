// Copyright 2026 The crossplace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "crossplace/error.hpp"
#include "crossplace/geometry.hpp"

namespace crossplace {

/// 16-bit binary graymap of a depth image: value = round(65535 * min(d, max) / max),
/// invalid pixels written as 0.
inline void write_depth_image(const DepthImage& d, const std::string& path, double max_depth_m) {
  if (!(max_depth_m > 0.0)) throw InvalidArgument("max_depth_m must be positive");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write depth image: " + path);
  os << "P5\n" << d.width << ' ' << d.height << "\n65535\n";
  std::vector<unsigned char> buf(d.depth.size() * 2);
  for (std::size_t i = 0; i < d.depth.size(); ++i) {
    std::uint16_t v = 0;
    if (d.valid[i]) v = static_cast<std::uint16_t>(std::lround(65535.0 * std::min(d.depth[i], max_depth_m) / max_depth_m));
    buf[2 * i] = static_cast<unsigned char>(v >> 8);
    buf[2 * i + 1] = static_cast<unsigned char>(v & 0xff);
  }
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!os) throw DataError("failed writing depth image: " + path);
}

/// Raw graymap/pixmap samples. `channels` is 1 (P5) or 3 (P6).
struct NetpbmImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  int max_value = 255;
  std::vector<std::uint16_t> samples;
};

inline NetpbmImage read_netpbm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open image: " + path);
  std::string magic;
  is >> magic;
  NetpbmImage img;
  if (magic == "P5") {
    img.channels = 1;
  } else if (magic == "P6") {
    img.channels = 3;
  } else {
    throw DataError("not a binary PGM/PPM file: " + path);
  }
  auto next_int = [&]() {
    is >> std::ws;
    while (is.peek() == '#') {
      std::string comment;
      std::getline(is, comment);
      is >> std::ws;
    }
    int v = 0;
    if (!(is >> v)) throw DataError("malformed netpbm header: " + path);
    return v;
  };
  img.width = next_int();
  img.height = next_int();
  img.max_value = next_int();
  is.get();
  if (img.width < 1 || img.height < 1 || img.max_value < 1 || img.max_value > 65535) {
    throw DataError("invalid netpbm header: " + path);
  }
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height * img.channels;
  const std::size_t bytes = img.max_value > 255 ? 2 : 1;
  std::vector<unsigned char> raw(n * bytes);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(is.gcount()) != raw.size()) throw DataError("truncated netpbm data: " + path);
  img.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    img.samples[i] = bytes == 2 ? static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]) : raw[i];
  }
  return img;
}

/// Inverse of write_depth_image (exact up to the quantization step).
inline DepthImage read_depth_image(const std::string& path, double max_depth_m) {
  NetpbmImage img = read_netpbm(path);
  if (img.channels != 1) throw DataError("depth image must be single channel: " + path);
  DepthImage d(img.width, img.height);
  for (std::size_t i = 0; i < img.samples.size(); ++i) {
    if (img.samples[i] == 0) continue;
    d.depth[i] = max_depth_m * img.samples[i] / static_cast<double>(img.max_value);
    d.valid[i] = 1;
  }
  return d;
}

/// 16-bit graymap of an intensity image in [0,1].
inline void write_intensity_image(const IntensityImage& img, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write image: " + path);
  os << "P5\n" << img.width << ' ' << img.height << "\n65535\n";
  std::vector<unsigned char> buf(img.values.size() * 2);
  for (std::size_t i = 0; i < img.values.size(); ++i) {
    const auto v = static_cast<std::uint16_t>(std::lround(65535.0 * std::clamp(img.values[i], 0.0, 1.0)));
    buf[2 * i] = static_cast<unsigned char>(v >> 8);
    buf[2 * i + 1] = static_cast<unsigned char>(v & 0xff);
  }
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!os) throw DataError("failed writing image: " + path);
}

namespace detail {
inline IntensityImage read_png_intensity(const std::string& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!fp) throw DataError("cannot open image: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng initialization failed");
  }
  std::vector<unsigned char> pixels;
  std::vector<png_bytep> rows;
  int width = 0, height = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("failed decoding PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  pixels.resize(static_cast<std::size_t>(width) * height * 3);
  rows.resize(height);
  for (int r = 0; r < height; ++r) rows[r] = pixels.data() + static_cast<std::size_t>(r) * width * 3;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  return intensity_from_rgb8(width, height, pixels);
}
}  // namespace detail

/// Camera image from PNG, binary PGM (8/16 bit) or binary PPM, reduced to
/// luminance in [0,1].
inline IntensityImage read_intensity_image(const std::string& path) {
  unsigned char sig[8] = {};
  {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open image: " + path);
    is.read(reinterpret_cast<char*>(sig), 8);
  }
  if (png_sig_cmp(sig, 0, 8) == 0) return detail::read_png_intensity(path);

  NetpbmImage raw = read_netpbm(path);
  if (raw.channels == 3) {
    std::vector<std::uint8_t> rgb(raw.samples.size());
    for (std::size_t i = 0; i < rgb.size(); ++i) {
      rgb[i] = static_cast<std::uint8_t>(std::lround(255.0 * raw.samples[i] / raw.max_value));
    }
    return intensity_from_rgb8(raw.width, raw.height, rgb);
  }
  IntensityImage img(raw.width, raw.height);
  for (std::size_t i = 0; i < raw.samples.size(); ++i) img.values[i] = raw.samples[i] / static_cast<double>(raw.max_value);
  return img;
}

}  // namespace crossplace
