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

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "crossplace/error.hpp"
#include "crossplace/geometry.hpp"

namespace crossplace {

/// Local feature map f(x): `h * w` spatial locations (row-major) by `c`
/// channels, stored as a (h*w) x c matrix. Entries are non-negative.
struct FeatureMap {
  int h = 0;
  int w = 0;
  int c = 0;
  Eigen::MatrixXd data;

  FeatureMap() = default;
  FeatureMap(int h_, int w_, int c_) : h(h_), w(w_), c(c_), data(Eigen::MatrixXd::Zero(h_ * w_, c_)) {}

  double& at(int row, int col, int ch) { return data(row * w + col, ch); }
  double at(int row, int col, int ch) const { return data(row * w + col, ch); }
};

/// Borrowed single-channel image; `valid` empty means every pixel is valid.
struct ImageView {
  int width = 0;
  int height = 0;
  std::span<const double> values;
  std::span<const std::uint8_t> valid;

  ImageView(const DepthImage& d) : width(d.width), height(d.height), values(d.depth), valid(d.valid) {}
  ImageView(const IntensityImage& i) : width(i.width), height(i.height), values(i.values) {}

  bool is_valid(std::size_t idx) const { return valid.empty() || valid[idx] != 0; }
};

/// Per-image rescaling applied before feature extraction.
///  kMax:      v / max(v)
///  kLogRange: (log v - log min v) / (log max v - log min v); non-positive
///             pixels count as invalid. A depth image and its inverse-depth
///             rendering map to v and 1 - v.
enum class InputNormalization : std::uint8_t { kNone = 0, kMax = 1, kLogRange = 2 };

struct ExtractorConfig {
  int grid_h = 16;
  int grid_w = 48;
  int orientations = 14;
  InputNormalization normalization = InputNormalization::kLogRange;
  bool normalize_histogram = true;  // orientation histogram sums to 1 per cell
  bool canonical_polarity = true;   // invert normalized values that grow towards the bottom rows
  double histogram_epsilon = 0.001; // per-pixel gradient floor added to the histogram normalizer
  int smoothing_radius = 2;         // in-cell box filter applied before differentiation
  bool soft_binning = true;         // split gradient magnitude between the two nearest bins

  int channels() const { return 2 + orientations; }

  void validate() const {
    if (grid_h < 1 || grid_w < 1) throw InvalidArgument("extractor grid must be at least 1x1");
    if (orientations < 2) throw InvalidArgument("extractor needs at least 2 orientation bins");
    if (!(histogram_epsilon >= 0.0)) throw InvalidArgument("histogram epsilon must be non-negative");
    if (smoothing_radius < 0) throw InvalidArgument("smoothing radius must be non-negative");
  }

  friend bool operator==(const ExtractorConfig&, const ExtractorConfig&) = default;
};

/// Anything that turns a single-channel image into a local feature map.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual FeatureMap extract(const ImageView& image) const = 0;
  virtual int channels() const = 0;
};

/// Per grid cell: mean value, standard deviation, and an orientation
/// histogram of image gradients weighted by gradient magnitude. Invalid
/// pixels are ignored, and gradients never read outside their own cell.
/// Orientation is unsigned, so a dark-to-bright and a bright-to-dark edge
/// land in the same bin; bin 0 is centered on a horizontal gradient.
inline FeatureMap extract_local_features(const ImageView& image, const ExtractorConfig& cfg = {}) {
  cfg.validate();
  if (image.width < cfg.grid_w || image.height < cfg.grid_h) {
    throw DimensionError("image is smaller than the feature grid");
  }
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  if (image.values.size() != n || (!image.valid.empty() && image.valid.size() != n)) {
    throw DimensionError("image buffers do not match its size");
  }

  std::vector<double> values(image.values.begin(), image.values.end());
  std::vector<std::uint8_t> mask(n);
  for (std::size_t i = 0; i < n; ++i) mask[i] = image.is_valid(i) ? 1 : 0;
  if (cfg.normalization == InputNormalization::kMax) {
    double vmax = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask[i]) vmax = std::max(vmax, values[i]);
    if (vmax > 0.0)
      for (double& v : values) v /= vmax;
  } else if (cfg.normalization == InputNormalization::kLogRange) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask[i] && values[i] > 0.0) {
        values[i] = std::log(values[i]);
        lo = std::min(lo, values[i]);
        hi = std::max(hi, values[i]);
      } else {
        mask[i] = 0;
      }
    }
    const double range = hi - lo;
    for (std::size_t i = 0; i < n; ++i)
      if (mask[i]) values[i] = range > 0.0 ? (values[i] - lo) / range : 1.0;
  }
  if (cfg.canonical_polarity && cfg.normalization != InputNormalization::kNone) {
    // Orient contrast so that values decrease towards the bottom rows.
    double sum_r = 0.0, sum_v = 0.0, sum_rv = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!mask[i]) continue;
      const double r = static_cast<double>(i / image.width);
      sum_r += r;
      sum_v += values[i];
      sum_rv += r * values[i];
      ++count;
    }
    if (count > 0 && sum_rv - sum_r * sum_v / count > 0.0) {
      for (std::size_t i = 0; i < n; ++i)
        if (mask[i]) values[i] = 1.0 - values[i];
    }
  }

  const int bins = cfg.orientations;
  FeatureMap out(cfg.grid_h, cfg.grid_w, cfg.channels());
  std::vector<double> hist(bins);
  std::vector<double> smooth;
  for (int gr = 0; gr < cfg.grid_h; ++gr) {
    const int r0 = gr * image.height / cfg.grid_h;
    const int r1 = (gr + 1) * image.height / cfg.grid_h;
    for (int gc = 0; gc < cfg.grid_w; ++gc) {
      const int c0 = gc * image.width / cfg.grid_w;
      const int c1 = (gc + 1) * image.width / cfg.grid_w;

      auto idx = [&](int r, int c) { return static_cast<std::size_t>(r) * image.width + c; };
      auto ok = [&](int r, int c) { return r >= r0 && r < r1 && c >= c0 && c < c1 && mask[idx(r, c)]; };
      auto val = [&](int r, int c) { return values[idx(r, c)]; };
      // Box-smoothed copy of the cell, averaging valid in-cell neighbours only.
      const int cw = c1 - c0;
      smooth.assign(static_cast<std::size_t>(r1 - r0) * cw, 0.0);
      auto sm = [&](int r, int c) { return smooth[static_cast<std::size_t>(r - r0) * cw + (c - c0)]; };
      const int rad = cfg.smoothing_radius;
      for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) {
          if (!mask[idx(r, c)]) continue;
          double acc = 0.0;
          int m = 0;
          for (int dr = -rad; dr <= rad; ++dr)
            for (int dc = -rad; dc <= rad; ++dc)
              if (ok(r + dr, c + dc)) {
                acc += val(r + dr, c + dc);
                ++m;
              }
          smooth[static_cast<std::size_t>(r - r0) * cw + (c - c0)] = acc / m;
        }
      }
      // Central difference inside the cell, one-sided at its border.
      auto diff = [&](int r, int c, int dr, int dc) {
        const bool fwd = ok(r + dr, c + dc), back = ok(r - dr, c - dc);
        if (fwd && back) return 0.5 * (sm(r + dr, c + dc) - sm(r - dr, c - dc));
        if (fwd) return sm(r + dr, c + dc) - sm(r, c);
        if (back) return sm(r, c) - sm(r - dr, c - dc);
        return 0.0;
      };

      double sum = 0.0;
      int count = 0;
      std::fill(hist.begin(), hist.end(), 0.0);
      for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) {
          if (!mask[idx(r, c)]) continue;
          sum += val(r, c);
          ++count;
          const double gx = diff(r, c, 0, 1);
          const double gy = diff(r, c, 1, 0);
          const double mag = std::hypot(gx, gy);
          if (mag == 0.0) continue;
          double angle = std::atan2(gy, gx);
          if (angle < 0.0) angle += std::numbers::pi;
          const double pos = angle / std::numbers::pi * bins;
          if (cfg.soft_binning) {
            const double lower = std::floor(pos);
            const double frac = pos - lower;
            hist[static_cast<int>(lower) % bins] += mag * (1.0 - frac);
            hist[(static_cast<int>(lower) + 1) % bins] += mag * frac;
          } else {
            hist[static_cast<int>(std::floor(pos + 0.5)) % bins] += mag;
          }
        }
      }
      if (count == 0) continue;

      const double mean = sum / count;
      double sq_dev = 0.0;
      for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) {
          if (mask[idx(r, c)]) sq_dev += (val(r, c) - mean) * (val(r, c) - mean);
        }
      }
      const int loc = gr * cfg.grid_w + gc;
      out.data(loc, 0) = std::max(0.0, mean);
      out.data(loc, 1) = std::sqrt(sq_dev / count);
      double hist_scale = 1.0 / count;
      if (cfg.normalize_histogram) {
        double total = 0.0;
        for (double h : hist) total += h;
        const double denom = total + cfg.histogram_epsilon * count;
        hist_scale = denom > 0.0 ? 1.0 / denom : 0.0;
      }
      for (int b = 0; b < bins; ++b) out.data(loc, 2 + b) = hist[b] * hist_scale;
    }
  }
  return out;
}

class GridFeatureExtractor final : public FeatureExtractor {
 public:
  explicit GridFeatureExtractor(ExtractorConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  FeatureMap extract(const ImageView& image) const override { return extract_local_features(image, cfg_); }
  int channels() const override { return cfg_.channels(); }
  const ExtractorConfig& config() const { return cfg_; }

 private:
  ExtractorConfig cfg_;
};

}  // namespace crossplace
