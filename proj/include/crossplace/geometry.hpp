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
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "crossplace/error.hpp"

namespace crossplace {

/// 3D points in the LiDAR Cartesian frame, in meters. `intensity` is either
/// empty or holds one value in [0,1] per point.
struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<float> intensity;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_intensity() const { return !intensity.empty(); }
};

/// Pinhole camera with LiDAR-to-camera extrinsics.
struct CameraModel {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  int width = 1;
  int height = 1;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) {
      throw InvalidArgument("camera focal lengths must be positive");
    }
    if (width < 1 || height < 1) {
      throw InvalidArgument("camera image size must be at least 1x1");
    }
    if (!std::isfinite(cx) || !std::isfinite(cy) || !R.allFinite() || !t.allFinite()) {
      throw InvalidArgument("camera parameters must be finite");
    }
    const double ortho_err = (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (ortho_err >= 1e-6 || std::abs(R.determinant() - 1.0) > 1e-6) {
      throw InvalidArgument("camera rotation is not orthonormal");
    }
  }

  /// Camera for the sub-image that starts at `row_offset`.
  CameraModel cropped_rows(int row_offset) const {
    CameraModel out = *this;
    out.cy -= row_offset;
    out.height -= row_offset;
    return out;
  }
};

/// Row-major grid of depths (meters) with a validity mask. Depth is only
/// meaningful where `valid` is set, and is then strictly positive.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<double> depth;
  std::vector<std::uint8_t> valid;

  DepthImage() = default;
  DepthImage(int w, int h)
      : width(w), height(h), depth(static_cast<std::size_t>(w) * h, 0.0),
        valid(static_cast<std::size_t>(w) * h, 0) {}

  std::size_t index(int row, int col) const { return static_cast<std::size_t>(row) * width + col; }
  double at(int row, int col) const { return depth[index(row, col)]; }
  bool is_valid(int row, int col) const { return valid[index(row, col)] != 0; }
  void set(int row, int col, double d) {
    depth[index(row, col)] = d;
    valid[index(row, col)] = 1;
  }

  std::size_t valid_count() const {
    return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
  }
  double fill_ratio() const {
    return depth.empty() ? 0.0 : static_cast<double>(valid_count()) / static_cast<double>(depth.size());
  }
};

/// Single-channel camera image with values in [0,1].
struct IntensityImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  IntensityImage() = default;
  IntensityImage(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0) {}

  double at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
  double& at(int row, int col) { return values[static_cast<std::size_t>(row) * width + col]; }
};

/// Luminance of interleaved 8-bit RGB pixels.
inline IntensityImage intensity_from_rgb8(int width, int height, std::span<const std::uint8_t> rgb) {
  if (width < 1 || height < 1 || rgb.size() != static_cast<std::size_t>(width) * height * 3) {
    throw DimensionError("rgb buffer does not match image size");
  }
  IntensityImage img(width, height);
  for (std::size_t i = 0; i < img.values.size(); ++i) {
    const double r = rgb[3 * i], g = rgb[3 * i + 1], b = rgb[3 * i + 2];
    img.values[i] = (0.299 * r + 0.587 * g + 0.114 * b) / 255.0;
  }
  return img;
}

struct ProjectionStats {
  std::size_t projected = 0;
  std::size_t non_finite = 0;
  std::size_t behind_camera = 0;
  std::size_t out_of_frame = 0;
};

inline constexpr double kMinCameraDepth = 1e-6;

/// Pixel (row, col) hit by a LiDAR-frame point, or false if the point lies
/// behind the camera or outside the image.
inline bool project_to_pixel(const Eigen::Vector3d& p, const CameraModel& cam, int& row, int& col) {
  const Eigen::Vector3d pc = cam.R * p + cam.t;
  if (pc.z() <= kMinCameraDepth) return false;
  const double u = cam.fx * pc.x() / pc.z() + cam.cx;
  const double v = cam.fy * pc.y() / pc.z() + cam.cy;
  if (!(std::abs(u) < 1e9) || !(std::abs(v) < 1e9)) return false;
  col = static_cast<int>(std::lround(u));
  row = static_cast<int>(std::lround(v));
  return col >= 0 && col < cam.width && row >= 0 && row < cam.height;
}

/// Sparse depth image of a point cloud. Each pixel stores the LiDAR-frame
/// range of the nearest point that lands on it.
inline DepthImage project_point_cloud(const PointCloud& cloud, const CameraModel& cam,
                                      ProjectionStats* stats = nullptr) {
  cam.validate();
  DepthImage img(cam.width, cam.height);
  ProjectionStats local;
  for (const Eigen::Vector3d& p : cloud.points) {
    if (!p.allFinite()) {
      ++local.non_finite;
      continue;
    }
    const Eigen::Vector3d pc = cam.R * p + cam.t;
    if (pc.z() <= kMinCameraDepth) {
      ++local.behind_camera;
      continue;
    }
    int row = 0, col = 0;
    if (!project_to_pixel(p, cam, row, col)) {
      ++local.out_of_frame;
      continue;
    }
    const double range = p.norm();
    const std::size_t idx = img.index(row, col);
    if (!img.valid[idx] || range < img.depth[idx]) {
      img.depth[idx] = range;
      img.valid[idx] = 1;
    }
    ++local.projected;
  }
  if (stats) *stats = local;
  return img;
}

/// First image row kept by the field-of-view crop.
inline int fov_crop_top_row(const CameraModel& cam, double max_elevation_deg) {
  if (max_elevation_deg >= 90.0) return 0;
  const double rad = max_elevation_deg * std::numbers::pi / 180.0;
  const long top = std::lround(cam.cy - cam.fy * std::tan(rad));
  return static_cast<int>(std::max(0L, top));
}

inline DepthImage crop_rows(const DepthImage& img, int top) {
  DepthImage out(img.width, img.height - top);
  const auto offset = static_cast<std::ptrdiff_t>(top) * img.width;
  std::copy(img.depth.begin() + offset, img.depth.end(), out.depth.begin());
  std::copy(img.valid.begin() + offset, img.valid.end(), out.valid.begin());
  return out;
}

inline IntensityImage crop_rows(const IntensityImage& img, int top) {
  IntensityImage out(img.width, img.height - top);
  std::copy(img.values.begin() + static_cast<std::ptrdiff_t>(top) * img.width, img.values.end(),
            out.values.begin());
  return out;
}

/// Result of cropping both modalities to the shared field of view.
struct FovCrop {
  DepthImage depth;
  IntensityImage image;
  CameraModel camera;  // intrinsics of the cropped window
  int top_row = 0;
};

namespace detail {
inline int checked_crop_top(const CameraModel& cam, int width, int height, double max_elevation_deg) {
  if (width != cam.width || height != cam.height) {
    throw DimensionError("image size does not match camera model");
  }
  const int top = fov_crop_top_row(cam, max_elevation_deg);
  if (top >= height) throw InvalidArgument("field-of-view crop window is empty");
  return top;
}
}  // namespace detail

/// Keeps full width and the rows from the elevation limit down to the bottom.
inline FovCrop crop_fov(const DepthImage& depth, const IntensityImage& image, const CameraModel& cam,
                        double max_elevation_deg = 5.0) {
  if (depth.width != image.width || depth.height != image.height) {
    throw DimensionError("depth and intensity images differ in size");
  }
  const int top = detail::checked_crop_top(cam, depth.width, depth.height, max_elevation_deg);
  return FovCrop{crop_rows(depth, top), crop_rows(image, top), cam.cropped_rows(top), top};
}

inline DepthImage crop_fov(const DepthImage& depth, const CameraModel& cam, double max_elevation_deg = 5.0) {
  return crop_rows(depth, detail::checked_crop_top(cam, depth.width, depth.height, max_elevation_deg));
}

inline IntensityImage crop_fov(const IntensityImage& image, const CameraModel& cam,
                               double max_elevation_deg = 5.0) {
  return crop_rows(image, detail::checked_crop_top(cam, image.width, image.height, max_elevation_deg));
}

/// Random yaw about the LiDAR z axis plus a random shift, reproducible from `seed`.
inline PointCloud augment_cloud(const PointCloud& cloud, double max_rot_deg, double max_shift_m,
                                std::uint64_t seed) {
  if (max_rot_deg < 0.0 || max_shift_m < 0.0) {
    throw InvalidArgument("augmentation ranges must be non-negative");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double yaw = unit(rng) * max_rot_deg * std::numbers::pi / 180.0;
  const Eigen::Vector3d shift(unit(rng) * max_shift_m, unit(rng) * max_shift_m, unit(rng) * max_shift_m);
  if (max_rot_deg == 0.0 && max_shift_m == 0.0) return cloud;

  const double c = std::cos(yaw), s = std::sin(yaw);
  Eigen::Matrix3d rot;
  rot << c, -s, 0, s, c, 0, 0, 0, 1;
  PointCloud out;
  out.intensity = cloud.intensity;
  out.points.reserve(cloud.points.size());
  for (const Eigen::Vector3d& p : cloud.points) out.points.push_back(rot * p + shift);
  return out;
}

}  // namespace crossplace
