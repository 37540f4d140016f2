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

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "crossplace/dataset_io.hpp"
#include "crossplace/error.hpp"
#include "crossplace/geometry.hpp"

namespace crossplace {

struct SyntheticSceneConfig {
  int num_places = 100;
  double place_spacing_m = 20.0;
  int landmarks_per_place = 10;
  double noise_sigma_m = 0.05;  // LiDAR range noise
  std::uint64_t seed = 1;
  int frames_per_place = 2;
  double max_pose_offset_m = 0.5;  // horizontal offset of each frame from its place
  double max_yaw_deg = 1.0;

  // Camera (co-located with the LiDAR).
  int image_width = 384;
  int image_height = 120;
  double focal_px = 192.0;
  double principal_row = 48.0;
  double brightness_ref_m = 2.0;  // brightness = min(1, ref / depth)

  // Spinning LiDAR.
  int lidar_beams = 32;
  double lidar_top_deg = 4.0;
  double lidar_bottom_deg = -22.0;
  double lidar_azimuth_step_deg = 0.125;
  double max_range_m = 60.0;
  double sensor_height_m = 1.7;
  bool ground_plane = false;  // when false only landmark surfaces return

  void validate() const {
    if (num_places < 1) throw InvalidArgument("synthetic scene needs at least one place");
    if (!(noise_sigma_m >= 0.0)) throw InvalidArgument("noise_sigma_m must be non-negative");
    if (frames_per_place < 1) throw InvalidArgument("frames_per_place must be at least 1");
    if (!(place_spacing_m > 0.0) || landmarks_per_place < 0 || max_pose_offset_m < 0.0 || max_yaw_deg < 0.0) {
      throw InvalidArgument("invalid synthetic scene layout");
    }
    if (image_width < 1 || image_height < 1 || !(focal_px > 0.0) || lidar_beams < 1 ||
        !(lidar_azimuth_step_deg > 0.0) || !(max_range_m > 0.0) || !(brightness_ref_m > 0.0)) {
      throw InvalidArgument("invalid synthetic sensor settings");
    }
  }
};

/// Vertical pole or yaw-rotated box standing on the ground (z = 0).
struct Landmark {
  enum class Kind { kBox, kPole } kind = Kind::kBox;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double yaw = 0.0;
  Eigen::Vector2d half_extent = Eigen::Vector2d::Ones();  // box half sizes; pole uses x as radius
  double height = 1.0;
};

/// Landmarks plus an optional ground plane; answers nearest-hit range queries.
class SyntheticWorld {
 public:
  SyntheticWorld(std::vector<Landmark> landmarks, double max_range, bool ground = true)
      : landmarks_(std::move(landmarks)), max_range_(max_range), ground_(ground) {}

  /// Distance along the unit direction `dir` to the first surface, if any
  /// lies within the maximum range.
  std::optional<double> cast(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const {
    double best = max_range_;
    bool hit = false;
    if (ground_ && dir.z() < -1e-12) {
      const double t = -origin.z() / dir.z();
      if (t > 0.0 && t < best) {
        best = t;
        hit = true;
      }
    }
    for (const Landmark& lm : landmarks_) {
      const double t = lm.kind == Landmark::Kind::kBox ? hit_box(lm, origin, dir) : hit_pole(lm, origin, dir);
      if (t > 0.0 && t < best) {
        best = t;
        hit = true;
      }
    }
    if (!hit) return std::nullopt;
    return best;
  }

  const std::vector<Landmark>& landmarks() const { return landmarks_; }

 private:
  static constexpr double kNone = -1.0;

  static double hit_box(const Landmark& lm, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
    const double c = std::cos(-lm.yaw), s = std::sin(-lm.yaw);
    const Eigen::Vector2d rel = o.head<2>() - lm.center;
    const Eigen::Vector3d lo(c * rel.x() - s * rel.y(), s * rel.x() + c * rel.y(), o.z());
    const Eigen::Vector3d ld(c * d.x() - s * d.y(), s * d.x() + c * d.y(), d.z());
    const Eigen::Vector3d lo_b(-lm.half_extent.x(), -lm.half_extent.y(), 0.0);
    const Eigen::Vector3d hi_b(lm.half_extent.x(), lm.half_extent.y(), lm.height);
    double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      if (std::abs(ld(a)) < 1e-12) {
        if (lo(a) < lo_b(a) || lo(a) > hi_b(a)) return kNone;
        continue;
      }
      double ta = (lo_b(a) - lo(a)) / ld(a), tb = (hi_b(a) - lo(a)) / ld(a);
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return kNone;
    }
    return t0 > 0.0 ? t0 : kNone;
  }

  static double hit_pole(const Landmark& lm, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
    const double r = lm.half_extent.x();
    const Eigen::Vector2d rel = o.head<2>() - lm.center;
    const double a = d.head<2>().squaredNorm();
    if (a < 1e-12) return kNone;
    const double b = 2.0 * rel.dot(d.head<2>());
    const double c = rel.squaredNorm() - r * r;
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return kNone;
    const double t = (-b - std::sqrt(disc)) / (2.0 * a);
    if (t <= 0.0) return kNone;
    const double z = o.z() + t * d.z();
    return (z >= 0.0 && z <= lm.height) ? t : kNone;
  }

  std::vector<Landmark> landmarks_;
  double max_range_;
  bool ground_;
};

/// Camera looking along LiDAR +x with image rows pointing down (LiDAR -z).
inline CameraModel synthetic_camera(const SyntheticSceneConfig& cfg) {
  CameraModel cam;
  cam.fx = cam.fy = cfg.focal_px;
  cam.cx = 0.5 * cfg.image_width;
  cam.cy = cfg.principal_row;
  cam.width = cfg.image_width;
  cam.height = cfg.image_height;
  cam.R << 0, -1, 0, 0, 0, -1, 1, 0, 0;
  cam.t.setZero();
  return cam;
}

namespace detail {
// Sensor pose in the world: position and heading.
struct SensorPose {
  Eigen::Vector3d position;
  double yaw;

  Eigen::Vector3d to_world(const Eigen::Vector3d& v) const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    return {c * v.x() - s * v.y(), s * v.x() + c * v.y(), v.z()};
  }
};

inline PointCloud lidar_sweep(const SyntheticWorld& world, const SensorPose& pose, const SyntheticSceneConfig& cfg,
                              std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  PointCloud cloud;
  const int azimuths = static_cast<int>(std::floor(360.0 / cfg.lidar_azimuth_step_deg));
  for (int b = 0; b < cfg.lidar_beams; ++b) {
    const double frac = cfg.lidar_beams == 1 ? 0.0 : static_cast<double>(b) / (cfg.lidar_beams - 1);
    const double elev = (cfg.lidar_top_deg + frac * (cfg.lidar_bottom_deg - cfg.lidar_top_deg)) * std::numbers::pi / 180.0;
    for (int a = 0; a < azimuths; ++a) {
      const double az = (a * cfg.lidar_azimuth_step_deg - 180.0) * std::numbers::pi / 180.0;
      const Eigen::Vector3d dir(std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az), std::sin(elev));
      const auto range = world.cast(pose.position, pose.to_world(dir));
      if (!range) continue;
      const double r = cfg.noise_sigma_m > 0.0 ? *range + cfg.noise_sigma_m * noise(rng) : *range;
      if (r <= 0.0) continue;
      cloud.points.push_back(r * dir);
      cloud.intensity.push_back(0.5f);
    }
  }
  return cloud;
}

inline IntensityImage render_camera(const SyntheticWorld& world, const SensorPose& pose, const CameraModel& cam,
                                    const SyntheticSceneConfig& cfg) {
  IntensityImage img(cam.width, cam.height);
  const Eigen::Matrix3d cam_to_lidar = cam.R.transpose();
  for (int row = 0; row < cam.height; ++row) {
    for (int col = 0; col < cam.width; ++col) {
      const Eigen::Vector3d ray_cam((col - cam.cx) / cam.fx, (row - cam.cy) / cam.fy, 1.0);
      const Eigen::Vector3d dir = (cam_to_lidar * ray_cam).normalized();
      const auto range = world.cast(pose.position, pose.to_world(dir));
      img.at(row, col) = range ? std::min(1.0, cfg.brightness_ref_m / *range) : 0.0;
    }
  }
  return img;
}

inline std::vector<Landmark> place_landmarks(const Eigen::Vector2d& place, int count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Landmark> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Landmark lm;
    lm.kind = u01(rng) < 0.4 ? Landmark::Kind::kPole : Landmark::Kind::kBox;
    const double ahead = 6.0 + 30.0 * u01(rng);
    const double side = (u01(rng) < 0.5 ? -1.0 : 1.0) * (2.5 + 12.0 * u01(rng));
    lm.center = place + Eigen::Vector2d(ahead, side);
    lm.yaw = std::numbers::pi * u01(rng);
    if (lm.kind == Landmark::Kind::kPole) {
      lm.half_extent = Eigen::Vector2d(0.15 + 0.35 * u01(rng), 0.0);
      lm.height = 3.0 + 6.0 * u01(rng);
    } else {
      lm.half_extent = Eigen::Vector2d(0.5 + 3.0 * u01(rng), 0.5 + 3.0 * u01(rng));
      lm.height = 1.0 + 7.0 * u01(rng);
    }
    out.push_back(lm);
  }
  return out;
}
}  // namespace detail

/// Paired camera/LiDAR frames of `num_places` places along a straight road.
/// Each place owns its own landmarks; every frame of a place sees the same
/// geometry from a slightly perturbed pose, with independent LiDAR noise.
/// Range noise draws from a separate stream, so the layout and poses depend
/// only on the seed.
/// Frame 0 of each place is tagged as a query and the remaining frames as
/// database entries.
inline Dataset generate_synthetic_scene(const SyntheticSceneConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.camera = synthetic_camera(cfg);
  std::mt19937_64 rng(cfg.seed);
  std::mt19937_64 noise_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int place = 0; place < cfg.num_places; ++place) {
    const Eigen::Vector2d center(place * cfg.place_spacing_m, 0.0);
    const SyntheticWorld world(detail::place_landmarks(center, cfg.landmarks_per_place, rng), cfg.max_range_m,
                               cfg.ground_plane);
    for (int f = 0; f < cfg.frames_per_place; ++f) {
      const double radius = cfg.max_pose_offset_m * std::sqrt(u01(rng));
      const double angle = 2.0 * std::numbers::pi * u01(rng);
      const double yaw = (2.0 * u01(rng) - 1.0) * cfg.max_yaw_deg * std::numbers::pi / 180.0;
      const detail::SensorPose pose{
          Eigen::Vector3d(center.x() + radius * std::cos(angle), center.y() + radius * std::sin(angle),
                          cfg.sensor_height_m),
          yaw};

      FramePair fp;
      fp.frame_id = static_cast<int>(ds.frames.size());
      fp.place_id = place;
      fp.pose.frame_id = fp.frame_id;
      fp.pose.position = Eigen::Vector3d(pose.position.x(), pose.position.y(), 0.0);
      fp.cloud = detail::lidar_sweep(world, pose, cfg, noise_rng);
      fp.intensity = detail::render_camera(world, pose, ds.camera, cfg);
      ds.frames.push_back(std::move(fp));
      ds.roles.push_back(f == 0 ? FrameRole::kQuery : FrameRole::kDatabase);
    }
  }
  return ds;
}

}  // namespace crossplace
