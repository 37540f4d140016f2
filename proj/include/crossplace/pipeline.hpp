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

#include "crossplace/depth_completion.hpp"
#include "crossplace/error.hpp"
#include "crossplace/geometry.hpp"

namespace crossplace {

/// Settings that turn raw sensor data into encoder inputs.
struct PreprocessConfig {
  double max_elevation_deg = 5.0;
  bool use_completion = true;
  CompletionConfig completion;

  void validate() const {
    if (!(max_elevation_deg > 0.0)) throw InvalidArgument("max_elevation_deg must be positive");
    completion.validate();
  }
};

/// Point cloud -> projected depth image cropped to the shared field of view,
/// optionally completed.
inline DepthImage lidar_to_depth_input(const PointCloud& cloud, const CameraModel& cam, const PreprocessConfig& cfg,
                                       ProjectionStats* stats = nullptr) {
  DepthImage cropped = crop_fov(project_point_cloud(cloud, cam, stats), cam, cfg.max_elevation_deg);
  return cfg.use_completion ? complete_depth(cropped, cfg.completion) : cropped;
}

inline IntensityImage camera_to_input(const IntensityImage& image, const CameraModel& cam,
                                      const PreprocessConfig& cfg) {
  return crop_fov(image, cam, cfg.max_elevation_deg);
}

}  // namespace crossplace
