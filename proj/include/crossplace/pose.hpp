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

#include <vector>

namespace crossplace {

/// Position of a frame in a global metric frame.
struct Pose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  int frame_id = 0;

  double distance_to(const Pose& o) const { return (position - o.position).norm(); }
};

}  // namespace crossplace
