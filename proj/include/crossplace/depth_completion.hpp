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

#include <algorithm>
#include <cmath>

#include "crossplace/error.hpp"
#include "crossplace/geometry.hpp"

namespace crossplace {

struct CompletionConfig {
  double sigma = 3.0;  // depth gap (m) above which the nearer neighbor wins
  int max_gap = 16;    // longest vertical run of missing pixels that is filled

  void validate() const {
    if (!(sigma > 0.0)) throw InvalidArgument("completion sigma must be positive");
    if (max_gap < 1) throw InvalidArgument("completion max_gap must be at least 1");
  }
};

/// Fills missing pixels from the nearest valid pixels above and below in the
/// same column. Neighbors closer than `sigma` in depth are linearly
/// interpolated; otherwise the nearer (foreground) depth is copied. Only
/// pixels of the input image are used as sources.
inline DepthImage complete_depth(const DepthImage& sparse, const CompletionConfig& cfg = {}) {
  cfg.validate();
  DepthImage out = sparse;
  for (int col = 0; col < sparse.width; ++col) {
    int above = -1;
    for (int row = 0; row < sparse.height; ++row) {
      if (!sparse.is_valid(row, col)) continue;
      const int gap = row - above - 1;
      if (above >= 0 && gap >= 1 && row - above <= cfg.max_gap + 1) {
        const double d_above = sparse.at(above, col);
        const double d_below = sparse.at(row, col);
        const bool same_surface = std::abs(d_below - d_above) <= cfg.sigma;
        for (int r = above + 1; r < row; ++r) {
          const double i = row - r;    // rows down to the lower neighbor
          const double j = r - above;  // rows up to the upper neighbor
          out.set(r, col, same_surface ? (j * d_below + i * d_above) / (i + j) : std::min(d_below, d_above));
        }
      }
      above = row;
    }
  }
  return out;
}

}  // namespace crossplace
