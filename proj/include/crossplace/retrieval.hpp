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
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crossplace/dataset_io.hpp"
#include "crossplace/encoder.hpp"
#include "crossplace/error.hpp"
#include "crossplace/pipeline.hpp"
#include "crossplace/pose.hpp"

namespace crossplace {

/// Greedy arc-length sampling: keeps the first pose, then every pose whose
/// traveled distance since the last kept one reaches `spacing_m`.
inline std::vector<int> sample_keyframes(std::span<const Pose> trajectory, double spacing_m) {
  if (!(spacing_m > 0.0)) throw InvalidArgument("keyframe spacing must be positive");
  std::vector<int> kept;
  if (trajectory.empty()) return kept;
  kept.push_back(trajectory.front().frame_id);
  double traveled = 0.0;
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    traveled += trajectory[i].distance_to(trajectory[i - 1]);
    if (traveled >= spacing_m) {
      kept.push_back(trajectory[i].frame_id);
      traveled = 0.0;
    }
  }
  return kept;
}

struct SearchHit {
  int frame_id = 0;
  double distance = 0.0;

  friend bool operator==(const SearchHit&, const SearchHit&) = default;
};

/// Immutable keyframe database searched by exact Euclidean distance.
class DescriptorIndex {
 public:
  DescriptorIndex() = default;

  void add(int frame_id, const GlobalDescriptor& d, const Pose& pose) {
    if (!ids_.empty() && d.size() != dim_) throw DimensionError("descriptor length differs from index");
    if (!d.values.allFinite()) throw InvalidArgument("descriptor is not finite");
    const double norm = d.values.norm();
    if (std::abs(norm - 1.0) > 1e-6) throw InvalidArgument("index descriptors must be unit norm");
    if (ids_.empty()) dim_ = d.size();
    data_.insert(data_.end(), d.values.data(), d.values.data() + dim_);
    ids_.push_back(frame_id);
    poses_.push_back(pose);
  }

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  Eigen::Index dim() const { return dim_; }
  int frame_id(std::size_t i) const { return ids_[i]; }
  const Pose& pose(std::size_t i) const { return poses_[i]; }
  Eigen::Map<const Eigen::VectorXd> column(std::size_t i) const {
    return Eigen::Map<const Eigen::VectorXd>(data_.data() + i * static_cast<std::size_t>(dim_), dim_);
  }
  GlobalDescriptor descriptor(std::size_t i) const { return {column(i)}; }

  /// Nearest entries in ascending distance, ties broken by smaller frame id.
  std::vector<SearchHit> query(const GlobalDescriptor& q, int top_n) const {
    if (top_n < 1) throw InvalidArgument("top_n must be at least 1");
    if (empty()) throw InvalidArgument("cannot query an empty index");
    if (q.size() != dim()) throw DimensionError("query descriptor length differs from index");
    const std::size_t n = size();
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) sq[i] = (column(i) - q.values).squaredNorm();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(top_n), n);
    auto less = [&](std::size_t a, std::size_t b) { return sq[a] != sq[b] ? sq[a] < sq[b] : ids_[a] < ids_[b]; };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(), less);
    std::vector<SearchHit> hits;
    hits.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) hits.push_back({ids_[order[i]], std::sqrt(sq[order[i]])});
    return hits;
  }

  /// Position of `frame_id` in the index, or npos.
  std::size_t find(int frame_id) const {
    const auto it = std::find(ids_.begin(), ids_.end(), frame_id);
    return it == ids_.end() ? static_cast<std::size_t>(-1) : static_cast<std::size_t>(it - ids_.begin());
  }

 private:
  Eigen::Index dim_ = 0;
  std::vector<double> data_;  // entries x dim, contiguous per entry
  std::vector<int> ids_;
  std::vector<Pose> poses_;
};

struct IndexBuildStats {
  std::size_t encoded = 0;
  std::size_t failed = 0;
};

/// Encodes the LiDAR sweep of each listed frame (project, crop, complete,
/// encode). Frames that fail to encode are skipped and counted.
inline DescriptorIndex build_index(const Dataset& ds, std::span<const int> frame_ids, const EncoderModel& model,
                                   const PreprocessConfig& pre, IndexBuildStats* stats = nullptr) {
  DescriptorIndex index;
  IndexBuildStats local;
  for (int id : frame_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= ds.frames.size()) {
      ++local.failed;
      continue;
    }
    const FramePair& fp = ds.frames[static_cast<std::size_t>(id)];
    try {
      const GlobalDescriptor d = encode(lidar_to_depth_input(fp.cloud, ds.camera, pre), model);
      index.add(fp.frame_id, d, fp.pose);
      ++local.encoded;
    } catch (const Error&) {
      ++local.failed;
    }
  }
  if (stats) *stats = local;
  return index;
}

// Index file: "XPLI" | u32 version | i64 entries | i64 dim |
//   per entry: i32 frame_id, f64 x, f64 y, f64 z, f64[dim]
inline void save_index(const DescriptorIndex& index, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write index file: " + path);
  os.write("XPLI", 4);
  detail::write_pod<std::uint32_t>(os, 1);
  detail::write_pod<std::int64_t>(os, static_cast<std::int64_t>(index.size()));
  detail::write_pod<std::int64_t>(os, index.dim());
  for (std::size_t i = 0; i < index.size(); ++i) {
    detail::write_pod<std::int32_t>(os, index.frame_id(i));
    for (int a = 0; a < 3; ++a) detail::write_pod<double>(os, index.pose(i).position(a));
    const auto col = index.column(i);
    for (Eigen::Index k = 0; k < col.size(); ++k) detail::write_pod<double>(os, col(k));
  }
  if (!os) throw DataError("failed writing index file: " + path);
}

inline DescriptorIndex load_index(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open index file: " + path);
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "XPLI", 4) != 0) throw DataError("not a crossplace index file: " + path);
  if (detail::read_pod<std::uint32_t>(is) != 1) throw DataError("unsupported index version: " + path);
  const auto n = detail::read_pod<std::int64_t>(is);
  const auto dim = detail::read_pod<std::int64_t>(is);
  if (n < 0 || dim < 0 || dim > (1 << 24)) throw DataError("corrupt index header: " + path);
  DescriptorIndex index;
  for (std::int64_t i = 0; i < n; ++i) {
    Pose p;
    p.frame_id = detail::read_pod<std::int32_t>(is);
    for (int a = 0; a < 3; ++a) p.position(a) = detail::read_pod<double>(is);
    GlobalDescriptor d{Eigen::VectorXd(dim)};
    for (Eigen::Index k = 0; k < dim; ++k) d.values(k) = detail::read_pod<double>(is);
    index.add(p.frame_id, d, p);
  }
  return index;
}

// ---------------------------------------------------------------------------

struct RecallReport {
  std::map<int, double> recall_at;
  double recall_at_one_percent = 0.0;
  int one_percent_n = 1;
  std::size_t num_queries = 0;   // queries with at least one true match in the index
  std::size_t num_excluded = 0;  // queries without any, left out of the denominator
  double threshold_m = 10.0;
};

struct QueryRecord {
  GlobalDescriptor descriptor;
  Pose pose;
};

/// Number of results that counts as the top 1% of an index.
inline int one_percent_depth(std::size_t index_size) {
  return std::max(1, static_cast<int>(std::lround(0.01 * static_cast<double>(index_size))));
}

/// A query is recalled at N when one of its N nearest entries lies within
/// `threshold_m` of the query position.
inline RecallReport evaluate_recall(std::span<const QueryRecord> queries, const DescriptorIndex& index,
                                    double threshold_m, std::span<const int> ns) {
  if (!(threshold_m > 0.0)) throw InvalidArgument("recall threshold must be positive");
  RecallReport rep;
  rep.threshold_m = threshold_m;
  rep.one_percent_n = one_percent_depth(index.size());
  for (int n : ns) {
    if (n < 1) throw InvalidArgument("recall depths must be at least 1");
    rep.recall_at[n] = 0.0;
  }
  if (index.empty()) return rep;

  int depth = rep.one_percent_n;
  for (int n : ns) depth = std::max(depth, n);
  std::map<int, std::size_t> hits_at;
  std::size_t hits_pct = 0;
  for (const QueryRecord& q : queries) {
    bool answerable = false;
    for (std::size_t i = 0; i < index.size() && !answerable; ++i) {
      answerable = index.pose(i).distance_to(q.pose) <= threshold_m;
    }
    if (!answerable) {
      ++rep.num_excluded;
      continue;
    }
    ++rep.num_queries;
    const std::vector<SearchHit> hits = index.query(q.descriptor, depth);
    int first_true = -1;
    for (std::size_t r = 0; r < hits.size(); ++r) {
      const Pose& p = index.pose(index.find(hits[r].frame_id));
      if (p.distance_to(q.pose) <= threshold_m) {
        first_true = static_cast<int>(r);
        break;
      }
    }
    if (first_true < 0) continue;
    for (int n : ns)
      if (first_true < n) ++hits_at[n];
    if (first_true < rep.one_percent_n) ++hits_pct;
  }
  if (rep.num_queries > 0) {
    const double denom = static_cast<double>(rep.num_queries);
    for (auto& [n, r] : rep.recall_at) r = static_cast<double>(hits_at[n]) / denom;
    rep.recall_at_one_percent = static_cast<double>(hits_pct) / denom;
  }
  return rep;
}

/// Human-readable table.
inline void write_report_table(std::ostream& os, const RecallReport& rep) {
  os << "queries evaluated : " << rep.num_queries << "\n";
  os << "queries excluded  : " << rep.num_excluded << "\n";
  os << "threshold (m)     : " << rep.threshold_m << "\n";
  os << "  N      recall\n";
  for (const auto& [n, r] : rep.recall_at) os << "  " << std::left << std::setw(6) << n << ' ' << std::fixed << std::setprecision(4) << r << "\n";
  os << "  1%(" << rep.one_percent_n << ")  " << std::fixed << std::setprecision(4) << rep.recall_at_one_percent << "\n";
  os.unsetf(std::ios::floatfield);
}

/// Machine-readable records, one per line.
inline void write_report_records(std::ostream& os, const RecallReport& rep) {
  os << std::setprecision(17);
  os << "num_queries=" << rep.num_queries << "\n";
  os << "num_excluded=" << rep.num_excluded << "\n";
  os << "threshold_m=" << rep.threshold_m << "\n";
  for (const auto& [n, r] : rep.recall_at) os << "recall@" << n << "=" << r << "\n";
  os << "recall@1%=" << rep.recall_at_one_percent << "\n";
  os << "recall@1%_n=" << rep.one_percent_n << "\n";
}

}  // namespace crossplace
