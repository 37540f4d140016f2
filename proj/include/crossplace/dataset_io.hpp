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
#include <Eigen/SVD>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "crossplace/error.hpp"
#include "crossplace/geometry.hpp"
#include "crossplace/image_io.hpp"
#include "crossplace/pose.hpp"

namespace crossplace {

/// One synchronized camera image + LiDAR sweep with its pose.
struct FramePair {
  IntensityImage intensity;
  PointCloud cloud;
  Pose pose;
  int frame_id = 0;
  int place_id = -1;  // ground-truth place for synthetic data, -1 otherwise
};

// --- Velodyne scans: consecutive little-endian float32 (x, y, z, intensity).

inline PointCloud parse_velodyne(std::span<const unsigned char> bytes, std::size_t* skipped = nullptr) {
  static_assert(std::endian::native == std::endian::little, "velodyne parsing assumes a little-endian host");
  if (bytes.size() % 16 != 0) {
    throw DataError("velodyne data length " + std::to_string(bytes.size()) + " is not a multiple of 16 bytes");
  }
  PointCloud cloud;
  const std::size_t n = bytes.size() / 16;
  cloud.points.reserve(n);
  cloud.intensity.reserve(n);
  std::size_t bad = 0;
  for (std::size_t i = 0; i < n; ++i) {
    float rec[4];
    std::memcpy(rec, bytes.data() + 16 * i, 16);
    if (!std::isfinite(rec[0]) || !std::isfinite(rec[1]) || !std::isfinite(rec[2]) || !std::isfinite(rec[3])) {
      ++bad;
      continue;
    }
    cloud.points.emplace_back(rec[0], rec[1], rec[2]);
    cloud.intensity.push_back(std::clamp(rec[3], 0.0f, 1.0f));
  }
  if (skipped) *skipped = bad;
  return cloud;
}

inline PointCloud read_velodyne_bin(const std::string& path, std::size_t* skipped = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open velodyne file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  try {
    return parse_velodyne(bytes, skipped);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline void write_velodyne_bin(const PointCloud& cloud, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write velodyne file: " + path);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const float rec[4] = {static_cast<float>(cloud.points[i].x()), static_cast<float>(cloud.points[i].y()),
                          static_cast<float>(cloud.points[i].z()),
                          cloud.has_intensity() ? cloud.intensity[i] : 0.0f};
    os.write(reinterpret_cast<const char*>(rec), 16);
  }
  if (!os) throw DataError("failed writing velodyne file: " + path);
}

// --- Calibration: `KEY: v1 ... v12` lines, P2 (3x4 projection) and Tr (3x4 LiDAR->camera).

/// Camera model from a calibration file. The image size is not part of the
/// file format and has to be supplied. Tr's rotation must be orthonormal to
/// within 1e-3; it is then snapped to the nearest rotation.
inline CameraModel parse_calib(std::istream& is, int width, int height, const std::string& name = "calib") {
  std::map<std::string, std::vector<double>> entries;
  std::string line;
  while (std::getline(is, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::istringstream vals(line.substr(colon + 1));
    std::vector<double> v;
    double x = 0.0;
    while (vals >> x) v.push_back(x);
    entries[line.substr(0, colon)] = std::move(v);
  }
  auto get12 = [&](std::initializer_list<const char*> keys) -> const std::vector<double>& {
    for (const char* k : keys) {
      auto it = entries.find(k);
      if (it == entries.end()) continue;
      if (it->second.size() != 12) throw DataError(name + ": key " + k + " needs 12 values");
      return it->second;
    }
    throw DataError(name + ": missing key " + std::string(*keys.begin()));
  };
  const std::vector<double>& p2 = get12({"P2"});
  const std::vector<double>& tr = get12({"Tr", "Tr_velo_to_cam"});

  CameraModel cam;
  cam.fx = p2[0];
  cam.cx = p2[2];
  cam.fy = p2[5];
  cam.cy = p2[6];
  cam.width = width;
  cam.height = height;
  if (!(cam.fx > 0.0) || !(cam.fy > 0.0)) throw DataError(name + ": P2 focal lengths must be positive");

  Eigen::Matrix3d r;
  r << tr[0], tr[1], tr[2], tr[4], tr[5], tr[6], tr[8], tr[9], tr[10];
  const double ortho_err = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (!(ortho_err <= 1e-3) || r.determinant() <= 0.0) {
    throw DataError(name + ": Tr rotation is not orthonormal (error " + std::to_string(ortho_err) + ")");
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  cam.R = svd.matrixU() * svd.matrixV().transpose();

  // P2 = K [I | b]: fold the rectified-camera offset b into the extrinsics.
  Eigen::Matrix3d k;
  k << p2[0], p2[1], p2[2], p2[4], p2[5], p2[6], p2[8], p2[9], p2[10];
  const Eigen::Vector3d b = k.inverse() * Eigen::Vector3d(p2[3], p2[7], p2[11]);
  cam.t = Eigen::Vector3d(tr[3], tr[7], tr[11]) + b;
  try {
    cam.validate();
  } catch (const InvalidArgument& e) {
    throw DataError(name + ": " + e.what());
  }
  return cam;
}

inline CameraModel read_calib(const std::string& path, int width = 1226, int height = 370) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open calibration file: " + path);
  return parse_calib(is, width, height, path);
}

inline void write_calib(const CameraModel& cam, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write calibration file: " + path);
  os << std::setprecision(17);
  os << "P2: " << cam.fx << " 0 " << cam.cx << " 0 0 " << cam.fy << ' ' << cam.cy << " 0 0 0 1 0\n";
  os << "Tr:";
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) os << ' ' << cam.R(r, c);
    os << ' ' << cam.t(r);
  }
  os << '\n';
}

// --- Poses: one row-major 3x4 matrix per line; frame id = index of the pose.

inline std::vector<Pose> parse_poses(std::istream& is, const std::string& name = "poses") {
  std::vector<Pose> poses;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    std::vector<double> v;
    double x = 0.0;
    while (ss >> x) v.push_back(x);
    if (!ss.eof() || v.size() != 12) {
      throw DataError(name + ": line " + std::to_string(line_no) + " does not hold 12 numbers");
    }
    Pose p;
    p.position = Eigen::Vector3d(v[3], v[7], v[11]);
    if (!p.position.allFinite()) throw DataError(name + ": line " + std::to_string(line_no) + " is not finite");
    p.frame_id = static_cast<int>(poses.size());
    poses.push_back(p);
  }
  return poses;
}

inline std::vector<Pose> read_poses(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open pose file: " + path);
  return parse_poses(is, path);
}

inline void write_poses(const std::vector<Pose>& poses, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write pose file: " + path);
  os << std::setprecision(17);
  for (const Pose& p : poses) {
    os << "1 0 0 " << p.position.x() << " 0 1 0 " << p.position.y() << " 0 0 1 " << p.position.z() << '\n';
  }
}

// --- Dataset directories.
//
//   calib.txt, poses.txt
//   velodyne/NNNNNN.bin
//   image_2/NNNNNN.{png,pgm,ppm}
//   frames.txt (optional): "frame_id place_id role" with role query|database|both

enum class FrameRole { kBoth, kQuery, kDatabase };

struct Dataset {
  CameraModel camera;
  std::vector<FramePair> frames;
  std::vector<FrameRole> roles;  // parallel to frames

  bool is_query(std::size_t i) const { return roles.empty() || roles[i] != FrameRole::kDatabase; }
  bool is_database(std::size_t i) const { return roles.empty() || roles[i] != FrameRole::kQuery; }
};

namespace detail {
inline std::string frame_stem(int id) {
  std::ostringstream ss;
  ss << std::setw(6) << std::setfill('0') << id;
  return ss.str();
}

inline std::string find_image(const std::filesystem::path& dir, int id) {
  for (const char* ext : {".png", ".pgm", ".ppm"}) {
    const auto p = dir / (frame_stem(id) + ext);
    if (std::filesystem::exists(p)) return p.string();
  }
  return {};
}
}  // namespace detail

/// Loads a KITTI-odometry-style sequence. `poses_path` overrides
/// `<dir>/poses.txt` (KITTI keeps poses outside the sequence directory).
inline Dataset load_dataset_dir(const std::string& dir, const std::string& poses_path = {}) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw DataError("dataset directory does not exist: " + dir);
  const std::vector<Pose> poses = read_poses(poses_path.empty() ? (root / "poses.txt").string() : poses_path);

  Dataset ds;
  std::map<int, std::pair<int, FrameRole>> meta;
  if (std::ifstream fm(root / "frames.txt"); fm) {
    std::string line;
    while (std::getline(fm, line)) {
      std::istringstream ss(line);
      int id = 0, place = -1;
      std::string role;
      if (!(ss >> id >> place >> role)) continue;
      meta[id] = {place, role == "query" ? FrameRole::kQuery : role == "database" ? FrameRole::kDatabase : FrameRole::kBoth};
    }
  }

  int width = 0, height = 0;
  for (const Pose& pose : poses) {
    FramePair fp;
    fp.frame_id = pose.frame_id;
    fp.pose = pose;
    const std::string img_path = detail::find_image(root / "image_2", pose.frame_id);
    if (img_path.empty()) throw DataError("missing image for frame " + std::to_string(pose.frame_id) + " in " + dir);
    fp.intensity = read_intensity_image(img_path);
    if (width == 0) {
      width = fp.intensity.width;
      height = fp.intensity.height;
    } else if (fp.intensity.width != width || fp.intensity.height != height) {
      throw DataError("image size changes within the sequence at " + img_path);
    }
    fp.cloud = read_velodyne_bin((root / "velodyne" / (detail::frame_stem(pose.frame_id) + ".bin")).string());
    FrameRole role = FrameRole::kBoth;
    if (auto it = meta.find(pose.frame_id); it != meta.end()) {
      fp.place_id = it->second.first;
      role = it->second.second;
    }
    ds.frames.push_back(std::move(fp));
    ds.roles.push_back(role);
  }
  if (ds.frames.empty()) throw DataError("dataset has no frames: " + dir);
  ds.camera = read_calib((root / "calib.txt").string(), width, height);
  return ds;
}

inline void write_dataset_dir(const Dataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root / "velodyne", ec);
  fs::create_directories(root / "image_2", ec);
  if (ec) throw DataError("cannot create dataset directory: " + dir);
  write_calib(ds.camera, (root / "calib.txt").string());
  std::vector<Pose> poses;
  std::ofstream fm(root / "frames.txt", std::ios::trunc);
  if (!fm) throw DataError("cannot write frames.txt in " + dir);
  for (std::size_t i = 0; i < ds.frames.size(); ++i) {
    const FramePair& fp = ds.frames[i];
    if (fp.frame_id != static_cast<int>(i)) throw InvalidArgument("dataset frame ids must be 0..n-1 in order");
    poses.push_back(fp.pose);
    write_velodyne_bin(fp.cloud, (root / "velodyne" / (detail::frame_stem(fp.frame_id) + ".bin")).string());
    write_intensity_image(fp.intensity, (root / "image_2" / (detail::frame_stem(fp.frame_id) + ".pgm")).string());
    const FrameRole role = ds.roles.empty() ? FrameRole::kBoth : ds.roles[i];
    fm << fp.frame_id << ' ' << fp.place_id << ' '
       << (role == FrameRole::kQuery ? "query" : role == FrameRole::kDatabase ? "database" : "both") << '\n';
  }
  write_poses(poses, (root / "poses.txt").string());
}

}  // namespace crossplace
