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


// Random instance generators and brute-force reference implementations used
// by the unit tests and the acceptance binary.

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "crossplace.hpp"

namespace crossplace::testing {

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

/// Camera looking along +z with a random small rotation and offset.
inline CameraModel random_camera(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CameraModel cam;
  cam.width = 16 + static_cast<int>(u(rng) * 112);
  cam.height = 8 + static_cast<int>(u(rng) * 56);
  cam.fx = 20.0 + 200.0 * u(rng);
  cam.fy = cam.fx * (0.8 + 0.4 * u(rng));
  cam.cx = cam.width * (0.3 + 0.4 * u(rng));
  cam.cy = cam.height * (0.3 + 0.4 * u(rng));
  cam.R = random_rotation(rng);
  cam.t = Eigen::Vector3d(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5);
  return cam;
}

/// Points scattered around the camera, many of them in front of it. A few
/// share a pixel on purpose (scaled copies along one ray).
inline PointCloud random_cloud(std::mt19937_64& rng, const CameraModel& cam, int n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PointCloud cloud;
  for (int i = 0; i < n; ++i) {
    Eigen::Vector3d pc(u(rng) * 10.0, u(rng) * 5.0, u(rng) * 15.0 + 8.0);
    if (i % 7 == 0 && !cloud.points.empty()) {
      const Eigen::Vector3d prev = cam.R * cloud.points.back() + cam.t;
      pc = prev * (1.0 + 0.5 * std::abs(u(rng)));
    }
    cloud.points.push_back(cam.R.transpose() * (pc - cam.t));
  }
  return cloud;
}

/// Per-pixel minimum of LiDAR-frame ranges, computed by scanning every point
/// for every pixel.
inline DepthImage brute_force_projection(const PointCloud& cloud, const CameraModel& cam) {
  DepthImage img(cam.width, cam.height);
  std::vector<std::pair<int, int>> pix(cloud.size(), {-1, -1});
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3d pc = cam.R * cloud.points[i] + cam.t;
    if (!(pc.z() > 1e-6)) continue;
    const double u = std::round(cam.fx * pc.x() / pc.z() + cam.cx);
    const double v = std::round(cam.fy * pc.y() / pc.z() + cam.cy);
    if (u < 0 || v < 0 || u >= cam.width || v >= cam.height) continue;
    pix[i] = {static_cast<int>(v), static_cast<int>(u)};
  }
  for (int r = 0; r < cam.height; ++r) {
    for (int c = 0; c < cam.width; ++c) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (pix[i].first == r && pix[i].second == c) best = std::min(best, cloud.points[i].norm());
      }
      if (std::isfinite(best)) img.set(r, c, best);
    }
  }
  return img;
}

/// LiDAR-frame point seen at pixel (row, col) whose range is `range`, or
/// false when no point on the pixel's ray in front of the camera has it.
inline bool back_project(int row, int col, double range, const CameraModel& cam, Eigen::Vector3d& out) {
  const Eigen::Vector3d ray((col - cam.cx) / cam.fx, (row - cam.cy) / cam.fy, 1.0);
  // Camera point s * ray maps to lidar point R^T (s ray - t); solve |.| = range.
  const double a = ray.squaredNorm();
  const double b = -2.0 * ray.dot(cam.t);
  const double c = cam.t.squaredNorm() - range * range;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return false;
  const double s = (-b + std::sqrt(disc)) / (2.0 * a);
  if (!(s > 1e-6)) return false;
  out = cam.R.transpose() * (s * ray - cam.t);
  return true;
}

/// Random sparse depth image, `fill` = fraction of valid pixels.
inline DepthImage random_sparse_depth(std::mt19937_64& rng, int w, int h, double fill) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DepthImage d(w, h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (u(rng) < fill) d.set(r, c, 1.0 + 30.0 * u(rng));
  return d;
}

/// Completion computed pixel by pixel: search up and down the column of the
/// sparse input for the nearest valid pixels and apply the fill rule.
inline DepthImage reference_completion(const DepthImage& in, double sigma, int max_gap) {
  DepthImage out = in;
  for (int r = 0; r < in.height; ++r) {
    for (int c = 0; c < in.width; ++c) {
      if (in.is_valid(r, c)) continue;
      int up = r - 1, down = r + 1;
      while (up >= 0 && !in.is_valid(up, c)) --up;
      while (down < in.height && !in.is_valid(down, c)) ++down;
      if (up < 0 || down >= in.height) continue;
      const int i = down - r, j = r - up;
      if (i + j > max_gap + 1) continue;
      const double below = in.at(down, c), above = in.at(up, c);
      if (std::abs(below - above) <= sigma) {
        out.set(r, c, (j * below + static_cast<double>(i) * above) / (i + j));
      } else {
        out.set(r, c, std::min(below, above));
      }
    }
  }
  return out;
}

inline Eigen::VectorXd random_unit(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = n(rng);
  return v / v.norm();
}

inline Eigen::MatrixXd random_nonneg(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::uniform_real_distribution<double> u(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = u(rng);
  return m;
}

/// Triplet loss written out term by term. Distances use the same Euclidean
/// norm primitive so that results compare bit for bit.
inline double naive_triplet_loss(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                                 const std::vector<Eigen::VectorXd>& negs, double margin, bool hardest) {
  auto dist = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).norm(); };
  std::vector<double> terms;
  for (const auto& n : negs) terms.push_back(std::max(margin + dist(q, p) - dist(q, n), 0.0));
  if (hardest) return terms.empty() ? 0.0 : *std::max_element(terms.begin(), terms.end());
  double total = 0.0;
  for (double t : terms) total += t;
  return total;
}

struct NaiveEntry {
  int id = 0;
  Eigen::VectorXd desc;
  Eigen::Vector3d pos;
};

/// Every query-database distance, full sort, then the recall definition.
struct NaiveRecall {
  std::map<int, double> at;
  double one_percent = 0.0;
  std::size_t counted = 0;
  std::size_t excluded = 0;
};

inline std::vector<int> naive_ranking(const std::vector<NaiveEntry>& db, const Eigen::VectorXd& q) {
  std::vector<std::pair<double, int>> all;
  for (std::size_t i = 0; i < db.size(); ++i) all.push_back({(db[i].desc - q).squaredNorm(), static_cast<int>(i)});
  std::sort(all.begin(), all.end(), [&](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : db[a.second].id < db[b.second].id;
  });
  std::vector<int> order;
  for (const auto& [d, i] : all) order.push_back(i);
  return order;
}

inline NaiveRecall naive_recall(const std::vector<NaiveEntry>& db, const std::vector<NaiveEntry>& queries,
                                double threshold, const std::vector<int>& ns) {
  NaiveRecall out;
  const int pct = std::max(1, static_cast<int>(std::lround(db.size() / 100.0)));
  std::map<int, std::size_t> hits;
  std::size_t hits_pct = 0;
  for (const auto& q : queries) {
    bool any = false;
    for (const auto& e : db) any = any || (e.pos - q.pos).norm() <= threshold;
    if (!any) {
      ++out.excluded;
      continue;
    }
    ++out.counted;
    const std::vector<int> order = naive_ranking(db, q.desc);
    auto recalled = [&](int n) {
      for (int r = 0; r < n && r < static_cast<int>(order.size()); ++r)
        if ((db[order[r]].pos - q.pos).norm() <= threshold) return true;
      return false;
    };
    for (int n : ns) hits[n] += recalled(n) ? 1 : 0;
    hits_pct += recalled(pct) ? 1 : 0;
  }
  for (int n : ns) out.at[n] = out.counted ? static_cast<double>(hits[n]) / out.counted : 0.0;
  out.one_percent = out.counted ? static_cast<double>(hits_pct) / out.counted : 0.0;
  return out;
}

/// Best one-to-one matching between predicted and true labels (Hungarian
/// algorithm on the contingency table); returns the matched fraction.
inline double matched_label_agreement(const std::vector<int>& pred, const std::vector<int>& truth, int k) {
  const int n = k;
  std::vector<std::vector<double>> cost(n + 1, std::vector<double>(n + 1, 0.0));
  for (std::size_t i = 0; i < pred.size(); ++i) cost[pred[i] + 1][truth[i] + 1] -= 1.0;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1), v(n + 1);
  std::vector<int> p(n + 1), way(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0][j] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  double matched = 0.0;
  for (int j = 1; j <= n; ++j) matched -= cost[p[j]][j];
  return matched / static_cast<double>(pred.size());
}

/// Rows drawn around `k` separated non-negative centroids; labels returned in `labels`.
inline Eigen::MatrixXd clustered_rows(std::mt19937_64& rng, int k, int per_cluster, std::vector<int>& labels) {
  const int dim = k + 8;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(k, dim);
  for (int c = 0; c < k; ++c) {
    for (int d = 0; d < dim; ++d) centroids(c, d) = 0.2 * u(rng);
    centroids(c, c) = 5.0;
  }
  Eigen::MatrixXd a(k * per_cluster, dim);
  labels.clear();
  for (int c = 0; c < k; ++c) {
    for (int i = 0; i < per_cluster; ++i) {
      const int row = c * per_cluster + i;
      const double scale = 0.5 + u(rng);
      for (int d = 0; d < dim; ++d) a(row, d) = scale * centroids(c, d) + 0.05 * u(rng);
      labels.push_back(c);
    }
  }
  return a;
}

inline std::vector<int> row_argmax(const Eigen::MatrixXd& m) {
  std::vector<int> out(m.rows());
  for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r).maxCoeff(&out[r]);
  return out;
}

/// Small encoder with random VLAD parameters for gradient checks.
inline EncoderModel random_small_model(std::mt19937_64& rng, int c, int k, int clusters) {
  std::normal_distribution<double> n(0.0, 1.0);
  EncoderModel m;
  auto fill = [&](int kc, int dim) {
    VladParams p = VladParams::zeros(kc, dim);
    for (int i = 0; i < kc; ++i) {
      for (int j = 0; j < dim; ++j) {
        p.centers(i, j) = 0.5 * std::abs(n(rng));
        p.weights(i, j) = n(rng);
      }
      p.bias(i) = 0.5 * n(rng);
    }
    return p;
  };
  m.vlad_cnn = fill(clusters, c);
  m.nmf_basis = NonNegMatrix(random_nonneg(rng, k, c));
  m.vlad_nmf = fill(clusters, k);
  return m;
}

inline FrameFeatures random_frame_features(std::mt19937_64& rng, int locations, int c, int k) {
  return FrameFeatures{random_nonneg(rng, locations, c), random_nonneg(rng, locations, k)};
}

/// Loss of one triplet as a function of the model, for finite differences.
inline double triplet_objective(const FrameFeatures& q, const FrameFeatures& p, const std::vector<FrameFeatures>& negs,
                                const EncoderModel& m, double margin, bool hardest) {
  std::vector<GlobalDescriptor> n;
  for (const auto& f : negs) n.push_back(encode_features(f, m));
  return triplet_loss(encode_features(q, m), encode_features(p, m), n, margin, hardest);
}

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  double min_hinge_gap = 0.0;
};

/// Compares loss_gradients against central differences (step `h`) on every
/// VLAD parameter of both branches. The relative error of a coordinate is
/// |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline GradientCheck check_triplet_gradients(const FrameFeatures& q, const FrameFeatures& p,
                                             const std::vector<FrameFeatures>& negs, EncoderModel m, double margin,
                                             bool hardest, double h = 1e-5, double floor = 1e-6) {
  std::vector<const FrameFeatures*> ptrs;
  for (const auto& f : negs) ptrs.push_back(&f);
  const TripletGradient tg = loss_gradients(q, p, ptrs, m, margin, hardest);
  GradientCheck out;
  const GlobalDescriptor dq = encode_features(q, m), dp = encode_features(p, m);
  out.min_hinge_gap = std::numeric_limits<double>::infinity();
  for (const auto& f : negs) {
    out.min_hinge_gap = std::min(out.min_hinge_gap, std::abs(margin + dq.distance(dp) - dq.distance(encode_features(f, m))));
  }
  auto sweep = [&](double* data, Eigen::Index size, const double* analytic) {
    for (Eigen::Index i = 0; i < size; ++i) {
      const double keep = data[i];
      data[i] = keep + h;
      const double up = triplet_objective(q, p, negs, m, margin, hardest);
      data[i] = keep - h;
      const double down = triplet_objective(q, p, negs, m, margin, hardest);
      data[i] = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
      out.max_relative_error = std::max(out.max_relative_error, std::abs(analytic[i] - numeric) / denom);
      ++out.coordinates;
    }
  };
  auto sweep_params = [&](VladParams& params, const VladParams& grad) {
    sweep(params.centers.data(), params.centers.size(), grad.centers.data());
    sweep(params.weights.data(), params.weights.size(), grad.weights.data());
    sweep(params.bias.data(), params.bias.size(), grad.bias.data());
  };
  sweep_params(m.vlad_cnn, tg.grad.cnn);
  if (m.has_nmf_branch()) sweep_params(m.vlad_nmf, tg.grad.nmf);
  return out;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("crossplace_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace crossplace::testing
