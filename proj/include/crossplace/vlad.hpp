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
#include <random>
#include <vector>

#include "crossplace/error.hpp"
#include "crossplace/features.hpp"

namespace crossplace {

/// NetVLAD layer: `clusters` centers in a `dim`-dimensional feature space and
/// a soft-assignment (weights, bias) that is independent of the centers.
struct VladParams {
  Eigen::MatrixXd centers;  // clusters x dim
  Eigen::MatrixXd weights;  // clusters x dim
  Eigen::VectorXd bias;     // clusters

  int clusters() const { return static_cast<int>(centers.rows()); }
  int dim() const { return static_cast<int>(centers.cols()); }
  int output_length() const { return clusters() * dim(); }

  static VladParams zeros(int clusters, int dim) {
    return VladParams{Eigen::MatrixXd::Zero(clusters, dim), Eigen::MatrixXd::Zero(clusters, dim),
                      Eigen::VectorXd::Zero(clusters)};
  }

  void validate() const {
    if (clusters() < 1) throw InvalidArgument("vlad needs at least one cluster");
    if (weights.rows() != centers.rows() || weights.cols() != centers.cols() || bias.size() != centers.rows()) {
      throw DimensionError("vlad parameter blocks disagree in shape");
    }
    if (!centers.allFinite() || !weights.allFinite() || !bias.allFinite()) {
      throw InvalidArgument("vlad parameters must be finite");
    }
  }

  VladParams& operator+=(const VladParams& o) {
    centers += o.centers;
    weights += o.weights;
    bias += o.bias;
    return *this;
  }
  VladParams& operator*=(double s) {
    centers *= s;
    weights *= s;
    bias *= s;
    return *this;
  }

  friend bool operator==(const VladParams& a, const VladParams& b) {
    return a.centers.rows() == b.centers.rows() && a.centers.cols() == b.centers.cols() &&
           a.bias.size() == b.bias.size() && a.centers == b.centers && a.weights == b.weights && a.bias == b.bias;
  }
};

/// Intermediate values of one aggregation, kept for the backward pass.
struct VladForward {
  Eigen::MatrixXd assign;     // locations x clusters, soft assignment
  Eigen::VectorXd mass;       // per-cluster sum of assignments
  Eigen::MatrixXd residuals;  // clusters x dim, before intra-normalization
  Eigen::VectorXd residual_norms;
  Eigen::VectorXd intra;      // flattened intra-normalized residuals
  double intra_norm = 0.0;
  Eigen::VectorXd output;     // L2-normalized, length clusters * dim
};

inline VladForward vlad_forward(const Eigen::MatrixXd& features, const VladParams& params) {
  if (features.cols() != params.dim()) throw DimensionError("vlad: feature dim does not match parameters");
  const int kc = params.clusters(), dim = params.dim();
  VladForward fw;

  Eigen::MatrixXd logits = features * params.weights.transpose();
  logits.rowwise() += params.bias.transpose();
  const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  fw.assign = (logits.colwise() - row_max).array().exp().matrix();
  const Eigen::VectorXd row_sum = fw.assign.rowwise().sum();
  fw.assign = fw.assign.array().colwise() / row_sum.array();

  fw.mass = fw.assign.colwise().sum().transpose();
  fw.residuals = fw.assign.transpose() * features;
  fw.residuals -= fw.mass.asDiagonal() * params.centers;
  fw.residual_norms = fw.residuals.rowwise().norm();

  fw.intra.setZero(static_cast<Eigen::Index>(kc) * dim);
  for (int k = 0; k < kc; ++k) {
    if (fw.residual_norms(k) > 0.0) {
      fw.intra.segment(static_cast<Eigen::Index>(k) * dim, dim) = fw.residuals.row(k).transpose() / fw.residual_norms(k);
    }
  }
  fw.intra_norm = fw.intra.norm();
  fw.output = fw.intra_norm > 0.0 ? Eigen::VectorXd(fw.intra / fw.intra_norm) : fw.intra;
  return fw;
}

/// VLAD vector of a (locations x dim) feature matrix: soft-assigned residual
/// sums, intra-normalized per cluster, then L2-normalized. Zero vectors stay
/// zero at both normalization steps.
inline Eigen::VectorXd vlad_aggregate(const Eigen::MatrixXd& features, const VladParams& params) {
  return vlad_forward(features, params).output;
}

inline Eigen::VectorXd vlad_aggregate(const FeatureMap& f, const VladParams& params) {
  return vlad_aggregate(f.data, params);
}

namespace detail {
// Gradient through x -> x / ||x|| given y = x / ||x||. Zero where ||x|| = 0.
inline Eigen::VectorXd normalize_backward(const Eigen::VectorXd& y, double norm, const Eigen::VectorXd& dy) {
  if (norm <= 0.0) return Eigen::VectorXd::Zero(dy.size());
  return (dy - y * y.dot(dy)) / norm;
}
}  // namespace detail

/// Gradient of a scalar loss with respect to the parameters, given the loss
/// gradient `d_output` with respect to the aggregated vector.
inline VladParams vlad_backward(const Eigen::MatrixXd& features, const VladParams& params, const VladForward& fw,
                                const Eigen::VectorXd& d_output) {
  const int kc = params.clusters(), dim = params.dim();
  const Eigen::VectorXd d_intra = detail::normalize_backward(fw.output, fw.intra_norm, d_output);

  Eigen::MatrixXd d_res = Eigen::MatrixXd::Zero(kc, dim);
  for (int k = 0; k < kc; ++k) {
    const double nk = fw.residual_norms(k);
    if (nk <= 0.0) continue;
    const auto seg = static_cast<Eigen::Index>(k) * dim;
    const Eigen::VectorXd u = fw.intra.segment(seg, dim);
    d_res.row(k) = detail::normalize_backward(u, nk, d_intra.segment(seg, dim)).transpose();
  }

  VladParams grad;
  // residuals = A^T F - diag(mass) C
  grad.centers = -(fw.mass.asDiagonal() * d_res);
  const Eigen::VectorXd center_dot = (params.centers.cwiseProduct(d_res)).rowwise().sum();
  Eigen::MatrixXd d_assign = features * d_res.transpose();
  d_assign.rowwise() -= center_dot.transpose();

  // softmax rows
  const Eigen::VectorXd inner = (fw.assign.cwiseProduct(d_assign)).rowwise().sum();
  const Eigen::MatrixXd d_logits = fw.assign.cwiseProduct((d_assign.colwise() - inner));
  grad.weights = d_logits.transpose() * features;
  grad.bias = d_logits.colwise().sum().transpose();
  return grad;
}

/// Seeds `clusters` centers from the rows of `samples` with k-means++ and sets
/// the soft assignment to weights = 2*alpha*c, bias = -alpha*||c||^2.
inline VladParams init_vlad_params(const Eigen::MatrixXd& samples, int clusters, double alpha, std::uint64_t seed) {
  if (clusters < 1) throw InvalidArgument("vlad needs at least one cluster");
  if (samples.rows() < 1) throw InvalidArgument("vlad initialization needs samples");
  const Eigen::Index n = samples.rows();
  std::mt19937_64 rng(seed);
  VladParams p = VladParams::zeros(clusters, static_cast<int>(samples.cols()));

  Eigen::VectorXd best_sq = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  Eigen::Index pick = std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng);
  for (int k = 0; k < clusters; ++k) {
    p.centers.row(k) = samples.row(pick);
    best_sq = best_sq.cwiseMin((samples.rowwise() - samples.row(pick)).rowwise().squaredNorm());
    const double total = best_sq.sum();
    if (total > 0.0) {
      double target = std::uniform_real_distribution<double>(0.0, total)(rng);
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= best_sq(i);
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng);
    }
  }
  p.weights = 2.0 * alpha * p.centers;
  p.bias = -alpha * p.centers.rowwise().squaredNorm();
  return p;
}

}  // namespace crossplace
