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
#include <functional>
#include <random>
#include <vector>

#include "crossplace/error.hpp"
#include "crossplace/features.hpp"

namespace crossplace {

/// Dense matrix with finite, non-negative entries (checked on construction).
class NonNegMatrix {
 public:
  NonNegMatrix() = default;
  explicit NonNegMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {
    if (!m_.allFinite()) throw InvalidArgument("matrix has non-finite entries");
    if (m_.size() > 0 && m_.minCoeff() < 0.0) throw InvalidArgument("matrix has negative entries");
  }

  const Eigen::MatrixXd& matrix() const { return m_; }
  Eigen::Index rows() const { return m_.rows(); }
  Eigen::Index cols() const { return m_.cols(); }

  friend bool operator==(const NonNegMatrix& a, const NonNegMatrix& b) {
    return a.m_.rows() == b.m_.rows() && a.m_.cols() == b.m_.cols() && a.m_ == b.m_;
  }

 private:
  Eigen::MatrixXd m_;
};

struct NmfResult {
  Eigen::MatrixXd assignments;         // rows x k
  Eigen::MatrixXd basis;               // k x cols
  std::vector<double> objective_trace;  // ||A - PQ||_F after each iteration
};

struct NmfOptions {
  // Weight of an optional ||Q Q^T - I||^2 penalty on the basis. The objective
  // trace only records the reconstruction error, which is guaranteed
  // non-increasing only for a zero weight.
  double orthogonality_weight = 0.0;
  // Called after every iteration with the current factors.
  std::function<void(int, const Eigen::MatrixXd&, const Eigen::MatrixXd&)> on_iteration;
};

inline constexpr double kNmfEpsilon = 1e-12;

namespace detail {
inline double frobenius_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
  return (a - p * q).norm();
}
}  // namespace detail

/// Lee-Seung multiplicative updates for min ||A - PQ||_F with P, Q >= 0.
/// Stops once the relative decrease of the residual drops below `tol`.
inline NmfResult nmf_factorize(const NonNegMatrix& a_in, int k, int max_iters, double tol, std::uint64_t seed,
                               const NmfOptions& opts = {}) {
  if (k < 1) throw InvalidArgument("nmf rank k must be at least 1");
  if (max_iters < 1) throw InvalidArgument("nmf needs at least one iteration");
  const Eigen::MatrixXd& a = a_in.matrix();
  const Eigen::Index n = a.rows(), m = a.cols();

  const double mean = a.size() > 0 ? a.mean() : 0.0;
  const double scale = 2.0 * std::sqrt(mean / k);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  NmfResult res;
  res.assignments.resize(n, k);
  res.basis.resize(k, m);
  for (Eigen::Index i = 0; i < res.assignments.size(); ++i) res.assignments.data()[i] = unit(rng) * scale;
  for (Eigen::Index i = 0; i < res.basis.size(); ++i) res.basis.data()[i] = unit(rng) * scale;

  Eigen::MatrixXd& p = res.assignments;
  Eigen::MatrixXd& q = res.basis;
  const double lambda = opts.orthogonality_weight;
  double prev = detail::frobenius_residual(a, p, q);
  for (int it = 0; it < max_iters; ++it) {
    const Eigen::MatrixXd qqt = q * q.transpose();
    p = p.cwiseProduct((a * q.transpose()).cwiseQuotient(p * qqt + Eigen::MatrixXd::Constant(n, k, kNmfEpsilon)));
    const Eigen::MatrixXd ptp = p.transpose() * p;
    Eigen::MatrixXd numer = p.transpose() * a;
    Eigen::MatrixXd denom = ptp * q;
    if (lambda > 0.0) {
      numer += lambda * q;
      denom += lambda * (q * q.transpose()) * q;
    }
    q = q.cwiseProduct(numer.cwiseQuotient(denom + Eigen::MatrixXd::Constant(k, m, kNmfEpsilon)));

    const double cur = detail::frobenius_residual(a, p, q);
    res.objective_trace.push_back(cur);
    if (opts.on_iteration) opts.on_iteration(it, p, q);
    if (prev <= 0.0 || (prev - cur) / prev < tol) break;
    prev = cur;
  }
  return res;
}

struct NmfProjectOptions {
  int max_iters = 200;
  double tol = 1e-4;
};

/// Non-negative least squares for P in A ~ P * basis with the basis held
/// fixed, using the P half of the multiplicative update. Starts from a
/// constant matrix, so each row evolves independently of the others.
inline NonNegMatrix nmf_project(const NonNegMatrix& a_in, const NonNegMatrix& basis_in,
                                const NmfProjectOptions& opts = {}) {
  const Eigen::MatrixXd& a = a_in.matrix();
  const Eigen::MatrixXd& q = basis_in.matrix();
  if (a.cols() != q.cols()) throw DimensionError("nmf_project: feature width does not match basis");
  const Eigen::Index n = a.rows(), k = q.rows();

  const double mean_a = a.size() > 0 ? a.mean() : 0.0;
  const double mean_q = q.size() > 0 ? q.mean() : 0.0;
  Eigen::MatrixXd p = Eigen::MatrixXd::Constant(n, k, mean_q > 0.0 ? mean_a / mean_q : 0.0);
  if (n == 0 || k == 0 || mean_a == 0.0 || mean_q == 0.0) return NonNegMatrix(Eigen::MatrixXd::Zero(n, k));

  // ||A - PQ||^2 = ||A||^2 - 2 <P, AQ^T> + <P^T P, QQ^T>
  const Eigen::MatrixXd aqt = a * q.transpose();
  const Eigen::MatrixXd qqt = q * q.transpose();
  const double a_sq = a.squaredNorm();
  auto objective = [&](const Eigen::MatrixXd& pp) {
    return std::max(0.0, a_sq - 2.0 * pp.cwiseProduct(aqt).sum() + (pp.transpose() * pp).cwiseProduct(qqt).sum());
  };

  double prev = objective(p);
  for (int it = 0; it < opts.max_iters; ++it) {
    p = p.cwiseProduct(aqt.cwiseQuotient(p * qqt + Eigen::MatrixXd::Constant(n, k, kNmfEpsilon)));
    const double cur = objective(p);
    if (prev <= 0.0 || (prev - cur) / prev < opts.tol) break;
    prev = cur;
  }
  return NonNegMatrix(std::move(p));
}

/// g(x): the feature map re-expressed as non-negative weights over the K
/// basis rows, one weight vector per spatial location.
inline FeatureMap semantic_feature_map(const FeatureMap& f, const NonNegMatrix& basis,
                                       const NmfProjectOptions& opts = {}) {
  if (basis.cols() != f.c) throw DimensionError("semantic_feature_map: basis width does not match channels");
  NonNegMatrix assign = nmf_project(NonNegMatrix(f.data), basis, opts);
  FeatureMap g;
  g.h = f.h;
  g.w = f.w;
  g.c = static_cast<int>(basis.rows());
  g.data = assign.matrix();
  return g;
}

}  // namespace crossplace
