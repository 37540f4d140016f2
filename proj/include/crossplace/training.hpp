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
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "crossplace/dataset_io.hpp"
#include "crossplace/encoder.hpp"
#include "crossplace/error.hpp"
#include "crossplace/features.hpp"
#include "crossplace/geometry.hpp"
#include "crossplace/nmf.hpp"
#include "crossplace/pipeline.hpp"
#include "crossplace/pose.hpp"
#include "crossplace/vlad.hpp"

namespace crossplace {

struct TripletBatch {
  int query_id = 0;
  int positive_id = 0;
  std::vector<int> negative_ids;
};

struct TrainConfig {
  double margin = 0.3;
  double pos_radius = 5.0;
  int negatives_per_query = 4;
  double learning_rate = 0.05;
  double momentum = 0.9;
  int epochs = 30;
  int batch_size = 8;
  bool hardest_negative = false;  // max over negatives instead of the sum
  std::uint64_t seed = 42;

  // Point-cloud augmentation of the positive/negative sweeps.
  bool augment = false;
  double augment_rot_deg = 5.0;
  double augment_shift_m = 0.1;

  void validate() const {
    if (!(margin > 0.0)) throw InvalidArgument("triplet margin must be positive");
    if (!(pos_radius > 0.0)) throw InvalidArgument("pos_radius must be positive");
    if (negatives_per_query < 1) throw InvalidArgument("negatives_per_query must be at least 1");
    if (!(learning_rate >= 0.0) || !(momentum >= 0.0 && momentum < 1.0)) {
      throw InvalidArgument("invalid optimizer settings");
    }
    if (epochs < 0 || batch_size < 1) throw InvalidArgument("invalid training schedule");
  }
};

/// Encoder architecture and the fitting settings of its frozen parts.
struct EncoderConfig {
  ExtractorConfig extractor;
  int nmf_k = 16;
  int nmf_max_iters = 200;
  double nmf_tol = 1e-5;
  int nmf_sample_rows = 20000;
  double nmf_orthogonality = 0.0;
  NmfProjectOptions nmf_project;
  bool use_nmf_branch = true;
  int vlad_clusters = 64;
  double vlad_alpha = 10.0;
  int vlad_sample_rows = 20000;

  void validate() const {
    extractor.validate();
    if (use_nmf_branch && nmf_k < 1) throw InvalidArgument("nmf_k must be at least 1");
    if (vlad_clusters < 1) throw InvalidArgument("vlad_clusters must be at least 1");
    if (nmf_max_iters < 1 || nmf_sample_rows < 1 || vlad_sample_rows < 1) {
      throw InvalidArgument("invalid encoder fitting settings");
    }
  }
};

struct MiningResult {
  std::vector<TripletBatch> triplets;
  std::size_t skipped_queries = 0;
};

/// One triplet per query that has a database entry within `pos_radius`:
/// a positive drawn uniformly from those, and `negatives_per_query`
/// negatives drawn uniformly (without replacement while enough exist) from
/// entries farther than `pos_radius`.
inline MiningResult mine_triplets(std::span<const Pose> query_poses, std::span<const Pose> db_poses,
                                  const TrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (query_poses.empty() || db_poses.empty()) throw InvalidArgument("mining needs queries and database poses");
  std::mt19937_64 rng(seed);
  MiningResult out;
  bool any_negative = false;
  std::vector<int> pos, neg;
  for (const Pose& q : query_poses) {
    pos.clear();
    neg.clear();
    for (const Pose& d : db_poses) {
      (q.distance_to(d) <= cfg.pos_radius ? pos : neg).push_back(d.frame_id);
    }
    if (!neg.empty()) any_negative = true;
    if (pos.empty()) {
      ++out.skipped_queries;
      continue;
    }
    if (neg.empty()) continue;
    TripletBatch t;
    t.query_id = q.frame_id;
    t.positive_id = pos[std::uniform_int_distribution<std::size_t>(0, pos.size() - 1)(rng)];
    const auto want = static_cast<std::size_t>(cfg.negatives_per_query);
    if (neg.size() >= want) {
      std::shuffle(neg.begin(), neg.end(), rng);
      t.negative_ids.assign(neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(want));
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, neg.size() - 1);
      for (std::size_t i = 0; i < want; ++i) t.negative_ids.push_back(neg[pick(rng)]);
    }
    out.triplets.push_back(std::move(t));
  }
  if (!any_negative) throw InvalidArgument("no database entry lies beyond pos_radius; cannot mine negatives");
  return out;
}

/// sum_i max(m + |q - p| - |q - n_i|, 0), or the largest term with
/// `hardest_only`.
inline double triplet_loss(const GlobalDescriptor& q, const GlobalDescriptor& p,
                           std::span<const GlobalDescriptor> negatives, double margin, bool hardest_only = false) {
  const double d_pos = q.distance(p);
  double loss = 0.0;
  for (const GlobalDescriptor& n : negatives) {
    const double term = std::max(margin + d_pos - q.distance(n), 0.0);
    loss = hardest_only ? std::max(loss, term) : loss + term;
  }
  return loss;
}

struct TripletGradient {
  double loss = 0.0;
  EncoderGradients grad;
};

/// Loss of one triplet and its gradient with respect to both VLAD branches.
/// Features are those of the query, the positive and each negative.
inline TripletGradient loss_gradients(const FrameFeatures& query, const FrameFeatures& positive,
                                      std::span<const FrameFeatures* const> negatives, const EncoderModel& model,
                                      double margin, bool hardest_only = false) {
  TripletGradient out;
  out.grad = EncoderGradients::zeros_like(model);
  const DescriptorForward fq = descriptor_forward(query, model);
  const DescriptorForward fp = descriptor_forward(positive, model);
  const Eigen::VectorXd& sq = fq.descriptor.values;
  const Eigen::VectorXd& sp = fp.descriptor.values;
  const double d_pos = (sq - sp).norm();

  std::vector<DescriptorForward> fn;
  std::vector<double> terms;
  fn.reserve(negatives.size());
  for (const FrameFeatures* n : negatives) {
    fn.push_back(descriptor_forward(*n, model));
    terms.push_back(margin + d_pos - (sq - fn.back().descriptor.values).norm());
  }
  std::vector<std::size_t> active;
  if (hardest_only) {
    if (!terms.empty()) {
      const auto it = std::max_element(terms.begin(), terms.end());
      if (*it > 0.0) active.push_back(static_cast<std::size_t>(it - terms.begin()));
    }
  } else {
    for (std::size_t i = 0; i < terms.size(); ++i)
      if (terms[i] > 0.0) active.push_back(i);
  }
  if (active.empty()) return out;

  const Eigen::Index len = sq.size();
  Eigen::VectorXd dq = Eigen::VectorXd::Zero(len), dp = Eigen::VectorXd::Zero(len);
  const Eigen::VectorXd unit_pos = d_pos > 0.0 ? Eigen::VectorXd((sq - sp) / d_pos) : Eigen::VectorXd::Zero(len);
  for (std::size_t i : active) {
    out.loss += terms[i];
    dq += unit_pos;
    dp -= unit_pos;
    const Eigen::VectorXd diff = sq - fn[i].descriptor.values;
    const double d_neg = diff.norm();
    if (d_neg > 0.0) {
      dq -= diff / d_neg;
      out.grad += descriptor_backward(*negatives[i], model, fn[i], diff / d_neg);
    }
  }
  out.grad += descriptor_backward(query, model, fq, dq);
  out.grad += descriptor_backward(positive, model, fp, dp);
  return out;
}

// ---------------------------------------------------------------------------

struct LossRecord {
  int epoch = 0;
  int batch = 0;
  double loss = 0.0;
};

struct TrainResult {
  EncoderModel model;
  std::vector<LossRecord> log;
  std::vector<double> epoch_mean_loss;
  std::size_t skipped_queries = 0;
};

/// Stacks the rows of several matrices, taking an evenly strided subset when
/// there are more than `max_rows` in total.
inline Eigen::MatrixXd stack_rows(const std::vector<const Eigen::MatrixXd*>& blocks, Eigen::Index max_rows) {
  Eigen::Index total = 0, cols = 0;
  for (const auto* b : blocks) {
    total += b->rows();
    cols = b->cols();
  }
  const Eigen::Index stride = std::max<Eigen::Index>(1, (total + max_rows - 1) / std::max<Eigen::Index>(1, max_rows));
  Eigen::MatrixXd out((total + stride - 1) / stride, cols);
  Eigen::Index global = 0, filled = 0;
  for (const auto* b : blocks) {
    for (Eigen::Index r = 0; r < b->rows(); ++r, ++global) {
      if (global % stride == 0) out.row(filled++) = b->row(r);
    }
  }
  return out.topRows(filled);
}

/// Frozen parts of the encoder (extractor settings and NMF basis) fitted on
/// the local features of the training frames, with initial VLAD layers.
inline EncoderModel init_encoder(const std::vector<FeatureMap>& samples, const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (samples.empty()) throw InvalidArgument("encoder initialization needs training features");
  EncoderModel model;
  model.extractor = cfg.extractor;
  model.nmf_project = cfg.nmf_project;
  std::vector<const Eigen::MatrixXd*> local;
  for (const FeatureMap& f : samples) local.push_back(&f.data);
  const Eigen::MatrixXd local_rows = stack_rows(local, cfg.vlad_sample_rows);
  model.vlad_cnn = init_vlad_params(local_rows, cfg.vlad_clusters, cfg.vlad_alpha, seed);

  if (cfg.use_nmf_branch) {
    const Eigen::MatrixXd nmf_rows = stack_rows(local, cfg.nmf_sample_rows);
    NmfResult fit = nmf_factorize(NonNegMatrix(nmf_rows), cfg.nmf_k, cfg.nmf_max_iters, cfg.nmf_tol, seed + 1,
                                  NmfOptions{cfg.nmf_orthogonality});
    model.nmf_basis = NonNegMatrix(std::move(fit.basis));
    std::vector<Eigen::MatrixXd> semantic;
    semantic.reserve(samples.size());
    for (const FeatureMap& f : samples) semantic.push_back(semantic_feature_map(f, model.nmf_basis, cfg.nmf_project).data);
    std::vector<const Eigen::MatrixXd*> sem_ptrs;
    for (const auto& s : semantic) sem_ptrs.push_back(&s);
    model.vlad_nmf = init_vlad_params(stack_rows(sem_ptrs, cfg.vlad_sample_rows), cfg.vlad_clusters, cfg.vlad_alpha,
                                      seed + 2);
  }
  model.validate();
  return model;
}

/// Training frames after preprocessing: one camera input and one LiDAR input
/// per frame.
struct PreparedFrames {
  std::vector<Pose> poses;
  std::vector<FeatureMap> camera;
  std::vector<FeatureMap> lidar;
};

inline PreparedFrames prepare_frames(const Dataset& ds, const PreprocessConfig& pre, const ExtractorConfig& ex) {
  PreparedFrames out;
  for (const FramePair& fp : ds.frames) {
    Pose p = fp.pose;
    p.frame_id = static_cast<int>(out.poses.size());
    out.poses.push_back(p);
    out.camera.push_back(extract_local_features(camera_to_input(fp.intensity, ds.camera, pre), ex));
    out.lidar.push_back(extract_local_features(lidar_to_depth_input(fp.cloud, ds.camera, pre), ex));
  }
  return out;
}

namespace detail {
inline void apply_update(VladParams& param, VladParams& velocity, const VladParams& grad, double lr, double momentum) {
  VladParams step = grad;
  step *= -lr;
  velocity *= momentum;
  velocity += step;
  param += velocity;
}
}  // namespace detail

/// Trains the VLAD layers of an encoder with the triplet loss: camera images
/// as queries, LiDAR depth images as positives and negatives. The extractor
/// and the NMF basis stay frozen. Frame ids in triplets index `ds.frames`.
inline TrainResult train(const Dataset& ds, const PreprocessConfig& pre, const EncoderConfig& enc,
                         const TrainConfig& cfg) {
  cfg.validate();
  pre.validate();
  enc.validate();
  if (ds.frames.empty()) throw InvalidArgument("training dataset is empty");

  PreparedFrames frames = prepare_frames(ds, pre, enc.extractor);
  std::vector<FeatureMap> samples = frames.camera;
  samples.insert(samples.end(), frames.lidar.begin(), frames.lidar.end());

  TrainResult result;
  result.model = init_encoder(samples, enc, cfg.seed);
  EncoderModel& model = result.model;

  auto features_of = [&](const FeatureMap& f) {
    FrameFeatures ff;
    ff.local = f.data;
    if (model.has_nmf_branch()) ff.semantic = semantic_feature_map(f, model.nmf_basis, model.nmf_project).data;
    return ff;
  };
  std::vector<FrameFeatures> cam_ff, lidar_ff;
  for (std::size_t i = 0; i < ds.frames.size(); ++i) {
    cam_ff.push_back(features_of(frames.camera[i]));
    lidar_ff.push_back(features_of(frames.lidar[i]));
  }

  EncoderGradients velocity = EncoderGradients::zeros_like(model);
  std::mt19937_64 rng(cfg.seed);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    MiningResult mined = mine_triplets(frames.poses, frames.poses, cfg, cfg.seed * 1000003ULL + epoch);
    result.skipped_queries = mined.skipped_queries;
    std::shuffle(mined.triplets.begin(), mined.triplets.end(), rng);

    if (cfg.augment) {
      for (std::size_t i = 0; i < ds.frames.size(); ++i) {
        const PointCloud aug = augment_cloud(ds.frames[i].cloud, cfg.augment_rot_deg, cfg.augment_shift_m,
                                             cfg.seed ^ (static_cast<std::uint64_t>(epoch) << 32 | i));
        lidar_ff[i] = features_of(extract_local_features(lidar_to_depth_input(aug, ds.camera, pre), enc.extractor));
      }
    }

    double epoch_sum = 0.0;
    int batch_idx = 0;
    for (std::size_t start = 0; start < mined.triplets.size(); start += cfg.batch_size, ++batch_idx) {
      const std::size_t end = std::min(mined.triplets.size(), start + static_cast<std::size_t>(cfg.batch_size));
      EncoderGradients grad = EncoderGradients::zeros_like(model);
      double batch_loss = 0.0;
      for (std::size_t t = start; t < end; ++t) {
        const TripletBatch& tb = mined.triplets[t];
        std::vector<const FrameFeatures*> negs;
        for (int id : tb.negative_ids) negs.push_back(&lidar_ff[id]);
        TripletGradient tg = loss_gradients(cam_ff[tb.query_id], lidar_ff[tb.positive_id], negs, model, cfg.margin,
                                            cfg.hardest_negative);
        batch_loss += tg.loss;
        grad += tg.grad;
      }
      const double count = static_cast<double>(end - start);
      detail::apply_update(model.vlad_cnn, velocity.cnn, grad.cnn, cfg.learning_rate / count, cfg.momentum);
      if (model.has_nmf_branch()) {
        detail::apply_update(model.vlad_nmf, velocity.nmf, grad.nmf, cfg.learning_rate / count, cfg.momentum);
      }
      result.log.push_back({epoch, batch_idx, batch_loss / count});
      epoch_sum += batch_loss;
    }
    result.epoch_mean_loss.push_back(mined.triplets.empty() ? 0.0 : epoch_sum / mined.triplets.size());
  }
  return result;
}

}  // namespace crossplace
