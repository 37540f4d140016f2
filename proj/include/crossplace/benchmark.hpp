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

#include <vector>

#include "crossplace/config.hpp"
#include "crossplace/dataset_io.hpp"
#include "crossplace/encoder.hpp"
#include "crossplace/retrieval.hpp"
#include "crossplace/synthetic.hpp"
#include "crossplace/training.hpp"

namespace crossplace {

/// Database frames of a dataset sampled along their trajectory.
inline std::vector<int> database_keyframes(const Dataset& ds, double spacing_m) {
  std::vector<Pose> traj;
  for (std::size_t i = 0; i < ds.frames.size(); ++i)
    if (ds.is_database(i)) traj.push_back(ds.frames[i].pose);
  return sample_keyframes(traj, spacing_m);
}

/// Camera descriptors of every query frame.
inline std::vector<QueryRecord> encode_queries(const Dataset& ds, const EncoderModel& model,
                                               const PreprocessConfig& pre) {
  std::vector<QueryRecord> out;
  for (std::size_t i = 0; i < ds.frames.size(); ++i) {
    if (!ds.is_query(i)) continue;
    const FramePair& fp = ds.frames[i];
    out.push_back({encode(camera_to_input(fp.intensity, ds.camera, pre), model), fp.pose});
  }
  return out;
}

struct EvaluationRun {
  RecallReport report;
  IndexBuildStats index_stats;
  std::size_t index_size = 0;
};

/// Camera queries against a keyframe index of LiDAR sweeps.
inline EvaluationRun evaluate_dataset(const Dataset& ds, const EncoderModel& model, const PipelineConfig& cfg) {
  EvaluationRun run;
  const std::vector<int> keyframes = database_keyframes(ds, cfg.keyframe_spacing_m);
  const DescriptorIndex index = build_index(ds, keyframes, model, cfg.preprocess, &run.index_stats);
  if (index.empty()) throw DataError("keyframe index is empty");
  run.index_size = index.size();
  const std::vector<QueryRecord> queries = encode_queries(ds, model, cfg.preprocess);
  run.report = evaluate_recall(queries, index, cfg.threshold_m, cfg.topn);
  return run;
}

inline TrainResult train_on(const Dataset& ds, const PipelineConfig& cfg) {
  return train(ds, cfg.preprocess, cfg.encoder, cfg.train);
}

struct BenchmarkResult {
  TrainResult training;
  EvaluationRun eval;
};

/// Trains on one synthetic scene and evaluates on an independently seeded one.
inline BenchmarkResult run_synthetic_benchmark(const PipelineConfig& cfg) {
  cfg.validate();
  BenchmarkResult res;
  res.training = train_on(generate_synthetic_scene(cfg.synth_train()), cfg);
  res.eval = evaluate_dataset(generate_synthetic_scene(cfg.synth), res.training.model, cfg);
  return res;
}

}  // namespace crossplace
