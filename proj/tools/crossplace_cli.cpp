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


// crossplace: command-line front end of the cross-modal place recognition
// pipeline. Exit codes: 0 success, 1 usage error, 2 data error, 3 internal.

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "crossplace.hpp"

namespace {

using namespace crossplace;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
};

PipelineConfig effective_config(const CommonOptions& opts) {
  PipelineConfig cfg;
  if (!opts.config_path.empty()) cfg.load_file(opts.config_path);
  for (const std::string& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InvalidArgument("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

struct DataSource {
  std::string dir;
  std::string poses;
  bool synthetic = false;

  void attach(CLI::App* cmd) {
    auto* d = cmd->add_option("--data", dir, "dataset directory (calib.txt, poses.txt, velodyne/, image_2/)");
    cmd->add_option("--poses", poses, "pose file overriding <data>/poses.txt")->needs(d);
    auto* s = cmd->add_flag("--synthetic", synthetic, "use the synthetic scene described by the config");
    d->excludes(s);
  }

  void require() const {
    if (dir.empty() && !synthetic) throw CLI::ValidationError("one of --data or --synthetic is required");
  }
};

Dataset load_source(const DataSource& src, const SyntheticSceneConfig& synth) {
  return src.synthetic ? generate_synthetic_scene(synth) : load_dataset_dir(src.dir, src.poses);
}

void write_report(std::ostream& os, const PipelineConfig& cfg, const RecallReport& rep, std::size_t index_size) {
  cfg.write(os);
  os << "---\n";
  os << "index_size=" << index_size << "\n";
  write_report_records(os, rep);
}

std::ofstream open_output(const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path);
  return os;
}

int run_project(const PipelineConfig& cfg, const std::string& cloud_path, const std::string& calib_path,
                const std::string& out_path, int width, int height, bool no_completion, double max_depth) {
  const CameraModel cam = read_calib(calib_path, width, height);
  PreprocessConfig pre = cfg.preprocess;
  if (no_completion) pre.use_completion = false;
  std::size_t skipped = 0;
  const PointCloud cloud = read_velodyne_bin(cloud_path, &skipped);
  ProjectionStats stats;
  const DepthImage depth = lidar_to_depth_input(cloud, cam, pre, &stats);
  write_depth_image(depth, out_path, max_depth);
  std::cout << "points " << cloud.size() << " (skipped " << skipped << "), projected " << stats.projected
            << ", image " << depth.width << "x" << depth.height << ", valid " << depth.valid_count() << "\n";
  return kExitOk;
}

int run_synth(const PipelineConfig& cfg, const std::string& out_dir, bool training_scene) {
  const Dataset ds = generate_synthetic_scene(training_scene ? cfg.synth_train() : cfg.synth);
  write_dataset_dir(ds, out_dir);
  std::cout << "wrote " << ds.frames.size() << " frames to " << out_dir << "\n";
  return kExitOk;
}

int run_train(const PipelineConfig& cfg, const DataSource& src, const std::string& out_path, std::string log_path) {
  const Dataset ds = load_source(src, cfg.synth_train());
  const TrainResult res = train_on(ds, cfg);
  save_model(out_path, res.model);
  if (log_path.empty()) log_path = out_path + ".log";
  std::ofstream log = open_output(log_path);
  log << std::setprecision(17);
  for (const LossRecord& r : res.log) log << r.epoch << ", " << r.batch << ", " << r.loss << "\n";
  std::cout << "trained " << res.epoch_mean_loss.size() << " epochs";
  if (!res.epoch_mean_loss.empty()) {
    std::cout << ", mean loss " << res.epoch_mean_loss.front() << " -> " << res.epoch_mean_loss.back();
  }
  std::cout << ", skipped queries " << res.skipped_queries << "\nmodel " << out_path << "\n";
  return kExitOk;
}

int run_index(const PipelineConfig& cfg, const DataSource& src, const std::string& model_path,
              const std::string& out_path) {
  const EncoderModel model = load_model(model_path);
  const Dataset ds = load_source(src, cfg.synth);
  IndexBuildStats stats;
  const std::vector<int> keyframes = database_keyframes(ds, cfg.keyframe_spacing_m);
  const DescriptorIndex index = build_index(ds, keyframes, model, cfg.preprocess, &stats);
  if (index.empty()) throw DataError("keyframe index is empty");
  save_index(index, out_path);
  std::cout << "indexed " << stats.encoded << " keyframes (" << stats.failed << " failed) into " << out_path << "\n";
  return kExitOk;
}

int run_query(const PipelineConfig& cfg, const std::string& model_path, const std::string& index_path,
              const std::string& image_path, const std::string& calib_path, int top_n) {
  const EncoderModel model = load_model(model_path);
  const DescriptorIndex index = load_index(index_path);
  const IntensityImage img = read_intensity_image(image_path);
  const CameraModel cam = read_calib(calib_path, img.width, img.height);
  const GlobalDescriptor q = encode(camera_to_input(img, cam, cfg.preprocess), model);
  if (index.empty()) throw DataError("index is empty: " + index_path);
  if (q.size() != index.dim()) throw DataError("model and index descriptor lengths differ");
  std::cout << "rank frame_id distance\n" << std::setprecision(9);
  int rank = 1;
  for (const SearchHit& h : index.query(q, top_n)) std::cout << rank++ << ' ' << h.frame_id << ' ' << h.distance << "\n";
  return kExitOk;
}

int run_eval(const PipelineConfig& cfg, const DataSource& src, const std::string& model_path,
             const std::string& report_path) {
  const EncoderModel model = load_model(model_path);
  const Dataset ds = load_source(src, cfg.synth);
  const EvaluationRun run = evaluate_dataset(ds, model, cfg);
  write_report_table(std::cout, run.report);
  if (report_path.empty()) {
    write_report(std::cout, cfg, run.report, run.index_size);
  } else {
    std::ofstream os = open_output(report_path);
    write_report(os, cfg, run.report, run.index_size);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crossplace: cross-modal (camera to LiDAR) place recognition"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "crossplace 1.0");

  CommonOptions common;
  app.add_option("--config", common.config_path, "configuration file of key = value lines");
  app.add_option("--set", common.overrides, "override one config key (key=value), repeatable");
  auto* keys_flag = app.add_flag_callback("--list-keys", [] {
    PipelineConfig{}.write(std::cout);
    throw CLI::Success();
  }, "print every config key with its default and exit");
  keys_flag->configurable(false);

  // project
  std::string cloud_path, calib_path, out_path;
  int width = 1226, height = 370;
  bool no_completion = false;
  double max_depth = 80.0;
  auto* project = app.add_subcommand("project", "project a velodyne scan to a cropped (and completed) depth image");
  project->add_option("--cloud", cloud_path, "velodyne .bin file")->required();
  project->add_option("--calib", calib_path, "calibration file with P2 and Tr")->required();
  project->add_option("--out", out_path, "output 16-bit PGM")->required();
  project->add_option("--width", width, "image width in pixels")->capture_default_str();
  project->add_option("--height", height, "image height in pixels")->capture_default_str();
  project->add_flag("--no-completion", no_completion, "write the sparse projection");
  project->add_option("--max-depth", max_depth, "depth mapped to the largest pixel value (m)")->capture_default_str();

  // synth
  std::string synth_out;
  bool synth_training = false;
  auto* synth = app.add_subcommand("synth", "write a synthetic scene as a dataset directory");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_flag("--training-scene", synth_training, "write the training scene instead of the evaluation scene");

  // train
  DataSource train_src;
  std::string model_out, log_out;
  std::uint64_t seed = 0;
  auto* train = app.add_subcommand("train", "train the encoder and write a model file");
  train_src.attach(train);
  train->add_option("--out", model_out, "output model file")->required();
  train->add_option("--log", log_out, "loss log (epoch, batch, loss); default <out>.log");
  auto* seed_opt = train->add_option("--seed", seed, "training seed");

  // index
  DataSource index_src;
  std::string index_model, index_out;
  auto* index = app.add_subcommand("index", "encode database keyframes into an index file");
  index_src.attach(index);
  index->add_option("--model", index_model, "model file")->required();
  index->add_option("--out", index_out, "output index file")->required();

  // query
  std::string query_model, query_index, query_image, query_calib;
  int query_top = 5;
  auto* query = app.add_subcommand("query", "rank index entries for one camera image");
  query->add_option("--model", query_model, "model file")->required();
  query->add_option("--index", query_index, "index file")->required();
  query->add_option("--image", query_image, "camera image (png, pgm or ppm)")->required();
  query->add_option("--calib", query_calib, "calibration file")->required();
  query->add_option("--top", query_top, "number of results")->capture_default_str()->check(CLI::PositiveNumber);

  // eval
  DataSource eval_src;
  std::string eval_model, eval_report, eval_topn;
  double eval_threshold = 0.0;
  auto* eval = app.add_subcommand("eval", "camera queries against a LiDAR keyframe index; prints recall");
  eval_src.attach(eval);
  eval->add_option("--model", eval_model, "model file")->required();
  auto* thr_opt = eval->add_option("--threshold", eval_threshold, "true-match distance (m)");
  auto* topn_opt = eval->add_option("--topn", eval_topn, "comma-separated recall depths, e.g. 1,5,10");
  eval->add_option("--report", eval_report, "write the report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    PipelineConfig cfg = effective_config(common);
    if (*project) return run_project(cfg, cloud_path, calib_path, out_path, width, height, no_completion, max_depth);
    if (*synth) return run_synth(cfg, synth_out, synth_training);
    if (*train) {
      train_src.require();
      if (*seed_opt) cfg.train.seed = seed;
      return run_train(cfg, train_src, model_out, log_out);
    }
    if (*index) {
      index_src.require();
      return run_index(cfg, index_src, index_model, index_out);
    }
    if (*query) return run_query(cfg, query_model, query_index, query_image, query_calib, query_top);
    if (*eval) {
      eval_src.require();
      if (*thr_opt) cfg.threshold_m = eval_threshold;
      if (*topn_opt) cfg.set("topn", eval_topn);
      cfg.validate();
      return run_eval(cfg, eval_src, eval_model, eval_report);
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
