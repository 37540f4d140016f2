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

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "crossplace/error.hpp"
#include "crossplace/pipeline.hpp"
#include "crossplace/synthetic.hpp"
#include "crossplace/training.hpp"

namespace crossplace {

/// Every tunable of the pipeline. Serialized as `key = value` lines; `#`
/// starts a comment and a line holding only `---` ends the document, so a
/// report that echoes its configuration above such a line loads as a config.
struct PipelineConfig {
  PreprocessConfig preprocess;
  EncoderConfig encoder;
  TrainConfig train;
  double keyframe_spacing_m = 5.0;
  double threshold_m = 10.0;
  std::vector<int> topn = {1, 5, 10};
  SyntheticSceneConfig synth;                 // evaluation scene
  std::uint64_t synth_train_seed = 1001;      // training scene uses synth.* with this seed
  int synth_train_places = 100;               // place count of the training scene
  int synth_train_frames_per_place = 3;       // frames per place in the training scene

  void validate() const {
    preprocess.validate();
    encoder.validate();
    train.validate();
    synth.validate();
    synth_train().validate();
    if (!(keyframe_spacing_m > 0.0)) throw InvalidArgument("keyframe_spacing must be positive");
    if (!(threshold_m > 0.0)) throw InvalidArgument("threshold must be positive");
    if (topn.empty()) throw InvalidArgument("topn must list at least one depth");
    for (int n : topn)
      if (n < 1) throw InvalidArgument("topn entries must be at least 1");
  }

  SyntheticSceneConfig synth_train() const {
    SyntheticSceneConfig s = synth;
    s.seed = synth_train_seed;
    s.num_places = synth_train_places;
    s.frames_per_place = synth_train_frames_per_place;
    return s;
  }

  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  /// Applies `key = value` lines from a stream on top of the current values.
  void load(std::istream& is, const std::string& name = "config");
  void load_file(const std::string& path);
  void write(std::ostream& os) const;
};

namespace detail {

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* b = text.data();
  const char* e = b + text.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) throw InvalidArgument("config key " + key + ": cannot parse '" + text + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "1" || text == "true" || text == "on" || text == "yes") return true;
  if (text == "0" || text == "false" || text == "off" || text == "no") return false;
  throw InvalidArgument("config key " + key + ": expected a boolean, got '" + text + "'");
}

inline std::string format_double(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(parse_number<int>(key, item.substr(b, e - b + 1)));
  }
  return out;
}

struct ConfigField {
  std::string key;
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <class Getter>
ConfigField double_field(std::string key, Getter g) {
  return {key, [g](PipelineConfig& c, const std::string& k, const std::string& v) { g(c) = parse_number<double>(k, v); },
          [g](const PipelineConfig& c) { return format_double(g(c)); }};
}

template <class T, class Getter>
ConfigField int_field(std::string key, Getter g) {
  return {key, [g](PipelineConfig& c, const std::string& k, const std::string& v) { g(c) = parse_number<T>(k, v); },
          [g](const PipelineConfig& c) { return std::to_string(g(c)); }};
}

template <class Getter>
ConfigField bool_field(std::string key, Getter g) {
  return {key, [g](PipelineConfig& c, const std::string& k, const std::string& v) { g(c) = parse_bool(k, v); },
          [g](const PipelineConfig& c) { return std::string(g(c) ? "1" : "0"); }};
}

inline const std::vector<ConfigField>& config_fields() {
  using C = PipelineConfig;
  static const std::vector<ConfigField> fields = {
      double_field("max_elevation_deg", [](auto& c) -> auto& { return c.preprocess.max_elevation_deg; }),
      bool_field("use_completion", [](auto& c) -> auto& { return c.preprocess.use_completion; }),
      double_field("sigma", [](auto& c) -> auto& { return c.preprocess.completion.sigma; }),
      int_field<int>("max_gap", [](auto& c) -> auto& { return c.preprocess.completion.max_gap; }),
      int_field<int>("grid_h", [](auto& c) -> auto& { return c.encoder.extractor.grid_h; }),
      int_field<int>("grid_w", [](auto& c) -> auto& { return c.encoder.extractor.grid_w; }),
      int_field<int>("orientations", [](auto& c) -> auto& { return c.encoder.extractor.orientations; }),
      {"input_normalization",
       [](C& c, const std::string& k, const std::string& v) {
         auto& n = c.encoder.extractor.normalization;
         if (v == "none") n = InputNormalization::kNone;
         else if (v == "max") n = InputNormalization::kMax;
         else if (v == "log_range") n = InputNormalization::kLogRange;
         else throw InvalidArgument("config key " + k + ": expected none, max or log_range");
       },
       [](const C& c) {
         switch (c.encoder.extractor.normalization) {
           case InputNormalization::kNone: return std::string("none");
           case InputNormalization::kMax: return std::string("max");
           default: return std::string("log_range");
         }
       }},
      bool_field("normalize_histogram", [](auto& c) -> auto& { return c.encoder.extractor.normalize_histogram; }),
      double_field("histogram_epsilon", [](auto& c) -> auto& { return c.encoder.extractor.histogram_epsilon; }),
      bool_field("canonical_polarity", [](auto& c) -> auto& { return c.encoder.extractor.canonical_polarity; }),
      int_field<int>("smoothing_radius", [](auto& c) -> auto& { return c.encoder.extractor.smoothing_radius; }),
      bool_field("soft_binning", [](auto& c) -> auto& { return c.encoder.extractor.soft_binning; }),
      bool_field("use_nmf_branch", [](auto& c) -> auto& { return c.encoder.use_nmf_branch; }),
      int_field<int>("nmf_k", [](auto& c) -> auto& { return c.encoder.nmf_k; }),
      int_field<int>("nmf_max_iters", [](auto& c) -> auto& { return c.encoder.nmf_max_iters; }),
      double_field("nmf_tol", [](auto& c) -> auto& { return c.encoder.nmf_tol; }),
      int_field<int>("nmf_sample_rows", [](auto& c) -> auto& { return c.encoder.nmf_sample_rows; }),
      double_field("nmf_orthogonality", [](auto& c) -> auto& { return c.encoder.nmf_orthogonality; }),
      int_field<int>("nmf_project_iters", [](auto& c) -> auto& { return c.encoder.nmf_project.max_iters; }),
      double_field("nmf_project_tol", [](auto& c) -> auto& { return c.encoder.nmf_project.tol; }),
      int_field<int>("vlad_clusters", [](auto& c) -> auto& { return c.encoder.vlad_clusters; }),
      double_field("vlad_alpha", [](auto& c) -> auto& { return c.encoder.vlad_alpha; }),
      int_field<int>("vlad_sample_rows", [](auto& c) -> auto& { return c.encoder.vlad_sample_rows; }),
      double_field("margin", [](auto& c) -> auto& { return c.train.margin; }),
      double_field("pos_radius", [](auto& c) -> auto& { return c.train.pos_radius; }),
      int_field<int>("negatives", [](auto& c) -> auto& { return c.train.negatives_per_query; }),
      double_field("learning_rate", [](auto& c) -> auto& { return c.train.learning_rate; }),
      double_field("momentum", [](auto& c) -> auto& { return c.train.momentum; }),
      int_field<int>("epochs", [](auto& c) -> auto& { return c.train.epochs; }),
      int_field<int>("batch_size", [](auto& c) -> auto& { return c.train.batch_size; }),
      bool_field("hardest_negative", [](auto& c) -> auto& { return c.train.hardest_negative; }),
      int_field<std::uint64_t>("seed", [](auto& c) -> auto& { return c.train.seed; }),
      bool_field("augment", [](auto& c) -> auto& { return c.train.augment; }),
      double_field("augment_rot_deg", [](auto& c) -> auto& { return c.train.augment_rot_deg; }),
      double_field("augment_shift_m", [](auto& c) -> auto& { return c.train.augment_shift_m; }),
      double_field("keyframe_spacing", [](auto& c) -> auto& { return c.keyframe_spacing_m; }),
      double_field("threshold", [](auto& c) -> auto& { return c.threshold_m; }),
      {"topn", [](C& c, const std::string& k, const std::string& v) { c.topn = parse_int_list(k, v); },
       [](const C& c) {
         std::string s;
         for (std::size_t i = 0; i < c.topn.size(); ++i) s += (i ? "," : "") + std::to_string(c.topn[i]);
         return s;
       }},
      int_field<int>("synth_places", [](auto& c) -> auto& { return c.synth.num_places; }),
      double_field("synth_spacing", [](auto& c) -> auto& { return c.synth.place_spacing_m; }),
      int_field<int>("synth_landmarks", [](auto& c) -> auto& { return c.synth.landmarks_per_place; }),
      double_field("synth_noise", [](auto& c) -> auto& { return c.synth.noise_sigma_m; }),
      int_field<std::uint64_t>("synth_seed", [](auto& c) -> auto& { return c.synth.seed; }),
      int_field<std::uint64_t>("synth_train_seed", [](auto& c) -> auto& { return c.synth_train_seed; }),
      int_field<int>("synth_train_places", [](auto& c) -> auto& { return c.synth_train_places; }),
      int_field<int>("synth_train_frames_per_place", [](auto& c) -> auto& { return c.synth_train_frames_per_place; }),
      bool_field("synth_ground_plane", [](auto& c) -> auto& { return c.synth.ground_plane; }),
      int_field<int>("synth_frames_per_place", [](auto& c) -> auto& { return c.synth.frames_per_place; }),
      double_field("synth_pose_offset", [](auto& c) -> auto& { return c.synth.max_pose_offset_m; }),
      double_field("synth_yaw_deg", [](auto& c) -> auto& { return c.synth.max_yaw_deg; }),
      int_field<int>("synth_width", [](auto& c) -> auto& { return c.synth.image_width; }),
      int_field<int>("synth_height", [](auto& c) -> auto& { return c.synth.image_height; }),
      double_field("synth_focal", [](auto& c) -> auto& { return c.synth.focal_px; }),
      double_field("synth_principal_row", [](auto& c) -> auto& { return c.synth.principal_row; }),
      double_field("synth_brightness_ref", [](auto& c) -> auto& { return c.synth.brightness_ref_m; }),
      int_field<int>("synth_lidar_beams", [](auto& c) -> auto& { return c.synth.lidar_beams; }),
      double_field("synth_lidar_top_deg", [](auto& c) -> auto& { return c.synth.lidar_top_deg; }),
      double_field("synth_lidar_bottom_deg", [](auto& c) -> auto& { return c.synth.lidar_bottom_deg; }),
      double_field("synth_lidar_azimuth_step", [](auto& c) -> auto& { return c.synth.lidar_azimuth_step_deg; }),
      double_field("synth_max_range", [](auto& c) -> auto& { return c.synth.max_range_m; }),
      double_field("synth_sensor_height", [](auto& c) -> auto& { return c.synth.sensor_height_m; }),
  };
  return fields;
}

inline const ConfigField& find_field(const std::string& key) {
  for (const ConfigField& f : config_fields())
    if (f.key == key) return f;
  throw InvalidArgument("unknown config key: " + key);
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace detail

inline void PipelineConfig::set(const std::string& key, const std::string& value) {
  detail::find_field(key).set(*this, key, detail::trim(value));
}

inline std::string PipelineConfig::get(const std::string& key) const { return detail::find_field(key).get(*this); }

inline const std::vector<std::string>& PipelineConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& f : detail::config_fields()) out.push_back(f.key);
    return out;
  }();
  return names;
}

inline void PipelineConfig::load(std::istream& is, const std::string& name) {
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line == "---") break;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument(name + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      set(detail::trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(name + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline void PipelineConfig::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open config file: " + path);
  load(is, path);
}

inline void PipelineConfig::write(std::ostream& os) const {
  for (const auto& f : detail::config_fields()) os << f.key << " = " << f.get(*this) << "\n";
}

}  // namespace crossplace
