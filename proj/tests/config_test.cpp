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


#include <gtest/gtest.h>

#include <sstream>
#include <string>

#include "crossplace/config.hpp"

namespace crossplace {
namespace {

TEST(Config, DefaultsValidate) {
  const PipelineConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.get("margin"), "0.29999999999999999");
  EXPECT_EQ(cfg.get("topn"), "1,5,10");
  EXPECT_EQ(cfg.get("input_normalization"), "log_range");
  EXPECT_EQ(cfg.get("use_completion"), "1");
}

TEST(Config, SetAndGet) {
  PipelineConfig cfg;
  cfg.set("epochs", " 7 ");
  cfg.set("use_nmf_branch", "off");
  cfg.set("threshold", "12.5");
  cfg.set("topn", "1, 3,20");
  cfg.set("input_normalization", "max");
  EXPECT_EQ(cfg.train.epochs, 7);
  EXPECT_FALSE(cfg.encoder.use_nmf_branch);
  EXPECT_EQ(cfg.threshold_m, 12.5);
  EXPECT_EQ(cfg.topn, (std::vector<int>{1, 3, 20}));
  EXPECT_EQ(cfg.encoder.extractor.normalization, InputNormalization::kMax);
}

TEST(Config, EveryKeyRoundTrips) {
  PipelineConfig a;
  a.set("learning_rate", "0.1234567890123");
  a.set("synth_seed", "18446744073709551615");
  std::stringstream ss;
  a.write(ss);
  PipelineConfig b;
  b.set("epochs", "1");
  b.load(ss);
  for (const std::string& key : PipelineConfig::keys()) EXPECT_EQ(a.get(key), b.get(key)) << key;
}

TEST(Config, CommentsBlankLinesAndTerminator) {
  std::istringstream is("# header\n\nepochs = 3  # trailing\n---\nepochs = 9\nnot a pair\n");
  PipelineConfig cfg;
  cfg.load(is);
  EXPECT_EQ(cfg.train.epochs, 3);
}

TEST(Config, ErrorsNameTheLine) {
  PipelineConfig cfg;
  std::istringstream missing_eq("epochs = 2\nbatch_size 4\n");
  try {
    cfg.load(missing_eq, "cfg.txt");
    FAIL() << "expected an error";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("cfg.txt:2"), std::string::npos) << e.what();
  }
  std::istringstream unknown("no_such_key = 1\n");
  EXPECT_THROW(cfg.load(unknown), InvalidArgument);
}

TEST(Config, RejectsBadValues) {
  PipelineConfig cfg;
  EXPECT_THROW(cfg.set("epochs", "three"), InvalidArgument);
  EXPECT_THROW(cfg.set("epochs", "3.5"), InvalidArgument);
  EXPECT_THROW(cfg.set("margin", ""), InvalidArgument);
  EXPECT_THROW(cfg.set("use_completion", "maybe"), InvalidArgument);
  EXPECT_THROW(cfg.set("input_normalization", "gamma"), InvalidArgument);
  EXPECT_THROW(cfg.set("topn", "1,x"), InvalidArgument);
  EXPECT_THROW(cfg.get("unknown"), InvalidArgument);
  EXPECT_THROW(cfg.load_file("/nonexistent/config.txt"), DataError);
}

TEST(Config, ValidateCatchesOutOfRange) {
  auto invalid = [](const std::string& key, const std::string& value) {
    PipelineConfig cfg;
    cfg.set(key, value);
    return cfg;
  };
  EXPECT_THROW(invalid("margin", "0").validate(), InvalidArgument);
  EXPECT_THROW(invalid("threshold", "-1").validate(), InvalidArgument);
  EXPECT_THROW(invalid("keyframe_spacing", "0").validate(), InvalidArgument);
  EXPECT_THROW(invalid("topn", "").validate(), InvalidArgument);
  EXPECT_THROW(invalid("topn", "0").validate(), InvalidArgument);
  EXPECT_THROW(invalid("grid_h", "0").validate(), InvalidArgument);
  EXPECT_THROW(invalid("synth_places", "0").validate(), InvalidArgument);
  EXPECT_THROW(invalid("synth_train_frames_per_place", "0").validate(), InvalidArgument);
}

TEST(Config, TrainingSceneDerivesFromEvaluationScene) {
  PipelineConfig cfg;
  cfg.set("synth_noise", "0");
  cfg.set("synth_train_seed", "5");
  const SyntheticSceneConfig s = cfg.synth_train();
  EXPECT_EQ(s.noise_sigma_m, 0.0);
  EXPECT_EQ(s.seed, 5u);
  EXPECT_EQ(s.num_places, 100);
  EXPECT_EQ(s.frames_per_place, 3);
  EXPECT_EQ(cfg.synth.seed, 1u);
}

}  // namespace
}  // namespace crossplace
