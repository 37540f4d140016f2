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

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "crossplace/dataset_io.hpp"
#include "crossplace/image_io.hpp"
#include "crossplace/pipeline.hpp"
#include "test_support.hpp"

namespace crossplace {
namespace {

namespace fs = std::filesystem;

std::string fixture(const std::string& name) { return std::string(CROSSPLACE_FIXTURES) + "/" + name; }

struct RunResult {
  int code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(CROSSPLACE_CLI) + " " + args + " 2>&1";
  RunResult res;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return res;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) res.output.append(buf, n);
  const int status = pclose(pipe);
  res.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// key=value records after the `---` line of an eval report.
std::map<std::string, double> report_records(const std::string& text) {
  std::map<std::string, double> out;
  std::istringstream is(text);
  std::string line;
  bool body = false;
  while (std::getline(is, line)) {
    if (line == "---") {
      body = true;
      continue;
    }
    const auto eq = line.find('=');
    if (body && eq != std::string::npos) out[line.substr(0, eq)] = std::stod(line.substr(eq + 1));
  }
  return out;
}

// A scene and model small enough for a few seconds of training.
fs::path small_config(const fs::path& dir) {
  const fs::path p = dir / "small.cfg";
  std::ofstream os(p);
  os << "synth_places = 8\nsynth_train_places = 8\nsynth_width = 192\nsynth_height = 64\n"
        "synth_focal = 96\nsynth_principal_row = 24\ngrid_h = 8\ngrid_w = 24\nvlad_clusters = 8\n"
        "nmf_k = 4\nepochs = 2\n";
  return p;
}

TEST(Cli, NoSubcommandIsUsageError) {
  EXPECT_EQ(run_cli("").code, 1);
  EXPECT_EQ(run_cli("frobnicate").code, 1);
  EXPECT_EQ(run_cli("project --cloud x").code, 1);
  EXPECT_EQ(run_cli("--set nonsense=1 synth --out /tmp/x").code, 1);
  EXPECT_EQ(run_cli("--set epochs synth --out /tmp/x").code, 1);
}

TEST(Cli, HelpAndKeys) {
  const RunResult help = run_cli("--help");
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.output.find("project"), std::string::npos);
  const RunResult keys = run_cli("--list-keys");
  EXPECT_EQ(keys.code, 0);
  EXPECT_NE(keys.output.find("margin = 0.29999999999999999"), std::string::npos) << keys.output;
}

TEST(Cli, ProjectWritesDepthImage) {
  const fs::path dir = testing::scratch_dir("cli_project");
  const fs::path out = dir / "depth.pgm";
  const RunResult r = run_cli("project --cloud " + fixture("velodyne_two_points.bin") + " --calib " +
                              fixture("calib_basic.txt") + " --width 128 --height 64 --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.output;
  ASSERT_TRUE(fs::exists(out));
  const DepthImage d = read_depth_image(out.string(), 80.0);
  EXPECT_EQ(d.width, 128);
  EXPECT_LE(d.height, 64);
}

TEST(Cli, ProjectMissingCalibIsDataError) {
  const fs::path dir = testing::scratch_dir("cli_project_missing");
  const RunResult r = run_cli("project --cloud " + fixture("velodyne_two_points.bin") +
                              " --calib /nonexistent/calib.txt --out " + (dir / "d.pgm").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("/nonexistent/calib.txt"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(dir / "d.pgm"));
}

TEST(Cli, ProjectTruncatedScanIsDataError) {
  const fs::path dir = testing::scratch_dir("cli_project_bad");
  const RunResult r = run_cli("project --cloud " + fixture("velodyne_17_bytes.bin") + " --calib " +
                              fixture("calib_basic.txt") + " --out " + (dir / "d.pgm").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("velodyne_17_bytes.bin"), std::string::npos) << r.output;
}

TEST(Cli, NoCompletionMatchesSparseProjection) {
  const fs::path dir = testing::scratch_dir("cli_sparse");
  std::mt19937_64 rng(21);
  CameraModel cam = testing::random_camera(rng);
  cam.width = 96;
  cam.height = 48;
  const PointCloud cloud = testing::random_cloud(rng, cam, 3000);
  write_velodyne_bin(cloud, (dir / "scan.bin").string());
  write_calib(cam, (dir / "calib.txt").string());

  const double max_depth = 1000.0;
  for (bool complete : {false, true}) {
    const fs::path out = dir / (complete ? "dense.pgm" : "sparse.pgm");
    const RunResult r = run_cli("project --cloud " + (dir / "scan.bin").string() + " --calib " +
                                (dir / "calib.txt").string() + " --width 96 --height 48 --max-depth 1000 --out " +
                                out.string() + (complete ? "" : " --no-completion"));
    ASSERT_EQ(r.code, 0) << r.output;

    // The expected image goes through the same float32 storage as the CLI input.
    const CameraModel cam_read = read_calib((dir / "calib.txt").string(), 96, 48);
    PreprocessConfig pre;
    pre.use_completion = complete;
    const DepthImage expect = lidar_to_depth_input(read_velodyne_bin((dir / "scan.bin").string()), cam_read, pre);
    const DepthImage got = read_depth_image(out.string(), max_depth);
    ASSERT_EQ(got.width, expect.width);
    ASSERT_EQ(got.height, expect.height);
    for (std::size_t i = 0; i < got.depth.size(); ++i) {
      const bool ev = expect.valid[i] && std::lround(65535.0 * std::min(expect.depth[i], max_depth) / max_depth) > 0;
      ASSERT_EQ(got.valid[i] != 0, ev) << i;
      if (ev) EXPECT_NEAR(got.depth[i], std::min(expect.depth[i], max_depth), 0.5 * max_depth / 65535 + 1e-9);
    }
  }
}

TEST(Cli, SynthWritesLoadableDataset) {
  const fs::path dir = testing::scratch_dir("cli_synth");
  const fs::path cfg = small_config(dir);
  const RunResult r = run_cli("--config " + cfg.string() + " synth --out " + (dir / "scene").string());
  ASSERT_EQ(r.code, 0) << r.output;
  const Dataset ds = load_dataset_dir((dir / "scene").string());
  EXPECT_EQ(ds.frames.size(), 16u);
  EXPECT_EQ(ds.camera.width, 192);

  const RunResult t = run_cli("--config " + cfg.string() + " synth --training-scene --out " + (dir / "train").string());
  ASSERT_EQ(t.code, 0) << t.output;
  EXPECT_EQ(load_dataset_dir((dir / "train").string()).frames.size(), 24u);
}

TEST(Cli, TrainIsSeededAndWritesLog) {
  const fs::path dir = testing::scratch_dir("cli_train");
  const std::string base = "--config " + small_config(dir).string() + " train --synthetic --seed 7 --out ";
  ASSERT_EQ(run_cli(base + (dir / "a.model").string()).code, 0);
  ASSERT_EQ(run_cli(base + (dir / "b.model").string() + " --log " + (dir / "b.csv").string()).code, 0);
  EXPECT_EQ(read_file(dir / "a.model"), read_file(dir / "b.model"));
  EXPECT_EQ(read_file(dir / "a.model.log"), read_file(dir / "b.csv"));

  std::istringstream log(read_file(dir / "b.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    int epoch = -1, batch = -1;
    double loss = -1.0;
    char c1 = 0, c2 = 0;
    std::istringstream ls(line);
    ASSERT_TRUE(ls >> epoch >> c1 >> batch >> c2 >> loss) << line;
    EXPECT_EQ(c1, ',');
    EXPECT_GE(loss, 0.0);
    ++lines;
  }
  EXPECT_GT(lines, 0);

  ASSERT_EQ(run_cli(base.substr(0, base.find("--seed")) + "--seed 8 --out " + (dir / "c.model").string()).code, 0);
  EXPECT_NE(read_file(dir / "a.model"), read_file(dir / "c.model"));
}

TEST(Cli, TrainFailures) {
  const fs::path dir = testing::scratch_dir("cli_train_fail");
  const std::string cfg = "--config " + small_config(dir).string();
  EXPECT_EQ(run_cli(cfg + " train --out " + (dir / "m").string()).code, 1);
  EXPECT_EQ(run_cli(cfg + " train --synthetic --data " + dir.string() + " --out " + (dir / "m").string()).code, 1);
  EXPECT_EQ(run_cli(cfg + " train --data " + (dir / "missing").string() + " --out " + (dir / "m").string()).code, 2);
  EXPECT_NE(run_cli(cfg + " train --synthetic --out /nonexistent/dir/m.model").code, 0);
  EXPECT_EQ(run_cli(cfg + " --set margin=0 train --synthetic --out " + (dir / "m").string()).code, 1);
}

class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = testing::scratch_dir("cli_pipeline");
    cfg_ = "--config " + small_config(dir_).string();
    const RunResult r = run_cli(cfg_ + " train --synthetic --out " + (dir_ / "m.model").string());
    ASSERT_EQ(r.code, 0) << r.output;
  }

  static std::string model() { return (dir_ / "m.model").string(); }

  static inline fs::path dir_;
  static inline std::string cfg_;
};

TEST_F(CliPipeline, EvalReportsRequestedDepths) {
  const RunResult r = run_cli(cfg_ + " eval --synthetic --model " + model() + " --topn 1,5,10");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto rec = report_records(r.output);
  for (const char* key : {"recall@1", "recall@5", "recall@10", "recall@1%", "index_size", "num_queries"}) {
    EXPECT_TRUE(rec.count(key)) << key << "\n" << r.output;
  }
  int depths = 0;
  for (const auto& [k, v] : rec) {
    if (k.rfind("recall@", 0) == 0 && k.find('%') == std::string::npos) ++depths;
    if (k.rfind("recall@", 0) == 0) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_EQ(depths, 3);
  EXPECT_LE(rec.at("recall@1"), rec.at("recall@5"));
  EXPECT_LE(rec.at("recall@5"), rec.at("recall@10"));
}

TEST_F(CliPipeline, LargerThresholdNeverLosesHits) {
  auto run = [&](const std::string& thr) {
    const fs::path rep = dir_ / ("report_" + thr + ".txt");
    const RunResult r = run_cli(cfg_ + " eval --synthetic --model " + model() + " --threshold " + thr +
                                " --report " + rep.string());
    EXPECT_EQ(r.code, 0) << r.output;
    return report_records(read_file(rep));
  };
  const auto tight = run("5");
  const auto loose = run("50");
  EXPECT_EQ(tight.at("threshold_m"), 5.0);
  EXPECT_EQ(loose.at("threshold_m"), 50.0);
  for (const char* key : {"recall@1", "recall@5", "recall@10"}) {
    EXPECT_LE(tight.at(key) * tight.at("num_queries"), loose.at(key) * loose.at("num_queries") + 1e-9) << key;
  }
}

TEST_F(CliPipeline, ReportReproducesWhenUsedAsConfig) {
  const fs::path first = dir_ / "first.txt";
  const fs::path second = dir_ / "second.txt";
  ASSERT_EQ(run_cli(cfg_ + " eval --synthetic --model " + model() + " --threshold 12 --report " + first.string()).code,
            0);
  ASSERT_EQ(run_cli("--config " + first.string() + " eval --synthetic --model " + model() + " --report " +
                    second.string())
                .code,
            0);
  EXPECT_EQ(read_file(first), read_file(second));
  EXPECT_NE(read_file(first).find("threshold = 12"), std::string::npos);
}

TEST_F(CliPipeline, IndexAndQuery) {
  const fs::path scene = dir_ / "scene";
  ASSERT_EQ(run_cli(cfg_ + " synth --out " + scene.string()).code, 0);
  const fs::path index = dir_ / "db.index";
  const RunResult ir = run_cli(cfg_ + " index --data " + scene.string() + " --model " + model() + " --out " +
                               index.string());
  ASSERT_EQ(ir.code, 0) << ir.output;
  const RunResult q = run_cli(cfg_ + " query --model " + model() + " --index " + index.string() + " --image " +
                              (scene / "image_2" / "000000.pgm").string() + " --calib " +
                              (scene / "calib.txt").string() + " --top 3");
  ASSERT_EQ(q.code, 0) << q.output;
  std::istringstream is(q.output);
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header, "rank frame_id distance");
  int rows = 0, rank = 0, id = 0;
  double dist = 0.0, prev = -1.0;
  while (is >> rank >> id >> dist) {
    EXPECT_EQ(rank, ++rows);
    EXPECT_GE(dist, prev);
    prev = dist;
  }
  EXPECT_EQ(rows, 3);

  EXPECT_EQ(run_cli(cfg_ + " query --model " + model() + " --index " + index.string() + " --image " +
                    (dir_ / "none.png").string() + " --calib " + (scene / "calib.txt").string())
                .code,
            2);
  EXPECT_EQ(run_cli(cfg_ + " query --model " + index.string() + " --index " + index.string() + " --image " +
                    (scene / "image_2" / "000000.pgm").string() + " --calib " + (scene / "calib.txt").string())
                .code,
            2);
}

}  // namespace
}  // namespace crossplace
