/* Copyright 2026 The boxmask Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
// Drives the built command-line tool end to end.
#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#ifndef BOXMASK_CLI
#error "BOXMASK_CLI must name the tool binary"
#endif

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const fs::path kRoot = fs::temp_directory_path() / "boxmask_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(BOXMASK_CLI) + " " + args + " >" + (kRoot / "stdout").string() +
                          " 2>" + (kRoot / "stderr").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string path(const std::string& rel) { return (kRoot / rel).string(); }

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
    std::ofstream(kRoot / "tiny.cfg") << "iterations = 12\nlog_every = 1\ncheckpoint_every = 6\n"
                                         "sd_iters_infer = 2\nseed = 4\n";
  }
};

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("gen-data --out x"), 2);
  EXPECT_EQ(run("gen-data --out x --num-seq 2 --bogus"), 2);
  EXPECT_EQ(run("ablate --ckpt a --data " + kRoot.string() + " --axis depth --report r.json"), 2);
  EXPECT_FALSE(slurp(kRoot / "stderr").empty());
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(CliTest, GenDataWritesRequestedSequences) {
  ASSERT_EQ(run("gen-data --out " + path("gen") + " --num-seq 4 --frames 5 --hard-distractors --seed 7"), 0);
  std::size_t dirs = 0;
  for (const auto& e : fs::directory_iterator(kRoot / "gen")) dirs += e.is_directory();
  EXPECT_EQ(dirs, 4u);
  ASSERT_EQ(run("gen-data --out " + path("gen2") + " --num-seq 4 --frames 5 --hard-distractors --seed 7"), 0);
  EXPECT_EQ(slurp(kRoot / "gen/seq0002/frames/00003.png"), slurp(kRoot / "gen2/seq0002/frames/00003.png"));
  EXPECT_EQ(slurp(kRoot / "gen/seq0002/boxes.jsonl"), slurp(kRoot / "gen2/seq0002/boxes.jsonl"));
}

TEST_F(CliTest, TrainEvalInferExportAblate) {
  ASSERT_EQ(run("gen-data --out " + path("data") + " --num-seq 2 --frames 6 --seed 1"), 0);
  ASSERT_EQ(run("train --config " + path("tiny.cfg") + " --data " + path("data") + " --out " + path("run")), 0)
      << slurp(kRoot / "stderr");
  EXPECT_TRUE(fs::exists(kRoot / "run/checkpoint/manifest.json"));
  std::ifstream metrics(kRoot / "run/metrics.jsonl");
  std::string line;
  std::size_t records = 0;
  while (std::getline(metrics, line)) {
    const json r = json::parse(line);
    EXPECT_TRUE(r.contains("iter") && r.contains("loss") && r.contains("lambda") && r.contains("lr"));
    ++records;
  }
  EXPECT_EQ(records, 12u);

  ASSERT_EQ(run("eval --ckpt " + path("run") + " --data " + path("data") + " --report " + path("r.json") +
                " --dump " + path("dump")),
            0)
      << slurp(kRoot / "stderr");
  const json report = json::parse(slurp(kRoot / "r.json"));
  EXPECT_GE(report["dataset_mean_j"].get<double>(), 0.0);
  EXPECT_LE(report["dataset_mean_j"].get<double>(), 1.0);
  EXPECT_EQ(report["config"]["sd_iters_infer"], 2);
  EXPECT_TRUE(fs::exists(kRoot / "dump/seq0000/00005.png"));

  ASSERT_EQ(run("eval --baseline box --data " + path("data") + " --report " + path("box.json")), 0);

  ASSERT_EQ(run("infer --ckpt " + path("run/checkpoint") + " --data " + path("data") + " --out " + path("i1")), 0);
  ASSERT_EQ(run("infer --ckpt " + path("run") + " --data " + path("data") + " --out " + path("i2") + " --workers 2"), 0);
  for (int t = 0; t < 6; ++t) {
    const std::string f = "seq0001/masks/0000" + std::to_string(t) + ".png";
    EXPECT_EQ(slurp(kRoot / "i1" / f), slurp(kRoot / "i2" / f)) << f;
  }

  ASSERT_EQ(run("export-labels --ckpt " + path("run") + " --data " + path("data") + " --out " + path("ex") +
                " --stride 2"),
            0);
  const json manifest = json::parse(slurp(kRoot / "ex/seq0000/manifest.json"));
  EXPECT_EQ(manifest["frames"], (std::vector<int>{0, 2, 4}));

  ASSERT_EQ(run("ablate --ckpt " + path("run") + " --data " + path("data") +
                " --axis sd_iters --values 1,2 --report " + path("a.json")),
            0);
  EXPECT_EQ(json::parse(slurp(kRoot / "a.json"))["cells"].size(), 2u);

  // a config changing the model shape no longer matches the checkpoint
  std::ofstream(kRoot / "wide.cfg") << "embed_dim = 8\n";
  EXPECT_EQ(run("eval --ckpt " + path("run") + " --config " + path("wide.cfg") + " --data " + path("data") +
                " --report " + path("w.json")),
            1);
}

TEST_F(CliTest, RuntimeErrorsExitOneWithJson) {
  EXPECT_EQ(run("eval --ckpt " + path("nowhere") + " --data " + kRoot.string() + " --report " + path("x.json")), 1);
  const json err = json::parse(slurp(kRoot / "stderr"));
  EXPECT_TRUE(err.contains("error"));
  std::ofstream(kRoot / "bad.cfg") << "no_such_key = 1\n";
  EXPECT_EQ(run("train --config " + path("bad.cfg") + " --out " + path("t")), 1);
  EXPECT_EQ(json::parse(slurp(kRoot / "stderr"))["kind"], "config");
}

TEST_F(CliTest, CheckReportsEverySuite) {
  const int code = run("check --grad --oracle --seed 3 --report " + path("check.json"));
  ASSERT_TRUE(code == 0 || code == 1);
  const json r = json::parse(slurp(kRoot / "check.json"));
  EXPECT_EQ(code == 0, r["passed"].get<bool>());
  std::set<std::string> names;
  for (const auto& c : r["checks"]) names.insert(c["name"].get<std::string>());
  for (const char* n : {"solver_gradients", "pipeline_gradients", "oracle_equivalence", "monotone_descent"})
    EXPECT_TRUE(names.count(n)) << n;
}

}  // namespace
