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
#include "boxmask/checkpoint.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "boxmask/pipeline.hpp"

namespace boxmask {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("boxmask_ckpt_test_" + name);
  fs::remove_all(p);
  return p;
}

TEST(CheckpointTest, RoundTripIsExact) {
  PipelineConfig cfg;
  cfg.num_frames = 5;
  const Checkpoint ck{init_parameters(cfg.dims, 4), cfg.to_json(), 123};
  const fs::path dir = scratch("rt");
  save_checkpoint(dir, ck);
  const Checkpoint back = load_checkpoint(dir);
  EXPECT_EQ(back.iteration, 123u);
  EXPECT_EQ(back.config, ck.config);
  EXPECT_EQ(back.params.tensors(), ck.params.tensors());
  EXPECT_FALSE(fs::exists(dir.string() + ".tmp"));
}

TEST(CheckpointTest, OverwriteReplacesPreviousContents) {
  const fs::path dir = scratch("over");
  save_checkpoint(dir, {init_parameters(ModelDims{}, 1), {}, 1});
  save_checkpoint(dir, {init_parameters(ModelDims{}, 2), {}, 2});
  const Checkpoint back = load_checkpoint(dir);
  EXPECT_EQ(back.iteration, 2u);
  EXPECT_EQ(back.params.tensors(), init_parameters(ModelDims{}, 2).tensors());
  EXPECT_FALSE(fs::exists(dir.string() + ".old"));
}

TEST(CheckpointTest, DetectsCorruption) {
  const fs::path dir = scratch("bad");
  save_checkpoint(dir, {init_parameters(ModelDims{}, 1), {}, 1});
  // truncate one tensor file
  const fs::path tensor = dir / "tensors" / "0.bin";
  fs::resize_file(tensor, fs::file_size(tensor) / 2);
  EXPECT_THROW(load_checkpoint(dir), std::runtime_error);
  EXPECT_THROW(load_checkpoint(scratch("missing")), std::runtime_error);
  const fs::path other = scratch("fmt");
  fs::create_directories(other);
  std::ofstream(other / "manifest.json") << R"({"format": "something-else", "version": 1})";
  EXPECT_THROW(load_checkpoint(other), std::runtime_error);
}

}  // namespace
}  // namespace boxmask
