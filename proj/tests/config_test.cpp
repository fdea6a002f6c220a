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
#include "boxmask/config.hpp"

#include <gtest/gtest.h>

#include <set>

namespace boxmask {
namespace {

TEST(ConfigTest, ParsesKeysCommentsAndDims) {
  const RunConfig c = parse_run_config(R"(
# comment
num_frames = 5
interval=10   # trailing comment
crop_scale_infer = 3.5
placement = trailing
variant = multi_frame_plus
embed_dim = 8
workers = 4
)");
  EXPECT_EQ(c.pipeline.num_frames, 5u);
  EXPECT_EQ(c.pipeline.interval, 10u);
  EXPECT_EQ(c.pipeline.crop_scale_infer, 3.5);
  EXPECT_EQ(c.pipeline.placement, WindowPlacement::kTrailing);
  EXPECT_EQ(c.pipeline.variant, Variant::kMultiFramePlus);
  EXPECT_EQ(c.pipeline.dims.embed_dim, 8u);
  EXPECT_EQ(c.workers, 4u);
  EXPECT_EQ(c.pipeline.sd_iters_train, 5u);  // untouched default
}

TEST(ConfigTest, RejectsBadInput) {
  EXPECT_THROW(parse_run_config("bogus = 1"), ConfigError);
  EXPECT_THROW(parse_run_config("num_frames = 3\nnum_frames = 4"), ConfigError);
  EXPECT_THROW(parse_run_config("num_frames = three"), ConfigError);
  EXPECT_THROW(parse_run_config("num_frames = -1"), ConfigError);
  EXPECT_THROW(parse_run_config("num_frames"), ConfigError);
  EXPECT_THROW(parse_run_config("kernel_size = 4"), ConfigError);
  EXPECT_THROW(parse_run_config("crop_scale_train = 0.5"), ConfigError);
  try {
    parse_run_config("seed = 1\n\nnope = 2");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos) << e.what();
  }
}

TEST(ConfigTest, AppliesOnTopOfBase) {
  RunConfig base;
  base.pipeline.num_frames = 7;
  base.pipeline.seed = 9;
  const RunConfig c = parse_run_config("seed = 2", base);
  EXPECT_EQ(c.pipeline.num_frames, 7u);
  EXPECT_EQ(c.pipeline.seed, 2u);
}

TEST(ConfigTest, DefaultsListEveryKeyAndParseBack) {
  const auto defaults = config_defaults();
  std::set<std::string> keys;
  std::string text;
  for (const auto& [k, v] : defaults) {
    EXPECT_TRUE(keys.insert(k).second) << k;
    if (k == "train_data" || k == "val_data") continue;  // no default path
    text += k + " = " + v + "\n";
  }
  for (const char* k : {"num_frames", "interval", "sd_iters_train", "sd_iters_infer", "crop_scale_train",
                        "crop_scale_infer", "learning_rate", "grad_clip", "seed", "embed_dim",
                        "kernel_size", "train_data", "val_data", "workers", "placement", "variant"}) {
    EXPECT_TRUE(keys.count(k)) << k;
  }
  const RunConfig c = parse_run_config(text);
  EXPECT_EQ(c.pipeline.to_json(), PipelineConfig{}.to_json());
}

TEST(ConfigTest, MissingDataPathIsReported) {
  RunConfig c = parse_run_config("train_data = /nonexistent/boxmask/data");
  EXPECT_THROW(c.validate_paths(), ConfigError);
}

}  // namespace
}  // namespace boxmask
