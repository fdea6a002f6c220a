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
#include "boxmask/synthetic.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

namespace boxmask::synthetic {
namespace {

TEST(SyntheticTest, DeterministicForSeed) {
  SceneOptions opts;
  opts.frame_count = 5;
  const auto a = generate_dataset(2, opts, 17);
  const auto b = generate_dataset(2, opts, 17);
  const auto c = generate_dataset(2, opts, 18);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(a[k].id, b[k].id);
    for (std::size_t t = 0; t < 5; ++t) EXPECT_EQ(a[k].frames[t], b[k].frames[t]);
  }
  EXPECT_NE(a[0].frames[0], c[0].frames[0]);
}

TEST(SyntheticTest, BoxesAreTightAndMasksNonEmpty) {
  SceneOptions opts;
  opts.hard_distractors = true;
  for (const auto& s : generate_dataset(6, opts, 3)) {
    EXPECT_NO_THROW(s.validate());
    EXPECT_EQ(s.size(), 48u);
    EXPECT_EQ(s.height(), 64u);
    for (std::size_t t = 0; t < s.size(); ++t) {
      EXPECT_EQ(box_from_mask(s.gt_masks[t]), s.boxes[t]);
      for (double v : s.frames[t].data()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
    }
  }
}

TEST(SyntheticTest, ObjectSizeWithinOptions) {
  std::mt19937_64 rng(4);
  SceneOptions opts;
  for (int i = 0; i < 40; ++i) {
    const SceneSpec spec = random_scene(rng, opts);
    EXPECT_NO_THROW(spec.validate());
    EXPECT_GE(std::min(spec.target.radius_x, spec.target.radius_y), opts.min_radius);
    EXPECT_LE(std::max(spec.target.radius_x, spec.target.radius_y), opts.max_radius);
  }
}

TEST(SyntheticTest, HardDistractorCrossesTheBox) {
  std::mt19937_64 rng(8);
  SceneOptions opts;
  opts.hard_distractors = true;
  for (int i = 0; i < 20; ++i) {
    const SceneSpec spec = random_scene(rng, opts);
    ASSERT_EQ(spec.distractors.size(), 1u);
    const auto overlap = distractor_box_overlap(spec, 0);
    EXPECT_TRUE(std::count(overlap.begin(), overlap.end(), true) > 0);
    EXPECT_TRUE(std::count(overlap.begin(), overlap.end(), false) > 0);
  }
}

TEST(SyntheticTest, EasyScenesHaveNoDistractor) {
  std::mt19937_64 rng(8);
  EXPECT_TRUE(random_scene(rng, SceneOptions{}).distractors.empty());
}

TEST(SyntheticTest, MirroredSceneFlipsSilhouettes) {
  std::mt19937_64 rng(12);
  const SceneSpec spec = random_scene(rng, SceneOptions{});
  const SceneSpec m = mirrored(spec);
  for (std::size_t t : {0u, 10u, 47u}) {
    EXPECT_EQ(flip_horizontal(silhouette(spec.target, t, 64, 64)),
              silhouette(m.target, t, 64, 64));
  }
}

TEST(SyntheticTest, SinusoidalPathOscillatesAroundLine) {
  Trajectory p;
  p.kind = PathKind::kSinusoidal;
  p.x0 = 10;
  p.y0 = 20;
  p.vx = 1;
  p.amplitude = 3;
  p.period = 8;
  EXPECT_NEAR(p.position(0)[1], 20, 1e-12);
  EXPECT_NEAR(p.position(2)[1], 23, 1e-12);
  EXPECT_NEAR(p.position(8)[0], 18, 1e-12);
}

TEST(SyntheticTest, ValidateRejectsObjectsLeavingTheFrame) {
  SceneSpec spec;
  spec.target.path.x0 = 32;
  spec.target.path.y0 = 32;
  EXPECT_NO_THROW(spec.validate());
  spec.target.path.vx = 2;  // exits after ~13 frames
  EXPECT_THROW(spec.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace boxmask::synthetic
