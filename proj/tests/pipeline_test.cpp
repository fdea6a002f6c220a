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
#include "boxmask/pipeline.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "boxmask/synthetic.hpp"
#include "test_support.hpp"

namespace boxmask {
namespace {

using testing::random_tensor;

std::vector<VideoSample> toy_data(std::size_t count, std::size_t frames, std::uint64_t seed) {
  synthetic::SceneOptions opts;
  opts.frame_count = frames;
  return synthetic::generate_dataset(count, opts, seed);
}

struct Window3 {
  std::vector<Tensor> patches;
  std::vector<BoundingBox> boxes;
};

Window3 crops(const VideoSample& s, std::vector<std::size_t> frames) {
  Window3 w;
  for (std::size_t t : frames) {
    auto c = crop_resample(s.frames[t], nullptr, s.boxes[t], 4.0, 64, 64);
    w.patches.push_back(c.patch);
    w.boxes.push_back(c.box);
  }
  return w;
}

TEST(LossTest, HalfProbabilityExample) {
  Tape tape;
  Tensor gt(Shape{2, 2, 1});
  gt.at(0, 0, 0) = gt.at(0, 1, 0) = 1;
  const double l = frame_loss(tape.constant(Tensor(Shape{2, 2, 1})), gt).value().item();
  EXPECT_NEAR(l, std::log(2.0) + 0.5, 1e-12);
  EXPECT_NEAR(l, 1.1931, 1e-4);
}

TEST(LossTest, PerfectPredictionIsNearZero) {
  Tape tape;
  Tensor gt(Shape{4, 4, 1});
  Tensor logits(Shape{4, 4, 1}, -40);
  for (std::size_t i = 0; i < 8; ++i) gt[i] = 1, logits[i] = 40;
  EXPECT_LT(frame_loss(tape.constant(logits), gt).value().item(), 1e-12);
}

TEST(LossTest, SequenceLossIsMeanAndOrderFree) {
  std::mt19937_64 rng(1);
  Tape tape;
  SegmentationResult r;
  std::vector<Tensor> gt;
  for (int t = 0; t < 3; ++t) {
    r.y_logits.push_back(tape.constant(random_tensor({4, 4, 1}, rng, -3, 3)));
    r.y_hat_logits.push_back(tape.constant(random_tensor({4, 4, 1}, rng, -3, 3)));
    r.y.push_back(sigmoid(r.y_logits.back()));
    r.y_hat.push_back(sigmoid(r.y_hat_logits.back()));
    Tensor g = random_tensor({4, 4, 1}, rng, 0, 1);
    for (double& v : g.data()) v = v > 0.5;
    gt.push_back(g);
  }
  const SequenceLoss l = sequence_loss(r, gt);
  double expect = 0;
  for (int t = 0; t < 3; ++t) {
    expect += frame_loss(r.y_logits[t], gt[t]).value().item() / 3;
    expect += frame_loss(r.y_hat_logits[t], gt[t]).value().item() / 3;
  }
  EXPECT_NEAR(l.total.value().item(), expect, 1e-12);
  SegmentationResult p = r;
  std::swap(p.y_logits[0], p.y_logits[2]);
  std::swap(p.y_hat_logits[0], p.y_hat_logits[2]);
  std::swap(p.y[0], p.y[2]);
  std::swap(p.y_hat[0], p.y_hat[2]);
  std::vector<Tensor> pg = {gt[2], gt[1], gt[0]};
  EXPECT_NEAR(sequence_loss(p, pg).total.value().item(), l.total.value().item(), 1e-12);
  EXPECT_THROW(sequence_loss(r, {gt[0]}), std::invalid_argument);
}

TEST(ForwardTest, ZeroWeightsGiveHalfEverywhere) {
  ParameterSet params = init_parameters(ModelDims{}, 0);
  for (auto& [n, t] : params.tensors()) t = zeros_like(t);
  const auto data = toy_data(1, 3, 2);
  const auto w = crops(data[0], {0, 1, 2});
  Tape tape;
  const auto seg = forward_sequence(BoundParameters::frozen(tape, params), w.patches, w.boxes, {});
  for (const auto* list : {&seg.y, &seg.y_hat})
    for (const Var& y : *list)
      for (double v : y.value().data()) EXPECT_EQ(v, 0.5);
}

TEST(ForwardTest, OutputsAndTracesPerVariant) {
  const ParameterSet params = init_parameters(ModelDims{}, 3);
  const auto data = toy_data(1, 5, 4);
  const auto w = crops(data[0], {0, 2, 4});
  for (Variant v : {Variant::kSingleImage, Variant::kMultiFrame, Variant::kMultiFramePlus,
                    Variant::kMultiFrameIterative}) {
    Tape tape;
    const auto seg =
        forward_sequence(BoundParameters::frozen(tape, params), w.patches, w.boxes, {5, 3, v});
    ASSERT_EQ(seg.y.size(), 3u);
    ASSERT_EQ(seg.y_hat.size(), 3u);
    for (std::size_t t = 0; t < 3; ++t) {
      EXPECT_EQ(seg.y[t].shape(), (Shape{64, 64, 1}));
      for (double p : seg.y_hat[t].value().data()) {
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
      }
      if (v != Variant::kMultiFrameIterative) EXPECT_EQ(seg.y_hat[t].value(), seg.y[t].value());
    }
    EXPECT_EQ(seg.trace.objectives.empty(), v == Variant::kSingleImage) << to_string(v);
    EXPECT_EQ(seg.refined_trace.objectives.empty(), v != Variant::kMultiFrameIterative);
    if (!seg.trace.objectives.empty()) EXPECT_TRUE(seg.trace.non_increasing());
    if (!seg.refined_trace.objectives.empty()) EXPECT_TRUE(seg.refined_trace.non_increasing());
  }
}

TEST(ForwardTest, EveryTrainableTensorGetsFiniteGradient) {
  const ParameterSet params = init_parameters(ModelDims{}, 5);
  const auto data = toy_data(1, 3, 6);
  const auto w = crops(data[0], {0, 1, 2});
  std::vector<Tensor> gt;
  for (std::size_t t = 0; t < 3; ++t) {
    gt.push_back(*crop_resample(data[0].frames[t], &data[0].gt_masks[t], data[0].boxes[t], 4.0, 64, 64).mask);
  }
  Tape tape;
  const auto bound = BoundParameters::trainable(tape, params);
  const auto loss = sequence_loss(forward_sequence(bound, w.patches, w.boxes, {}), gt);
  const Gradients g = tape.backward(loss.total);
  for (const auto& [name, var] : bound.vars()) {
    ASSERT_TRUE(g.contains(var)) << name;
    EXPECT_TRUE(g[var].all_finite()) << name;
  }
}

TEST(WindowTest, CenteredPlacement) {
  auto w = window_for(24, 48, 3, 15, WindowPlacement::kCentered);
  EXPECT_EQ(w.frames, (std::vector<std::size_t>{9, 24, 39}));
  EXPECT_EQ(w.position, 1u);
  w = window_for(0, 48, 3, 15, WindowPlacement::kCentered);
  EXPECT_EQ(w.frames, (std::vector<std::size_t>{0, 15, 30}));
  EXPECT_EQ(w.position, 0u);
  w = window_for(47, 48, 3, 15, WindowPlacement::kCentered);
  EXPECT_EQ(w.frames, (std::vector<std::size_t>{17, 32, 47}));
  EXPECT_EQ(w.position, 2u);
}

TEST(WindowTest, TrailingAndLeading) {
  EXPECT_EQ(window_for(40, 48, 3, 15, WindowPlacement::kTrailing).frames,
            (std::vector<std::size_t>{10, 25, 40}));
  EXPECT_EQ(window_for(5, 48, 3, 15, WindowPlacement::kLeading).frames,
            (std::vector<std::size_t>{5, 20, 35}));
  // leading does not fit at the end; the nearest fitting position is used
  const auto w = window_for(40, 48, 3, 15, WindowPlacement::kLeading);
  EXPECT_EQ(w.frames, (std::vector<std::size_t>{10, 25, 40}));
  EXPECT_EQ(w.position, 2u);
}

TEST(WindowTest, ShortVideosClamp) {
  // enumerate every target of every short video: always T entries, target at position
  for (std::size_t n = 1; n <= 8; ++n)
    for (std::size_t t = 0; t < n; ++t)
      for (auto pl : {WindowPlacement::kCentered, WindowPlacement::kTrailing, WindowPlacement::kLeading}) {
        const auto w = window_for(t, n, 5, 3, pl);
        ASSERT_EQ(w.frames.size(), 5u);
        EXPECT_EQ(w.frames[w.position], t);
        EXPECT_TRUE(std::is_sorted(w.frames.begin(), w.frames.end()));
        for (auto f : w.frames) EXPECT_LT(f, n);
      }
  const auto w = window_for(2, 5, 3, 15, WindowPlacement::kCentered);
  EXPECT_EQ(w.frames, (std::vector<std::size_t>{0, 2, 4}));
}

TEST(WindowTest, SingleFrameWindowIsTheFrame) {
  for (std::size_t t = 0; t < 10; ++t) {
    const auto w = window_for(t, 10, 1, 15, WindowPlacement::kCentered);
    EXPECT_EQ(w.frames, std::vector<std::size_t>{t});
  }
  EXPECT_THROW(window_for(10, 10, 1, 1, WindowPlacement::kCentered), std::out_of_range);
}

TEST(InferTest, MaskPerFrameAndWindowsIndependent) {
  PipelineConfig cfg;
  cfg.sd_iters_infer = 3;
  const ParameterSet params = init_parameters(cfg.dims, 7);
  const auto s = toy_data(1, 6, 8)[0];  // shorter than (T-1)*interval + 1
  const auto pred = infer_video(params, cfg, s);
  ASSERT_EQ(pred.masks.size(), 6u);
  for (std::size_t t : {4u, 1u}) {
    EXPECT_EQ(infer_frame(params, cfg, s, t), pred.probabilities[t]);
  }
  for (std::size_t t = 0; t < 6; ++t) {
    EXPECT_EQ(pred.masks[t].shape(), (Shape{64, 64, 1}));
    for (std::size_t i = 0; i < pred.masks[t].size(); ++i)
      EXPECT_EQ(pred.masks[t][i], pred.probabilities[t][i] >= 0.5 ? 1.0 : 0.0);
  }
  for (const auto& tr : pred.traces) EXPECT_TRUE(tr.non_increasing());
}

TEST(InferTest, SingleFrameMatchesDirectPipeline) {
  PipelineConfig cfg;
  cfg.num_frames = 1;
  cfg.sd_iters_infer = 4;
  const ParameterSet params = init_parameters(cfg.dims, 9);
  const auto s = toy_data(1, 4, 10)[0];
  const Tensor p = infer_frame(params, cfg, s, 2);
  const auto c = crop_resample(s.frames[2], nullptr, s.boxes[2], cfg.crop_scale_infer, 64, 64);
  Tape tape;
  const auto seg = forward_sequence(BoundParameters::frozen(tape, params), {c.patch}, {c.box},
                                    {4, 3, Variant::kMultiFrameIterative});
  Tensor direct = resample_to_image(seg.y_hat[0].value(), c.transform);
  for (double& v : direct.data()) v = std::clamp(v, 0.0, 1.0);
  EXPECT_EQ(p, direct);
}

TEST(TrainTest, ScheduleStepsAtThreeAndSixEighths) {
  PipelineConfig cfg;
  cfg.iterations = 800;
  EXPECT_DOUBLE_EQ(learning_rate_at(cfg, 0), 1e-2);
  EXPECT_DOUBLE_EQ(learning_rate_at(cfg, 299), 1e-2);
  EXPECT_DOUBLE_EQ(learning_rate_at(cfg, 300), 2e-3);
  EXPECT_DOUBLE_EQ(learning_rate_at(cfg, 599), 2e-3);
  EXPECT_DOUBLE_EQ(learning_rate_at(cfg, 600), 4e-4);
}

TEST(TrainTest, SampledWindowIsConsistent) {
  PipelineConfig cfg;
  const auto data = toy_data(3, 20, 11);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    const auto w = sample_training_window(data, cfg, rng);
    ASSERT_EQ(w.frames.size(), 3u);
    EXPECT_TRUE(std::is_sorted(w.frames.begin(), w.frames.end()));
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_EQ(w.patches[k].shape(), (Shape{64, 64, 3}));
      EXPECT_EQ(w.masks[k].shape(), (Shape{64, 64, 1}));
      EXPECT_LT(w.frames[k], 20u);
    }
  }
}

TEST(TrainTest, ConfigJsonRoundTrip) {
  PipelineConfig cfg;
  cfg.num_frames = 5;
  cfg.placement = WindowPlacement::kTrailing;
  cfg.variant = Variant::kMultiFramePlus;
  cfg.grad_clip = 3;
  EXPECT_EQ(PipelineConfig::from_json(cfg.to_json()).to_json(), cfg.to_json());
  cfg.num_frames = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  EXPECT_EQ(parse_variant(to_string(Variant::kSingleImage)), Variant::kSingleImage);
  EXPECT_THROW(parse_placement("sideways"), std::invalid_argument);
}

TEST(TrainTest, SeededRunsAreBitIdentical) {
  PipelineConfig cfg;
  cfg.iterations = 10;
  cfg.seed = 21;
  const auto data = toy_data(3, 12, 12);
  const auto a = train(data, cfg);
  const auto b = train(data, cfg);
  ASSERT_EQ(a.log.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(a.log[i].loss, b.log[i].loss);
  EXPECT_EQ(a.params.tensors(), b.params.tensors());
}

TEST(TrainTest, RejectsDataWithoutMasks) {
  auto data = toy_data(1, 4, 1);
  data[0].gt_masks.clear();
  PipelineConfig cfg;
  cfg.iterations = 1;
  EXPECT_THROW(train(data, cfg), std::invalid_argument);
}

TEST(TrainTest, LossHalvesWithinFiveHundredIterations) {
  PipelineConfig cfg;
  cfg.iterations = 500;
  cfg.seed = 3;
  const auto data = toy_data(10, 48, 13);
  const auto res = train(data, cfg);
  auto avg = [&](std::size_t from) {
    double s = 0;
    for (std::size_t i = from; i < from + 20; ++i) s += res.log[i].loss;
    return s / 20;
  };
  EXPECT_LE(avg(480), 0.5 * avg(0)) << "start " << avg(0) << " end " << avg(480);
}

}  // namespace
}  // namespace boxmask
