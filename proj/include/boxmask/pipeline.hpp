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
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "boxmask/data.hpp"
#include "boxmask/model.hpp"
#include "boxmask/solver.hpp"

namespace boxmask {

enum class Variant { kSingleImage, kMultiFrame, kMultiFramePlus, kMultiFrameIterative };
enum class WindowPlacement { kCentered, kTrailing, kLeading };

std::string to_string(Variant v);
std::string to_string(WindowPlacement p);
Variant parse_variant(const std::string& s);
WindowPlacement parse_placement(const std::string& s);

struct PipelineConfig {
  ModelDims dims;
  std::size_t num_frames = 3;  // T
  std::size_t interval = 15;   // inference frame spacing
  std::size_t sd_iters_train = 5;
  std::size_t sd_iters_infer = 15;
  double crop_scale_train = 5.0;
  double crop_scale_infer = 4.0;
  std::size_t work_height = 64;
  std::size_t work_width = 64;
  double learning_rate = 1e-2;
  double momentum = 0.9;
  double lr_decay = 5.0;  // divisor applied at 3/8 and 6/8 of training
  double grad_clip = 1.0;  // global gradient-norm cap; 0 disables
  double flip_probability = 0.5;
  std::size_t iterations = 10000;
  std::size_t sample_window = 100;  // training frames are drawn from a window this long
  std::size_t log_every = 1;
  std::size_t checkpoint_every = 1000;
  std::uint64_t seed = 0;
  WindowPlacement placement = WindowPlacement::kCentered;
  Variant variant = Variant::kMultiFrameIterative;

  void validate() const;
  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);
};

struct SegmentationResult {
  std::vector<Var> y_logits;
  std::vector<Var> y;  // sigmoid(y_logits)
  std::vector<Var> y_hat_logits;
  std::vector<Var> y_hat;
  aggregation::SolverTrace trace;          // first aggregation pass
  aggregation::SolverTrace refined_trace;  // second pass (iterative variant only)
};

struct ForwardOptions {
  std::size_t sd_iters = 5;
  std::size_t kernel_size = 3;
  Variant variant = Variant::kMultiFrameIterative;
};

/// One window of T patches at work resolution with their boxes in patch
/// coordinates. Variants other than the iterative one skip the second pass
/// and report y_hat = y.
SegmentationResult forward_sequence(const BoundParameters& params,
                                    const std::vector<Tensor>& patches,
                                    const std::vector<BoundingBox>& boxes,
                                    const ForwardOptions& options);

/// Pixel-mean binary cross-entropy plus (1 - soft Jaccard), smoothing 1.
Var frame_loss(const Var& logits, const Tensor& gt);

struct SequenceLoss {
  Var total;
  std::vector<double> initial_terms;
  std::vector<double> refined_terms;
};

/// (1/T) sum l(y_t) + (1/T) sum l(y_hat_t).
SequenceLoss sequence_loss(const SegmentationResult& result, const std::vector<Tensor>& gt);

struct TrainingWindow {
  std::vector<Tensor> patches;
  std::vector<Tensor> masks;
  std::vector<BoundingBox> boxes;
  std::string sequence;
  std::vector<std::size_t> frames;
  bool flipped = false;
};

/// Sequence, frames, flip and crops for one training step.
TrainingWindow sample_training_window(const std::vector<VideoSample>& data,
                                      const PipelineConfig& config, std::mt19937_64& rng);

double learning_rate_at(const PipelineConfig& config, std::size_t iteration);

struct TrainRecord {
  std::size_t iteration = 0;
  double loss = 0;
  double lambda = 0;
  double lr = 0;
  nlohmann::json to_json() const;
};

struct TrainOptions {
  std::filesystem::path out_dir;  // checkpoints and metrics.jsonl; empty = none
  std::function<void(const TrainRecord&)> on_log;
  std::size_t stop_after = 0;  // end early without changing the schedule; 0 = run to the end
};

struct TrainResult {
  ParameterSet params;
  std::vector<TrainRecord> log;
};

/// Momentum SGD on sequence_loss; deterministic for a fixed config. Throws
/// NumericError with the offending iteration when the loss is not finite.
TrainResult train(const std::vector<VideoSample>& data, const PipelineConfig& config,
                  const TrainOptions& options = {});

/// Indices of the inference window for `target` in an n-frame video, and the
/// target's position inside it. Windows keep the spacing `interval` and are
/// placed as close to the preferred offset as the video allows; when no
/// placement fits, indices are clamped to the video.
struct Window {
  std::vector<std::size_t> frames;
  std::size_t position = 0;
};
Window window_for(std::size_t target, std::size_t n, std::size_t num_frames, std::size_t interval,
                  WindowPlacement placement);

struct VideoPrediction {
  std::vector<Tensor> probabilities;  // H x W x 1 in [0, 1]
  std::vector<Tensor> masks;          // binary, probability >= 0.5
  std::vector<aggregation::SolverTrace> traces;
};

/// Segments every frame of `sample` with its own window.
VideoPrediction infer_video(const ParameterSet& params, const PipelineConfig& config,
                            const VideoSample& sample);

/// Refined probability of frame `target` only.
Tensor infer_frame(const ParameterSet& params, const PipelineConfig& config,
                   const VideoSample& sample, std::size_t target,
                   std::vector<aggregation::SolverTrace>* traces = nullptr);

}  // namespace boxmask
