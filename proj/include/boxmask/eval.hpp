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

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "boxmask/pipeline.hpp"

namespace boxmask {

/// |pred & gt| / |pred | gt| over nonzero pixels; 1 when both are empty.
double jaccard(const Tensor& pred, const Tensor& gt);

struct SequenceScore {
  std::string id;
  double mean_j = 0;
  std::vector<double> per_frame;
};

struct EvalReport {
  std::vector<SequenceScore> sequences;  // in dataset order
  double mean_j = 0;                     // unweighted mean of sequence means
  nlohmann::json config;

  nlohmann::json to_json() const;
};

/// Binary masks, one per frame.
using Predictor = std::function<std::vector<Tensor>(const VideoSample&)>;

/// Runs `predict` on every sequence (up to `workers` at a time) and reduces
/// in dataset order.
EvalReport evaluate(const std::vector<VideoSample>& data, const Predictor& predict,
                    std::size_t workers = 1);

Predictor model_predictor(const ParameterSet& params, const PipelineConfig& config);
Predictor oracle_predictor();
Predictor empty_predictor();
Predictor box_predictor();  // filled box as the mask

enum class AblationAxis { kNumFrames, kSdIters, kCropScale, kInterval, kVariant };

AblationAxis parse_axis(const std::string& s);
std::string to_string(AblationAxis axis);
/// Default sweep for an axis.
std::vector<std::string> default_axis_values(AblationAxis axis);
/// `config` with one axis set to `value`; throws std::invalid_argument for a
/// malformed value.
PipelineConfig with_axis_value(const PipelineConfig& config, AblationAxis axis,
                               const std::string& value);

struct AblationCell {
  std::string value;
  EvalReport report;
};

struct AblationTable {
  AblationAxis axis = AblationAxis::kNumFrames;
  std::vector<AblationCell> cells;
  nlohmann::json to_json() const;
};

AblationTable ablate(const std::vector<VideoSample>& data, const ParameterSet& params,
                     const PipelineConfig& config, AblationAxis axis,
                     const std::vector<std::string>& values, std::size_t workers = 1);

/// Annotate every `stride`-th frame, at most `max_frames` per video.
struct ExportPolicy {
  std::size_t stride = 5;
  std::size_t max_frames = 200;
  void validate() const;
};

/// {0, k, 2k, ...} restricted to [0, min(n, max_frames * k)).
std::vector<std::size_t> export_frames(std::size_t n, const ExportPolicy& policy);

struct ExportedSequence {
  std::string id;
  std::vector<std::size_t> frames;
  std::string error;  // empty on success
};

struct ExportSummary {
  std::vector<ExportedSequence> sequences;
  nlohmann::json to_json() const;
  bool all_ok() const;
};

/// Writes <out>/<seq>/masks/%05d.png for the policy's frames and a
/// manifest.json per sequence and at the top level. Failures are recorded
/// per sequence; the batch carries on.
ExportSummary export_pseudo_labels(const std::vector<VideoSample>& data,
                                   const ParameterSet& params, const PipelineConfig& config,
                                   const ExportPolicy& policy, const std::filesystem::path& out,
                                   std::size_t workers = 1);

/// Calls fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace boxmask
