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
#include "boxmask/eval.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace boxmask {
namespace fs = std::filesystem;

namespace {

constexpr std::pair<AblationAxis, const char*> kAxisNames[] = {
    {AblationAxis::kNumFrames, "num_frames"}, {AblationAxis::kSdIters, "sd_iters"},
    {AblationAxis::kCropScale, "crop_scale"}, {AblationAxis::kInterval, "interval"},
    {AblationAxis::kVariant, "variant"},
};

std::size_t parse_count(const std::string& s, const char* what) {
  std::size_t pos = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty() || s[0] == '-') {
    throw std::invalid_argument(std::string(what) + ": expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

double parse_real(const std::string& s, const char* what) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty()) {
    throw std::invalid_argument(std::string(what) + ": expected a number, got '" + s + "'");
  }
  return v;
}

}  // namespace

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> threads;
  for (std::size_t k = 0; k < workers; ++k) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

double jaccard(const Tensor& pred, const Tensor& gt) {
  require_same_shape(pred, gt, "jaccard");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0.0, g = gt[i] != 0.0;
    inter += p && g;
    uni += p || g;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json seqs = nlohmann::json::array();
  for (const auto& s : sequences) {
    seqs.push_back({{"id", s.id}, {"mean_j", s.mean_j}, {"per_frame", s.per_frame}});
  }
  return {{"dataset_mean_j", mean_j}, {"sequences", seqs}, {"config", config}};
}

EvalReport evaluate(const std::vector<VideoSample>& data, const Predictor& predict,
                    std::size_t workers) {
  if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
  EvalReport report;
  report.sequences.resize(data.size());
  parallel_for(data.size(), workers, [&](std::size_t k) {
    const VideoSample& s = data[k];
    if (!s.has_masks()) throw std::invalid_argument("evaluate: sequence '" + s.id + "' has no masks");
    const std::vector<Tensor> masks = predict(s);
    if (masks.size() != s.size()) {
      throw std::runtime_error("evaluate: predictor returned " + std::to_string(masks.size()) +
                               " masks for " + std::to_string(s.size()) + " frames");
    }
    SequenceScore score;
    score.id = s.id;
    for (std::size_t t = 0; t < s.size(); ++t) score.per_frame.push_back(jaccard(masks[t], s.gt_masks[t]));
    double total = 0;
    for (double j : score.per_frame) total += j;
    score.mean_j = total / static_cast<double>(score.per_frame.size());
    report.sequences[k] = std::move(score);
  });
  double total = 0;
  for (const auto& s : report.sequences) total += s.mean_j;
  report.mean_j = total / static_cast<double>(report.sequences.size());
  return report;
}

Predictor model_predictor(const ParameterSet& params, const PipelineConfig& config) {
  return [&params, config](const VideoSample& s) { return infer_video(params, config, s).masks; };
}

Predictor oracle_predictor() {
  return [](const VideoSample& s) { return s.gt_masks; };
}

Predictor empty_predictor() {
  return [](const VideoSample& s) {
    return std::vector<Tensor>(s.size(), Tensor(Shape{s.height(), s.width(), 1}));
  };
}

Predictor box_predictor() {
  return [](const VideoSample& s) {
    std::vector<Tensor> out;
    for (const auto& b : s.boxes) out.push_back(rasterize_box(b, s.height(), s.width()));
    return out;
  };
}

AblationAxis parse_axis(const std::string& s) {
  for (const auto& [axis, name] : kAxisNames) {
    if (s == name) return axis;
  }
  throw std::invalid_argument("unknown ablation axis '" + s +
                              "' (num_frames, sd_iters, crop_scale, interval, variant)");
}

std::string to_string(AblationAxis axis) {
  for (const auto& [a, name] : kAxisNames) {
    if (a == axis) return name;
  }
  return "unknown";
}

std::vector<std::string> default_axis_values(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::kNumFrames:
      return {"1", "3", "5", "7", "9", "11"};
    case AblationAxis::kSdIters:
      return {"5", "10", "15", "20"};
    case AblationAxis::kCropScale:
      return {"2", "3", "4", "5"};
    case AblationAxis::kInterval:
      return {"1", "5", "10", "15"};
    case AblationAxis::kVariant:
      return {"single_image", "multi_frame", "multi_frame_plus", "multi_frame_iterative"};
  }
  return {};
}

PipelineConfig with_axis_value(const PipelineConfig& config, AblationAxis axis,
                               const std::string& value) {
  PipelineConfig c = config;
  switch (axis) {
    case AblationAxis::kNumFrames:
      c.num_frames = parse_count(value, "num_frames");
      break;
    case AblationAxis::kSdIters:
      c.sd_iters_infer = parse_count(value, "sd_iters");
      break;
    case AblationAxis::kCropScale:
      c.crop_scale_infer = parse_real(value, "crop_scale");
      break;
    case AblationAxis::kInterval:
      c.interval = parse_count(value, "interval");
      break;
    case AblationAxis::kVariant:
      c.variant = parse_variant(value);
      break;
  }
  c.validate();
  return c;
}

nlohmann::json AblationTable::to_json() const {
  nlohmann::json cells_json = nlohmann::json::array();
  for (const auto& c : cells) {
    cells_json.push_back({{"value", c.value}, {"dataset_mean_j", c.report.mean_j}, {"report", c.report.to_json()}});
  }
  return {{"axis", to_string(axis)}, {"cells", cells_json}};
}

AblationTable ablate(const std::vector<VideoSample>& data, const ParameterSet& params,
                     const PipelineConfig& config, AblationAxis axis,
                     const std::vector<std::string>& values, std::size_t workers) {
  AblationTable table;
  table.axis = axis;
  for (const auto& v : values) {
    const PipelineConfig c = with_axis_value(config, axis, v);
    EvalReport r = evaluate(data, model_predictor(params, c), workers);
    r.config = c.to_json();
    table.cells.push_back({v, std::move(r)});
  }
  return table;
}

void ExportPolicy::validate() const {
  if (stride < 1) throw std::invalid_argument("export stride must be >= 1");
  if (max_frames < 1) throw std::invalid_argument("export max_frames must be >= 1");
}

std::vector<std::size_t> export_frames(std::size_t n, const ExportPolicy& policy) {
  policy.validate();
  const std::size_t limit = std::min(n, policy.max_frames * policy.stride);
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < limit; t += policy.stride) out.push_back(t);
  return out;
}

nlohmann::json ExportSummary::to_json() const {
  nlohmann::json seqs = nlohmann::json::array();
  for (const auto& s : sequences) {
    nlohmann::json entry{{"id", s.id}, {"frames", s.frames}};
    if (!s.error.empty()) entry["error"] = s.error;
    seqs.push_back(entry);
  }
  return {{"sequences", seqs}};
}

bool ExportSummary::all_ok() const {
  for (const auto& s : sequences) {
    if (!s.error.empty()) return false;
  }
  return true;
}

ExportSummary export_pseudo_labels(const std::vector<VideoSample>& data,
                                   const ParameterSet& params, const PipelineConfig& config,
                                   const ExportPolicy& policy, const fs::path& out,
                                   std::size_t workers) {
  policy.validate();
  config.validate();
  ExportSummary summary;
  summary.sequences.resize(data.size());
  parallel_for(data.size(), workers, [&](std::size_t k) {
    const VideoSample& s = data[k];
    ExportedSequence& rec = summary.sequences[k];
    rec.id = s.id;
    try {
      s.validate();
      const fs::path dir = out / s.id;
      fs::create_directories(dir / "masks");
      for (std::size_t t : export_frames(s.size(), policy)) {
        const Tensor prob = infer_frame(params, config, s, t);
        Tensor mask(prob.shape());
        for (std::size_t i = 0; i < prob.size(); ++i) mask[i] = prob[i] >= 0.5 ? 1.0 : 0.0;
        write_png(dir / "masks" / frame_file_name(t), mask);
        rec.frames.push_back(t);
      }
      std::ofstream manifest(dir / "manifest.json");
      manifest << nlohmann::json{{"sequence", s.id},
                                 {"frames", rec.frames},
                                 {"stride", policy.stride},
                                 {"max_frames", policy.max_frames}}
                      .dump(2)
               << '\n';
      if (!manifest) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
    } catch (const std::exception& err) {
      rec.error = err.what();
    }
  });
  fs::create_directories(out);
  std::ofstream top(out / "manifest.json");
  top << summary.to_json().dump(2) << '\n';
  return summary;
}

}  // namespace boxmask
