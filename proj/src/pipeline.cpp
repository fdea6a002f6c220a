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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "boxmask/checkpoint.hpp"

namespace boxmask {
namespace {

constexpr std::pair<Variant, const char*> kVariantNames[] = {
    {Variant::kSingleImage, "single_image"},
    {Variant::kMultiFrame, "multi_frame"},
    {Variant::kMultiFramePlus, "multi_frame_plus"},
    {Variant::kMultiFrameIterative, "multi_frame_iterative"},
};
constexpr std::pair<WindowPlacement, const char*> kPlacementNames[] = {
    {WindowPlacement::kCentered, "centered"},
    {WindowPlacement::kTrailing, "trailing"},
    {WindowPlacement::kLeading, "leading"},
};

std::vector<Var> aggregate(const BoundParameters& params, const std::vector<Var>& x,
                           const std::vector<Var>& e, const std::vector<Var>& w,
                           const ForwardOptions& options, aggregation::SolverTrace& trace) {
  std::vector<aggregation::FrameObservation> frames;
  for (std::size_t t = 0; t < x.size(); ++t) frames.push_back({x[t], e[t], w[t]});
  aggregation::SolverParams sp;
  sp.num_iterations = options.sd_iters;
  sp.kernel_size = options.kernel_size;
  sp.lambda_raw = params["solver.lambda_raw"];
  aggregation::SolveResult solved = aggregation::solve(frames, sp);
  trace = std::move(solved.trace);
  std::vector<Var> s;
  for (const Var& xt : x) s.push_back(aggregation::apply_filter(xt, solved.z));
  return s;
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  return a * 0x9e3779b97f4a7c15ULL + (b ^ (b >> 29));
}

}  // namespace

std::string to_string(Variant v) {
  for (const auto& [key, name] : kVariantNames) {
    if (key == v) return name;
  }
  return "unknown";
}

std::string to_string(WindowPlacement p) {
  for (const auto& [key, name] : kPlacementNames) {
    if (key == p) return name;
  }
  return "unknown";
}

Variant parse_variant(const std::string& s) {
  for (const auto& [key, name] : kVariantNames) {
    if (s == name) return key;
  }
  throw std::invalid_argument("unknown variant '" + s +
                              "' (single_image, multi_frame, multi_frame_plus, "
                              "multi_frame_iterative)");
}

WindowPlacement parse_placement(const std::string& s) {
  for (const auto& [key, name] : kPlacementNames) {
    if (s == name) return key;
  }
  throw std::invalid_argument("unknown window placement '" + s +
                              "' (centered, trailing, leading)");
}

void PipelineConfig::validate() const {
  dims.validate();
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  require(num_frames >= 1, "num_frames must be >= 1");
  require(interval >= 1, "interval must be >= 1");
  require(sd_iters_train >= 1 && sd_iters_infer >= 1, "sd_iters must be >= 1");
  require(crop_scale_train >= 1 && crop_scale_infer >= 1, "crop scales must be >= 1");
  require(work_height > 0 && work_width > 0 && work_height % 4 == 0 && work_width % 4 == 0,
          "work resolution must be positive multiples of 4");
  require(learning_rate > 0, "learning_rate must be positive");
  require(momentum >= 0 && momentum < 1, "momentum must be in [0, 1)");
  require(lr_decay >= 1, "lr_decay must be >= 1");
  require(grad_clip >= 0, "grad_clip must be >= 0");
  require(flip_probability >= 0 && flip_probability <= 1, "flip_probability must be in [0, 1]");
  require(iterations >= 1, "iterations must be >= 1");
  require(sample_window >= 1, "sample_window must be >= 1");
  require(log_every >= 1 && checkpoint_every >= 1, "log_every and checkpoint_every must be >= 1");
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"dims", dims.to_json()},
          {"num_frames", num_frames},
          {"interval", interval},
          {"sd_iters_train", sd_iters_train},
          {"sd_iters_infer", sd_iters_infer},
          {"crop_scale_train", crop_scale_train},
          {"crop_scale_infer", crop_scale_infer},
          {"work_height", work_height},
          {"work_width", work_width},
          {"learning_rate", learning_rate},
          {"momentum", momentum},
          {"lr_decay", lr_decay},
          {"grad_clip", grad_clip},
          {"flip_probability", flip_probability},
          {"iterations", iterations},
          {"sample_window", sample_window},
          {"log_every", log_every},
          {"checkpoint_every", checkpoint_every},
          {"seed", seed},
          {"placement", to_string(placement)},
          {"variant", to_string(variant)}};
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  PipelineConfig c;
  if (j.contains("dims")) c.dims = ModelDims::from_json(j.at("dims"));
  c.num_frames = j.value("num_frames", c.num_frames);
  c.interval = j.value("interval", c.interval);
  c.sd_iters_train = j.value("sd_iters_train", c.sd_iters_train);
  c.sd_iters_infer = j.value("sd_iters_infer", c.sd_iters_infer);
  c.crop_scale_train = j.value("crop_scale_train", c.crop_scale_train);
  c.crop_scale_infer = j.value("crop_scale_infer", c.crop_scale_infer);
  c.work_height = j.value("work_height", c.work_height);
  c.work_width = j.value("work_width", c.work_width);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  c.lr_decay = j.value("lr_decay", c.lr_decay);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.flip_probability = j.value("flip_probability", c.flip_probability);
  c.iterations = j.value("iterations", c.iterations);
  c.sample_window = j.value("sample_window", c.sample_window);
  c.log_every = j.value("log_every", c.log_every);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.seed = j.value("seed", c.seed);
  c.placement = parse_placement(j.value("placement", to_string(c.placement)));
  c.variant = parse_variant(j.value("variant", to_string(c.variant)));
  c.validate();
  return c;
}

SegmentationResult forward_sequence(const BoundParameters& params,
                                    const std::vector<Tensor>& patches,
                                    const std::vector<BoundingBox>& boxes,
                                    const ForwardOptions& options) {
  if (patches.empty()) throw std::invalid_argument("forward_sequence: empty window");
  if (boxes.size() != patches.size()) {
    throw std::invalid_argument("forward_sequence: one box per frame required");
  }
  Tape& tape = params.tape();
  const std::size_t n = patches.size();
  std::vector<Pyramid> pyramids;
  std::vector<Var> x, e, w, m;
  for (std::size_t t = 0; t < n; ++t) {
    if (patches[t].rank() != 3) throw ShapeError("forward_sequence: frames must be H x W x 3");
    const std::size_t h = patches[t].dim(0), wd = patches[t].dim(1);
    pyramids.push_back(backbone(params, tape.constant(patches[t])));
    x.push_back(pyramids.back().x);
    const EncoderOutput enc =
        encode(params, pyramids.back().x, tape.constant(rasterize_box(boxes[t], h, wd)));
    e.push_back(enc.e);
    w.push_back(enc.w);
    m.push_back(enc.m);
  }

  SegmentationResult out;
  std::vector<Var> s;
  if (options.variant == Variant::kSingleImage) {
    for (const Var& mt : m) s.push_back(tape.constant(Tensor(mt.shape())));
  } else {
    s = aggregate(params, x, e, w, options, out.trace);
  }
  std::vector<Var> m_dec = m;
  if (options.variant == Variant::kMultiFrame) {
    for (Var& mt : m_dec) mt = tape.constant(Tensor(mt.shape()));
  }
  for (std::size_t t = 0; t < n; ++t) {
    out.y_logits.push_back(decode(params, s[t], m_dec[t], pyramids[t]));
    out.y.push_back(sigmoid(out.y_logits.back()));
  }
  if (options.variant != Variant::kMultiFrameIterative) {
    out.y_hat_logits = out.y_logits;
    out.y_hat = out.y;
    return out;
  }

  std::vector<Var> e2, w2;
  for (std::size_t t = 0; t < n; ++t) {
    const RefinedEncoding r = encode_refined(params, out.y[t]);
    e2.push_back(r.e);
    w2.push_back(r.w);
  }
  const std::vector<Var> s2 = aggregate(params, x, e2, w2, options, out.refined_trace);
  for (std::size_t t = 0; t < n; ++t) {
    out.y_hat_logits.push_back(decode(params, s2[t], m[t], pyramids[t]));
    out.y_hat.push_back(sigmoid(out.y_hat_logits.back()));
  }
  return out;
}

Var frame_loss(const Var& logits, const Tensor& gt) {
  Tape& tape = logits.tape();
  const Var bce = bce_with_logits(logits, gt);
  const Var p = sigmoid(logits);
  const Var g = tape.constant(gt);
  const Var inter = sum(p * g);
  const Var uni = sum(p) + tape.constant(Tensor::scalar(sum(gt))) - inter;
  const Var jaccard = add_scalar(inter, 1.0) / add_scalar(uni, 1.0);
  return add_scalar(bce - jaccard, 1.0);
}

SequenceLoss sequence_loss(const SegmentationResult& result, const std::vector<Tensor>& gt) {
  const std::size_t n = result.y_logits.size();
  if (n == 0 || gt.size() != n || result.y_hat_logits.size() != n) {
    throw std::invalid_argument("sequence_loss: one ground-truth mask per frame required");
  }
  SequenceLoss out;
  Var initial, refined;
  for (std::size_t t = 0; t < n; ++t) {
    const Var a = frame_loss(result.y_logits[t], gt[t]);
    const Var b = frame_loss(result.y_hat_logits[t], gt[t]);
    out.initial_terms.push_back(a.value().item());
    out.refined_terms.push_back(b.value().item());
    initial = initial.valid() ? initial + a : a;
    refined = refined.valid() ? refined + b : b;
  }
  const double inv = 1.0 / static_cast<double>(n);
  out.total = scale(initial, inv) + scale(refined, inv);
  return out;
}

TrainingWindow sample_training_window(const std::vector<VideoSample>& data,
                                      const PipelineConfig& config, std::mt19937_64& rng) {
  if (data.empty()) throw std::invalid_argument("training set is empty");
  TrainingWindow win;
  const VideoSample& seq =
      data[std::uniform_int_distribution<std::size_t>(0, data.size() - 1)(rng)];
  if (!seq.has_masks()) throw std::invalid_argument("sequence '" + seq.id + "' has no masks");
  win.sequence = seq.id;
  const std::size_t n = seq.size();
  const std::size_t span = std::min(config.sample_window, n);
  const std::size_t start = std::uniform_int_distribution<std::size_t>(0, n - span)(rng);
  const std::size_t t_count = config.num_frames;
  if (span >= t_count) {
    std::vector<std::size_t> pool(span);
    std::iota(pool.begin(), pool.end(), start);
    for (std::size_t k = 0; k < t_count; ++k) {
      std::swap(pool[k], pool[std::uniform_int_distribution<std::size_t>(k, span - 1)(rng)]);
    }
    win.frames.assign(pool.begin(), pool.begin() + static_cast<long>(t_count));
  } else {
    for (std::size_t k = 0; k < t_count; ++k) {
      win.frames.push_back(start + std::uniform_int_distribution<std::size_t>(0, span - 1)(rng));
    }
  }
  std::sort(win.frames.begin(), win.frames.end());
  win.flipped = std::bernoulli_distribution(config.flip_probability)(rng);

  for (std::size_t t : win.frames) {
    Tensor frame = win.flipped ? flip_horizontal(seq.frames[t]) : seq.frames[t];
    Tensor mask = win.flipped ? flip_horizontal(seq.gt_masks[t]) : seq.gt_masks[t];
    const BoundingBox box = box_from_mask(mask);
    CropResult crop = crop_resample(frame, &mask, box, config.crop_scale_train,
                                    config.work_height, config.work_width);
    win.patches.push_back(std::move(crop.patch));
    win.masks.push_back(std::move(*crop.mask));
    win.boxes.push_back(crop.box);
  }
  return win;
}

double learning_rate_at(const PipelineConfig& config, std::size_t iteration) {
  double lr = config.learning_rate;
  if (iteration >= config.iterations * 3 / 8) lr /= config.lr_decay;
  if (iteration >= config.iterations * 6 / 8) lr /= config.lr_decay;
  return lr;
}

nlohmann::json TrainRecord::to_json() const {
  return {{"iter", iteration}, {"loss", loss}, {"lambda", lambda}, {"lr", lr}};
}

TrainResult train(const std::vector<VideoSample>& data, const PipelineConfig& config,
                  const TrainOptions& options) {
  config.validate();
  for (const auto& s : data) {
    s.validate();
    if (!s.has_masks()) throw std::invalid_argument("training sequence '" + s.id + "' has no masks");
  }
  if (data.empty()) throw std::invalid_argument("training set is empty");

  TrainResult result;
  result.params = init_parameters(config.dims, config.seed);
  std::map<std::string, Tensor> velocity;
  for (const auto& [name, t] : result.params.tensors()) velocity.emplace(name, zeros_like(t));
  std::mt19937_64 rng(mix(config.seed, 0x5eed));

  std::ofstream metrics;
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    metrics.open(options.out_dir / "metrics.jsonl", std::ios::trunc);
    if (!metrics) throw std::runtime_error("cannot write metrics log in " + options.out_dir.string());
  }
  const ForwardOptions fwd{config.sd_iters_train, config.dims.kernel_size, config.variant};

  const std::size_t stop =
      options.stop_after > 0 ? std::min(options.stop_after, config.iterations) : config.iterations;
  for (std::size_t it = 0; it < stop; ++it) {
    const TrainingWindow win = sample_training_window(data, config, rng);
    Tape tape;
    const BoundParameters bound = BoundParameters::trainable(tape, result.params);
    double loss_value = 0;
    Gradients grads;
    try {
      const SegmentationResult seg = forward_sequence(bound, win.patches, win.boxes, fwd);
      const SequenceLoss loss = sequence_loss(seg, win.masks);
      loss_value = loss.total.value().item();
      grads = tape.backward(loss.total);
    } catch (const NumericError& err) {
      throw NumericError("training diverged at iteration " + std::to_string(it) + " (sequence " +
                         win.sequence + "): " + err.what());
    }

    double scale_factor = 1.0;
    if (config.grad_clip > 0) {
      double norm2 = 0;
      for (const auto& [name, var] : bound.vars()) norm2 += squared_norm(grads[var]);
      const double norm = std::sqrt(norm2);
      if (!std::isfinite(norm)) {
        throw NumericError("non-finite gradient at iteration " + std::to_string(it));
      }
      if (norm > config.grad_clip) scale_factor = config.grad_clip / norm;
    }

    TrainRecord rec;
    rec.iteration = it;
    rec.loss = loss_value;
    rec.lr = learning_rate_at(config, it);
    rec.lambda = std::log1p(std::exp(result.params.get("solver.lambda_raw").item()));
    for (auto& [name, value] : result.params.tensors()) {
      Tensor& v = velocity.at(name);
      const Tensor& g = grads[bound[name]];
      for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = config.momentum * v[i] + scale_factor * g[i];
        value[i] -= rec.lr * v[i];
      }
    }

    const bool last = it + 1 == stop;
    if (it % config.log_every == 0 || last) {
      result.log.push_back(rec);
      if (metrics.is_open()) metrics << rec.to_json().dump() << std::endl;
      if (options.on_log) options.on_log(rec);
    }
    if (!options.out_dir.empty() && ((it + 1) % config.checkpoint_every == 0 || last)) {
      save_checkpoint(options.out_dir / "checkpoint",
                      {result.params, config.to_json(), it + 1});
    }
  }
  return result;
}

Window window_for(std::size_t target, std::size_t n, std::size_t num_frames, std::size_t interval,
                  WindowPlacement placement) {
  if (n == 0 || target >= n) throw std::out_of_range("window_for: target outside the video");
  if (num_frames == 0 || interval == 0) throw std::invalid_argument("window_for: T and interval must be >= 1");
  const std::size_t preferred = placement == WindowPlacement::kCentered   ? (num_frames - 1) / 2
                                : placement == WindowPlacement::kTrailing ? num_frames - 1
                                                                          : 0;
  auto fits = [&](std::size_t p) {
    return target >= p * interval && target + (num_frames - 1 - p) * interval <= n - 1;
  };
  std::vector<std::size_t> order(num_frames);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto da = a > preferred ? a - preferred : preferred - a;
    const auto db = b > preferred ? b - preferred : preferred - b;
    return da < db;
  });
  Window w;
  w.position = preferred;
  for (std::size_t p : order) {
    if (fits(p)) {
      w.position = p;
      break;
    }
  }
  for (std::size_t k = 0; k < num_frames; ++k) {
    const long idx = static_cast<long>(target) +
                     (static_cast<long>(k) - static_cast<long>(w.position)) *
                         static_cast<long>(interval);
    w.frames.push_back(static_cast<std::size_t>(std::clamp(idx, 0L, static_cast<long>(n) - 1)));
  }
  return w;
}

Tensor infer_frame(const ParameterSet& params, const PipelineConfig& config,
                   const VideoSample& sample, std::size_t target,
                   std::vector<aggregation::SolverTrace>* traces) {
  const Window win =
      window_for(target, sample.size(), config.num_frames, config.interval, config.placement);
  std::vector<Tensor> patches;
  std::vector<BoundingBox> boxes;
  CropTransform target_transform;
  for (std::size_t k = 0; k < win.frames.size(); ++k) {
    const std::size_t t = win.frames[k];
    CropResult crop = crop_resample(sample.frames[t], nullptr, sample.boxes[t],
                                    config.crop_scale_infer, config.work_height, config.work_width);
    if (k == win.position) target_transform = crop.transform;
    patches.push_back(std::move(crop.patch));
    boxes.push_back(crop.box);
  }
  Tape tape;
  const BoundParameters bound = BoundParameters::frozen(tape, params);
  const SegmentationResult seg = forward_sequence(
      bound, patches, boxes, {config.sd_iters_infer, config.dims.kernel_size, config.variant});
  if (traces) {
    if (!seg.trace.objectives.empty()) traces->push_back(seg.trace);
    if (!seg.refined_trace.objectives.empty()) traces->push_back(seg.refined_trace);
  }
  Tensor prob = resample_to_image(seg.y_hat[win.position].value(), target_transform);
  for (double& v : prob.data()) v = std::clamp(v, 0.0, 1.0);
  return prob;
}

VideoPrediction infer_video(const ParameterSet& params, const PipelineConfig& config,
                            const VideoSample& sample) {
  config.validate();
  sample.validate();
  VideoPrediction out;
  for (std::size_t t = 0; t < sample.size(); ++t) {
    Tensor prob = infer_frame(params, config, sample, t, &out.traces);
    Tensor mask(prob.shape());
    for (std::size_t i = 0; i < prob.size(); ++i) mask[i] = prob[i] >= 0.5 ? 1.0 : 0.0;
    out.probabilities.push_back(std::move(prob));
    out.masks.push_back(std::move(mask));
  }
  return out;
}

}  // namespace boxmask
