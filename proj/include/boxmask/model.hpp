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

#include <nlohmann/json.hpp>

#include "boxmask/geometry.hpp"
#include "boxmask/params.hpp"

// Backbone F, object encoder B, refinement encoder B^ and decoder D.
namespace boxmask {

struct ModelDims {
  std::size_t feature_dim = 32;  // D
  std::size_t hidden = 32;
  std::size_t mask_width = 16;   // mask-stem channels
  std::size_t embed_dim = 4;     // C
  std::size_t kernel_size = 3;   // K of the aggregation filter
  std::size_t backbone1 = 8;     // stride-1 tap channels
  std::size_t backbone2 = 16;    // stride-2 tap channels
  std::size_t decoder1 = 16;     // stride-2 refine width
  std::size_t decoder2 = 8;      // stride-1 refine width

  void validate() const;
  nlohmann::json to_json() const;
  static ModelDims from_json(const nlohmann::json& j);
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Every tensor of the model, He-initialised (biases zero), plus the
/// aggregation regulariser `solver.lambda_raw` set so that lambda = 0.05.
ParameterSet init_parameters(const ModelDims& dims, std::uint64_t seed);

/// Feature taps at strides 1, 2 and 4; `x` is the stride-4 output.
struct Pyramid {
  Var stride1;
  Var stride2;
  Var x;
};

/// Input size must be divisible by 4.
Pyramid backbone(const BoundParameters& p, const Var& image);

struct EncoderOutput {
  Var e;
  Var w;
  Var m;
};

/// `box_raster` is the image-resolution box mask; it is reduced to the
/// feature grid by average pooling and the mask stem.
EncoderOutput encode(const BoundParameters& p, const Var& x, const Var& box_raster);

struct RefinedEncoding {
  Var e;
  Var w;
};

/// `y` holds image-resolution mask probabilities; values outside [0, 1] by
/// more than 1e-6 are rejected.
RefinedEncoding encode_refined(const BoundParameters& p, const Var& y);

/// Mask logits at image resolution.
Var decode(const BoundParameters& p, const Var& s, const Var& m, const Pyramid& pyramid);

}  // namespace boxmask
