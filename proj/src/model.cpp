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
#include "boxmask/model.hpp"

#include <stdexcept>

#include "boxmask/solver.hpp"

namespace boxmask {
namespace {

void declare_mask_stem(ParameterSet& ps, const std::string& name, const ModelDims& d,
                       std::mt19937_64& rng) {
  declare_conv(ps, name + ".stem", 3, 1, d.mask_width, rng);
  declare_residual(ps, name + ".block1", d.mask_width, d.mask_width, rng);
  declare_residual(ps, name + ".block2", d.mask_width, d.mask_width, rng);
}

// avg-pool 2, conv + relu, max-pool 2, two residual blocks: stride 4 overall.
Var mask_stem(const BoundParameters& p, const std::string& name, const Var& mask) {
  const Shape& s = mask.shape();
  if (s.size() != 3 || s[2] != 1 || s[0] % 4 != 0 || s[1] % 4 != 0) {
    throw ShapeError(name + ": mask input must be H x W x 1 with H, W divisible by 4, got " +
                     to_string(s));
  }
  Var h = max_pool2(relu(conv_layer(p, name + ".stem", avg_pool(mask, 2))));
  h = residual_block(p, name + ".block1", h);
  return residual_block(p, name + ".block2", h);
}

void declare_head(ParameterSet& ps, const std::string& name, const ModelDims& d,
                  std::mt19937_64& rng) {
  declare_conv(ps, name + ".conv1", 3, d.hidden, d.hidden, rng);
  declare_conv(ps, name + ".conv2", 3, d.hidden, d.embed_dim, rng);
}

Var head(const BoundParameters& p, const std::string& name, const Var& h) {
  return conv_layer(p, name + ".conv2", relu(conv_layer(p, name + ".conv1", h)));
}

Var fuse_with_features(const BoundParameters& p, const std::string& name, const Var& stem,
                       const Var& x) {
  if (stem.shape()[0] != x.shape()[0] || stem.shape()[1] != x.shape()[1]) {
    throw ShapeError(name + ": pooled box raster " + to_string(stem.shape()) +
                     " does not match features " + to_string(x.shape()));
  }
  return residual_block(p, name + ".fuse", concat_channels({x, stem}));
}

}  // namespace

void ModelDims::validate() const {
  if (kernel_size % 2 == 0) throw std::invalid_argument("kernel_size must be odd");
  if (embed_dim < 1 || embed_dim > 16) throw std::invalid_argument("embed_dim must be in [1, 16]");
  for (std::size_t v : {feature_dim, hidden, mask_width, backbone1, backbone2, decoder1, decoder2}) {
    if (v == 0) throw std::invalid_argument("layer widths must be positive");
  }
}

nlohmann::json ModelDims::to_json() const {
  return {{"feature_dim", feature_dim}, {"hidden", hidden},       {"mask_width", mask_width},
          {"embed_dim", embed_dim},     {"kernel_size", kernel_size}, {"backbone1", backbone1},
          {"backbone2", backbone2},     {"decoder1", decoder1},   {"decoder2", decoder2}};
}

ModelDims ModelDims::from_json(const nlohmann::json& j) {
  ModelDims d;
  d.feature_dim = j.at("feature_dim");
  d.hidden = j.at("hidden");
  d.mask_width = j.at("mask_width");
  d.embed_dim = j.at("embed_dim");
  d.kernel_size = j.at("kernel_size");
  d.backbone1 = j.at("backbone1");
  d.backbone2 = j.at("backbone2");
  d.decoder1 = j.at("decoder1");
  d.decoder2 = j.at("decoder2");
  d.validate();
  return d;
}

ParameterSet init_parameters(const ModelDims& d, std::uint64_t seed) {
  d.validate();
  std::mt19937_64 rng(seed);
  ParameterSet ps;
  declare_conv(ps, "backbone.conv1", 3, 3, d.backbone1, rng);
  declare_conv(ps, "backbone.conv2", 3, d.backbone1, d.backbone2, rng);
  declare_conv(ps, "backbone.conv3", 3, d.backbone2, d.feature_dim, rng);

  declare_mask_stem(ps, "encoder", d, rng);
  declare_residual(ps, "encoder.fuse", d.feature_dim + d.mask_width, d.hidden, rng);
  declare_head(ps, "encoder.e_head", d, rng);
  declare_head(ps, "encoder.w_head", d, rng);

  declare_mask_stem(ps, "single_frame", d, rng);
  declare_residual(ps, "single_frame.fuse", d.feature_dim + d.mask_width, d.hidden, rng);
  declare_conv(ps, "single_frame.m_head", 3, d.hidden, d.embed_dim, rng);

  declare_mask_stem(ps, "refine", d, rng);
  declare_residual(ps, "refine.lift", d.mask_width, d.hidden, rng);
  declare_head(ps, "refine.e_head", d, rng);
  declare_head(ps, "refine.w_head", d, rng);

  declare_conv(ps, "decoder.fuse", 3, 2 * d.embed_dim, d.decoder1, rng);
  declare_conv(ps, "decoder.up1.conv1", 3, d.decoder1 + d.backbone2, d.decoder1, rng);
  declare_conv(ps, "decoder.up1.conv2", 3, d.decoder1, d.decoder1, rng);
  declare_conv(ps, "decoder.up2.conv1", 3, d.decoder1 + d.backbone1, d.decoder2, rng);
  declare_conv(ps, "decoder.up2.conv2", 3, d.decoder2, d.decoder2, rng);
  declare_conv(ps, "decoder.out", 3, d.decoder2, 1, rng);

  ps.add("solver.lambda_raw",
         Tensor::scalar(aggregation::lambda_raw_for(aggregation::kInitialLambda)));
  return ps;
}

Pyramid backbone(const BoundParameters& p, const Var& image) {
  const Shape& s = image.shape();
  if (s.size() != 3 || s[2] != 3 || s[0] % 4 != 0 || s[1] % 4 != 0) {
    throw ShapeError("backbone: image must be H x W x 3 with H, W divisible by 4, got " +
                     to_string(s));
  }
  Pyramid out;
  out.stride1 = relu(conv_layer(p, "backbone.conv1", image));
  out.stride2 = relu(conv_layer(p, "backbone.conv2", max_pool2(out.stride1)));
  out.x = relu(conv_layer(p, "backbone.conv3", max_pool2(out.stride2)));
  return out;
}

EncoderOutput encode(const BoundParameters& p, const Var& x, const Var& box_raster) {
  EncoderOutput out;
  const Var h = fuse_with_features(p, "encoder", mask_stem(p, "encoder", box_raster), x);
  out.e = head(p, "encoder.e_head", h);
  out.w = head(p, "encoder.w_head", h);
  const Var hm =
      fuse_with_features(p, "single_frame", mask_stem(p, "single_frame", box_raster), x);
  out.m = relu(conv_layer(p, "single_frame.m_head", hm));
  return out;
}

RefinedEncoding encode_refined(const BoundParameters& p, const Var& y) {
  for (double v : y.value().data()) {
    if (!(v >= -1e-6 && v <= 1 + 1e-6)) {
      throw std::invalid_argument("encode_refined: mask probability " + std::to_string(v) +
                                  " outside [0, 1]");
    }
  }
  const Var h = residual_block(p, "refine.lift", mask_stem(p, "refine", y));
  return {head(p, "refine.e_head", h), head(p, "refine.w_head", h)};
}

Var decode(const BoundParameters& p, const Var& s, const Var& m, const Pyramid& pyr) {
  const Shape& xs = pyr.x.shape();
  if (s.shape() != m.shape() || s.shape()[0] != xs[0] || s.shape()[1] != xs[1]) {
    throw ShapeError("decode: s " + to_string(s.shape()) + " and m " + to_string(m.shape()) +
                     " must match the coarsest pyramid level " + to_string(xs));
  }
  Var h = relu(conv_layer(p, "decoder.fuse", concat_channels({s, m})));
  h = concat_channels({upsample2(h), pyr.stride2});
  h = relu(conv_layer(p, "decoder.up1.conv2", relu(conv_layer(p, "decoder.up1.conv1", h))));
  h = concat_channels({upsample2(h), pyr.stride1});
  h = relu(conv_layer(p, "decoder.up2.conv2", relu(conv_layer(p, "decoder.up2.conv1", h))));
  return conv_layer(p, "decoder.out", h);
}

}  // namespace boxmask
