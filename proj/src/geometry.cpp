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
#include "boxmask/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace boxmask {
namespace {

// Bilinear sample of channel c at continuous image coordinates (x, y),
// clamped to the edge pixels.
double sample_bilinear(const Tensor& img, std::size_t c, double x, double y) {
  const auto h = static_cast<long>(img.dim(0));
  const auto w = static_cast<long>(img.dim(1));
  const double fx = x - 0.5;
  const double fy = y - 0.5;
  const double jf = std::floor(fx);
  const double if_ = std::floor(fy);
  const double ax = fx - jf;
  const double ay = fy - if_;
  auto clamp = [](long v, long hi) { return std::clamp(v, 0L, hi - 1); };
  const long j0 = clamp(static_cast<long>(jf), w), j1 = clamp(static_cast<long>(jf) + 1, w);
  const long i0 = clamp(static_cast<long>(if_), h), i1 = clamp(static_cast<long>(if_) + 1, h);
  auto v = [&](long i, long j) {
    return img.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j), c);
  };
  return (1 - ay) * ((1 - ax) * v(i0, j0) + ax * v(i0, j1)) +
         ay * ((1 - ax) * v(i1, j0) + ax * v(i1, j1));
}

BoundingBox box_from_edges(double left, double top, double right, double bottom, double max_w,
                           double max_h) {
  left = std::clamp(left, 0.0, max_w);
  right = std::clamp(right, 0.0, max_w);
  top = std::clamp(top, 0.0, max_h);
  bottom = std::clamp(bottom, 0.0, max_h);
  BoundingBox b;
  b.x = static_cast<int>(std::lround(left));
  b.y = static_cast<int>(std::lround(top));
  b.width = std::max(1, static_cast<int>(std::lround(right)) - b.x);
  b.height = std::max(1, static_cast<int>(std::lround(bottom)) - b.y);
  b.x = std::min(b.x, static_cast<int>(max_w) - 1);
  b.y = std::min(b.y, static_cast<int>(max_h) - 1);
  return b;
}

void require_image(const Tensor& t, const char* what) {
  if (t.rank() != 3 || t.dim(0) == 0 || t.dim(1) == 0) {
    throw ShapeError(std::string(what) + ": expected an H x W x C image, got " +
                     to_string(t.shape()));
  }
}

}  // namespace

bool BoundingBox::intersects(std::size_t image_h, std::size_t image_w) const {
  return x_max() >= 0 && y_max() >= 0 && x < static_cast<int>(image_w) &&
         y < static_cast<int>(image_h);
}

std::string to_string(const BoundingBox& b) {
  return "[" + std::to_string(b.x) + ", " + std::to_string(b.y) + ", " +
         std::to_string(b.width) + ", " + std::to_string(b.height) + "]";
}

void validate_box(const BoundingBox& b, std::size_t image_h, std::size_t image_w) {
  if (b.width < 1 || b.height < 1) throw std::invalid_argument("degenerate box " + to_string(b));
  if (!b.intersects(image_h, image_w)) {
    throw std::invalid_argument("box " + to_string(b) + " lies outside the " +
                                std::to_string(image_h) + "x" + std::to_string(image_w) +
                                " image");
  }
}

Tensor rasterize_box(const BoundingBox& b, std::size_t image_h, std::size_t image_w) {
  validate_box(b, image_h, image_w);
  Tensor out(Shape{image_h, image_w, 1});
  const int r0 = std::max(b.y, 0), r1 = std::min(b.y_max(), static_cast<int>(image_h) - 1);
  const int c0 = std::max(b.x, 0), c1 = std::min(b.x_max(), static_cast<int>(image_w) - 1);
  for (int i = r0; i <= r1; ++i) {
    for (int j = c0; j <= c1; ++j) out.at(i, j, 0) = 1.0;
  }
  return out;
}

BoundingBox box_from_mask(const Tensor& mask) {
  require_image(mask, "box_from_mask");
  int r0 = -1, r1 = -1, c0 = -1, c1 = -1;
  for (std::size_t i = 0; i < mask.dim(0); ++i) {
    for (std::size_t j = 0; j < mask.dim(1); ++j) {
      if (mask.at(i, j, 0) == 0.0) continue;
      const int r = static_cast<int>(i), c = static_cast<int>(j);
      if (r0 < 0) r0 = r;
      r1 = r;
      c0 = c0 < 0 ? c : std::min(c0, c);
      c1 = std::max(c1, c);
    }
  }
  if (r0 < 0) throw std::invalid_argument("box_from_mask: mask has no foreground pixel");
  return {c0, r0, c1 - c0 + 1, r1 - r0 + 1};
}

Tensor flip_horizontal(const Tensor& image) {
  require_image(image, "flip_horizontal");
  Tensor out(image.shape());
  const std::size_t w = image.dim(1);
  for (std::size_t i = 0; i < image.dim(0); ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      for (std::size_t c = 0; c < image.dim(2); ++c) out.at(i, w - 1 - j, c) = image.at(i, j, c);
    }
  }
  return out;
}

BoundingBox flip_horizontal(const BoundingBox& b, std::size_t image_w) {
  return {static_cast<int>(image_w) - b.x - b.width, b.y, b.width, b.height};
}

BoundingBox CropTransform::box_to_patch(const BoundingBox& b) const {
  return box_from_edges(to_patch_x(b.x), to_patch_y(b.y), to_patch_x(b.x + b.width),
                        to_patch_y(b.y + b.height), static_cast<double>(out_w),
                        static_cast<double>(out_h));
}

BoundingBox CropTransform::box_to_image(const BoundingBox& b) const {
  return box_from_edges(to_image_x(b.x), to_image_y(b.y), to_image_x(b.x + b.width),
                        to_image_y(b.y + b.height), static_cast<double>(image_w),
                        static_cast<double>(image_h));
}

CropResult crop_resample(const Tensor& frame, const Tensor* mask, const BoundingBox& box,
                         double scale, std::size_t out_h, std::size_t out_w) {
  require_image(frame, "crop_resample");
  if (!(scale >= 1.0)) throw std::invalid_argument("crop_resample: scale must be >= 1");
  if (out_h == 0 || out_w == 0) throw std::invalid_argument("crop_resample: empty output size");
  const std::size_t h = frame.dim(0), w = frame.dim(1);
  validate_box(box, h, w);
  if (mask && (mask->rank() != 3 || mask->dim(0) != h || mask->dim(1) != w)) {
    throw ShapeError("crop_resample: mask " + to_string(mask->shape()) + " does not match frame " +
                     to_string(frame.shape()));
  }

  CropTransform tf;
  tf.out_h = out_h;
  tf.out_w = out_w;
  tf.image_h = h;
  tf.image_w = w;
  const double cx = box.x + 0.5 * box.width;
  const double cy = box.y + 0.5 * box.height;
  tf.x0 = std::max(0.0, cx - 0.5 * scale * box.width);
  tf.x1 = std::min(static_cast<double>(w), cx + 0.5 * scale * box.width);
  tf.y0 = std::max(0.0, cy - 0.5 * scale * box.height);
  tf.y1 = std::min(static_cast<double>(h), cy + 0.5 * scale * box.height);
  tf.scale = std::min(static_cast<double>(out_w) / (tf.x1 - tf.x0),
                      static_cast<double>(out_h) / (tf.y1 - tf.y0));
  const double used_w = (tf.x1 - tf.x0) * tf.scale;
  const double used_h = (tf.y1 - tf.y0) * tf.scale;

  auto resample = [&](const Tensor& src) {
    Tensor out(Shape{out_h, out_w, src.dim(2)});
    for (std::size_t i = 0; i < out_h; ++i) {
      const double v = i + 0.5;
      if (v >= used_h) break;
      for (std::size_t j = 0; j < out_w; ++j) {
        const double u = j + 0.5;
        if (u >= used_w) break;
        for (std::size_t c = 0; c < src.dim(2); ++c) {
          out.at(i, j, c) = sample_bilinear(src, c, tf.to_image_x(u), tf.to_image_y(v));
        }
      }
    }
    return out;
  };

  CropResult result;
  result.patch = resample(frame);
  result.transform = tf;
  result.box = tf.box_to_patch(box);
  if (mask) {
    Tensor m = resample(*mask);
    for (double& v : m.data()) v = v >= 0.5 ? 1.0 : 0.0;
    result.mask = std::move(m);
  }
  return result;
}

Tensor resample_to_image(const Tensor& patch_map, const CropTransform& tf, double fill) {
  if (patch_map.rank() != 3 || patch_map.dim(0) != tf.out_h || patch_map.dim(1) != tf.out_w) {
    throw ShapeError("resample_to_image: map " + to_string(patch_map.shape()) +
                     " does not match the crop output size");
  }
  const std::size_t channels = patch_map.dim(2);
  Tensor out(Shape{tf.image_h, tf.image_w, channels}, fill);
  for (std::size_t i = 0; i < tf.image_h; ++i) {
    const double y = i + 0.5;
    if (y < tf.y0 || y >= tf.y1) continue;
    for (std::size_t j = 0; j < tf.image_w; ++j) {
      const double x = j + 0.5;
      if (x < tf.x0 || x >= tf.x1) continue;
      for (std::size_t c = 0; c < channels; ++c) {
        out.at(i, j, c) = sample_bilinear(patch_map, c, tf.to_patch_x(x), tf.to_patch_y(y));
      }
    }
  }
  return out;
}

}  // namespace boxmask
