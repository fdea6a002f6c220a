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

#include <array>
#include <cstddef>
#include <optional>
#include <string>

#include "boxmask/tensor.hpp"

namespace boxmask {

/// Axis-aligned box in pixel units; x is the column, y the row. The box
/// covers columns x .. x + width - 1 and rows y .. y + height - 1.
struct BoundingBox {
  int x = 0;
  int y = 0;
  int width = 1;
  int height = 1;

  int x_max() const { return x + width - 1; }
  int y_max() const { return y + height - 1; }
  bool intersects(std::size_t image_h, std::size_t image_w) const;
  bool contains(int col, int row) const {
    return col >= x && col <= x_max() && row >= y && row <= y_max();
  }
  std::array<int, 4> as_array() const { return {x, y, width, height}; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

std::string to_string(const BoundingBox& b);

/// Throws std::invalid_argument for non-positive extents or a box that
/// misses the image entirely.
void validate_box(const BoundingBox& b, std::size_t image_h, std::size_t image_w);

/// image_h x image_w x 1 raster, 1 inside the box (clipped to the image).
Tensor rasterize_box(const BoundingBox& b, std::size_t image_h, std::size_t image_w);

/// Tight box around the nonzero pixels of an H x W x 1 mask.
BoundingBox box_from_mask(const Tensor& mask);

/// Mirror left-right.
Tensor flip_horizontal(const Tensor& image);
BoundingBox flip_horizontal(const BoundingBox& b, std::size_t image_w);

/// Maps image coordinates into a patch: the crop region
/// [x0, x1) x [y0, y1) is scaled by `scale` and anchored at the patch origin;
/// the rest of the patch is zero padding. Coordinates are continuous, with
/// pixel (i, j) covering [j, j + 1) x [i, i + 1).
struct CropTransform {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double scale = 1;
  std::size_t out_h = 0, out_w = 0;
  std::size_t image_h = 0, image_w = 0;

  double to_patch_x(double x) const { return (x - x0) * scale; }
  double to_patch_y(double y) const { return (y - y0) * scale; }
  double to_image_x(double u) const { return x0 + u / scale; }
  double to_image_y(double v) const { return y0 + v / scale; }

  BoundingBox box_to_patch(const BoundingBox& b) const;
  BoundingBox box_to_image(const BoundingBox& b) const;
};

struct CropResult {
  Tensor patch;
  BoundingBox box;
  std::optional<Tensor> mask;  // binary, thresholded after resampling
  CropTransform transform;
};

/// Crop of `scale` times the box extent centred on the box, clipped to the
/// image, resized bilinearly with preserved aspect ratio into an
/// out_h x out_w patch and zero padded at the bottom and right.
CropResult crop_resample(const Tensor& frame, const Tensor* mask, const BoundingBox& box,
                         double scale, std::size_t out_h, std::size_t out_w);

/// Samples an out_h x out_w x 1 patch map back onto the image grid; pixels
/// outside the crop region get `fill`.
Tensor resample_to_image(const Tensor& patch_map, const CropTransform& transform,
                         double fill = 0.0);

}  // namespace boxmask
