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
#include <string>
#include <vector>

#include "boxmask/geometry.hpp"
#include "boxmask/tensor.hpp"

namespace boxmask {

/// One box-annotated video: H x W x 3 frames in [0, 1], one box per frame and
/// optionally a binary H x W x 1 ground-truth mask per frame.
struct VideoSample {
  std::string id;
  std::vector<Tensor> frames;
  std::vector<BoundingBox> boxes;
  std::vector<Tensor> gt_masks;  // empty when unannotated

  std::size_t size() const { return frames.size(); }
  bool has_masks() const { return !gt_masks.empty(); }
  std::size_t height() const { return frames.at(0).dim(0); }
  std::size_t width() const { return frames.at(0).dim(1); }

  /// Throws std::invalid_argument when the invariants do not hold: equal
  /// list lengths, consistent frame sizes, valid boxes, binary masks.
  void validate() const;
};

/// Mirrors every frame, box and mask.
VideoSample flip_horizontal(const VideoSample& sample);

// PNG files: 8-bit RGB for frames, 8-bit gray for masks (0 / 255).
void write_png(const std::filesystem::path& path, const Tensor& image);
Tensor read_png(const std::filesystem::path& path, std::size_t channels);

/// Layout: <dir>/frames/%05d.png, <dir>/masks/%05d.png (optional),
/// <dir>/boxes.jsonl with records {"frame": i, "box": [x, y, w, h]}.
void save_sample(const std::filesystem::path& dir, const VideoSample& sample);
VideoSample load_sample(const std::filesystem::path& dir);

/// Every subdirectory of `root` holding a frames/ directory, ordered by name.
std::vector<VideoSample> load_dataset(const std::filesystem::path& root);
void save_dataset(const std::filesystem::path& root, const std::vector<VideoSample>& samples);

std::string frame_file_name(std::size_t index);

}  // namespace boxmask
