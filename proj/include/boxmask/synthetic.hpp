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
#include <cstdint>
#include <random>
#include <vector>

#include "boxmask/data.hpp"

// Procedural box-annotated videos: a textured target moving over a
// value-noise background, optionally with distractors that share the
// target's appearance distribution.
namespace boxmask::synthetic {

enum class ShapeKind { kEllipse, kRectangle, kBlob };
enum class PathKind { kLinear, kSinusoidal };

struct Trajectory {
  PathKind kind = PathKind::kLinear;
  double x0 = 0, y0 = 0;  // centre at frame 0 (continuous pixel coordinates)
  double vx = 0, vy = 0;  // px / frame
  // Sinusoidal paths add amplitude * sin(2 pi t / period) along (dir_x, dir_y).
  double amplitude = 0;
  double period = 16;
  double dir_x = 0, dir_y = 1;

  std::array<double, 2> position(double t) const;
};

struct ObjectSpec {
  ShapeKind shape = ShapeKind::kEllipse;
  double radius_x = 6, radius_y = 6;
  double rotation = 0;     // radians
  double wobble = 0;       // blob radius modulation, in [0, 0.5)
  double wobble_phase = 0;
  std::array<double, 3> color{0.8, 0.2, 0.2};
  double texture_amplitude = 0.05;
  Trajectory path;

  /// Whether the continuous point (px, py) lies inside the silhouette at frame t.
  bool covers(double px, double py, double t) const;
  /// Radius of a disc that always contains the silhouette.
  double bounding_radius() const;
};

struct SceneSpec {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t frame_count = 48;
  ObjectSpec target;
  std::vector<ObjectSpec> distractors;
  std::uint64_t background_seed = 0;
  bool occlusion = false;  // distractors drawn over the target instead of under it

  /// Throws std::invalid_argument when the target leaves the one-pixel safety
  /// margin in any frame, or the sizes are degenerate.
  void validate() const;
};

/// Left-right mirror of a scene.
SceneSpec mirrored(const SceneSpec& spec);

/// Renders the scene. `seed` drives the object textures; the output is a
/// pure function of (spec, seed).
VideoSample generate_sequence(const SceneSpec& spec, std::uint64_t seed);

/// Silhouette of one object at frame t on the pixel grid (H x W x 1, binary).
Tensor silhouette(const ObjectSpec& object, std::size_t t, std::size_t height, std::size_t width);

struct SceneOptions {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t frame_count = 48;
  bool hard_distractors = false;
  double min_radius = 5;
  double max_radius = 9;
};

/// Random scene. With hard_distractors, one distractor drawn from the
/// target's shape and colour distribution crosses the target's box: it
/// overlaps the box in some frames and is clear of it in others.
SceneSpec random_scene(std::mt19937_64& rng, const SceneOptions& options);

/// Frames in which the distractor's silhouette meets the target's box.
std::vector<bool> distractor_box_overlap(const SceneSpec& spec, std::size_t distractor);

std::vector<VideoSample> generate_dataset(std::size_t count, const SceneOptions& options,
                                          std::uint64_t seed);

}  // namespace boxmask::synthetic
