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
#include "boxmask/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace boxmask::synthetic {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double lattice(std::uint64_t seed, long ix, long iy) {
  const std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(ix) * 0x1f1f1f1fULL +
                                                        static_cast<std::uint64_t>(iy)));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Smoothly interpolated lattice noise in [0, 1].
double value_noise(std::uint64_t seed, double x, double y, double spacing) {
  const double gx = x / spacing, gy = y / spacing;
  const double fx = std::floor(gx), fy = std::floor(gy);
  const auto ix = static_cast<long>(fx), iy = static_cast<long>(fy);
  auto smooth = [](double t) { return t * t * (3 - 2 * t); };
  const double ax = smooth(gx - fx), ay = smooth(gy - fy);
  const double top = (1 - ax) * lattice(seed, ix, iy) + ax * lattice(seed, ix + 1, iy);
  const double bottom = (1 - ax) * lattice(seed, ix, iy + 1) + ax * lattice(seed, ix + 1, iy + 1);
  return (1 - ay) * top + ay * bottom;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

ObjectSpec random_object(std::mt19937_64& rng, const SceneOptions& o) {
  ObjectSpec obj;
  obj.shape = static_cast<ShapeKind>(std::uniform_int_distribution<int>(0, 2)(rng));
  obj.radius_x = uniform(rng, o.min_radius, o.max_radius);
  obj.radius_y = uniform(rng, o.min_radius, o.max_radius);
  obj.rotation = uniform(rng, 0, std::numbers::pi);
  if (obj.shape == ShapeKind::kBlob) {
    obj.wobble = 0.25;
    obj.wobble_phase = uniform(rng, 0, 2 * std::numbers::pi);
  }
  for (double& c : obj.color) c = uniform(rng, 0.05, 0.95);
  obj.texture_amplitude = uniform(rng, 0.02, 0.08);
  return obj;
}

}  // namespace

std::array<double, 2> Trajectory::position(double t) const {
  double x = x0 + vx * t;
  double y = y0 + vy * t;
  if (kind == PathKind::kSinusoidal) {
    const double s = amplitude * std::sin(2 * std::numbers::pi * t / period);
    x += s * dir_x;
    y += s * dir_y;
  }
  return {x, y};
}

bool ObjectSpec::covers(double px, double py, double t) const {
  const auto [cx, cy] = path.position(t);
  const double dx = px - cx, dy = py - cy;
  const double c = std::cos(rotation), s = std::sin(rotation);
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  const double nx = lx / radius_x, ny = ly / radius_y;
  switch (shape) {
    case ShapeKind::kEllipse:
      return nx * nx + ny * ny <= 1.0;
    case ShapeKind::kRectangle:
      return std::abs(nx) <= 1.0 && std::abs(ny) <= 1.0;
    case ShapeKind::kBlob: {
      const double r = 1.0 + wobble * std::sin(3 * std::atan2(ly, lx) + wobble_phase);
      return nx * nx + ny * ny <= r * r;
    }
  }
  return false;
}

double ObjectSpec::bounding_radius() const {
  const double r = std::max(radius_x, radius_y);
  switch (shape) {
    case ShapeKind::kRectangle:
      return std::hypot(radius_x, radius_y);
    case ShapeKind::kBlob:
      return r * (1 + wobble);
    default:
      return r;
  }
}

void SceneSpec::validate() const {
  if (height < 4 || width < 4) throw std::invalid_argument("scene must be at least 4x4");
  if (frame_count < 1) throw std::invalid_argument("scene needs at least one frame");
  auto check_object = [](const ObjectSpec& o) {
    if (!(o.radius_x > 0) || !(o.radius_y > 0)) throw std::invalid_argument("object radius must be positive");
    if (o.wobble < 0 || o.wobble >= 0.5) throw std::invalid_argument("blob wobble must be in [0, 0.5)");
    if (!(o.path.period > 0)) throw std::invalid_argument("trajectory period must be positive");
  };
  check_object(target);
  for (const auto& d : distractors) check_object(d);
  const double r = target.bounding_radius();
  for (std::size_t t = 0; t < frame_count; ++t) {
    const auto [cx, cy] = target.path.position(static_cast<double>(t));
    if (cx - r < 1 || cy - r < 1 || cx + r > static_cast<double>(width) - 1 ||
        cy + r > static_cast<double>(height) - 1) {
      throw std::invalid_argument("target leaves the image interior at frame " + std::to_string(t));
    }
  }
}

SceneSpec mirrored(const SceneSpec& spec) {
  SceneSpec out = spec;
  auto mirror = [&](ObjectSpec& o) {
    o.rotation = -o.rotation;
    o.wobble_phase = -o.wobble_phase;
    o.path.x0 = static_cast<double>(spec.width) - o.path.x0;
    o.path.vx = -o.path.vx;
    o.path.dir_x = -o.path.dir_x;
  };
  mirror(out.target);
  for (auto& d : out.distractors) mirror(d);
  return out;
}

Tensor silhouette(const ObjectSpec& object, std::size_t t, std::size_t height, std::size_t width) {
  Tensor out(Shape{height, width, 1});
  const auto [cx, cy] = object.path.position(static_cast<double>(t));
  const double r = object.bounding_radius() + 1;
  const long i0 = std::max(0L, static_cast<long>(std::floor(cy - r)));
  const long i1 = std::min(static_cast<long>(height) - 1, static_cast<long>(std::ceil(cy + r)));
  const long j0 = std::max(0L, static_cast<long>(std::floor(cx - r)));
  const long j1 = std::min(static_cast<long>(width) - 1, static_cast<long>(std::ceil(cx + r)));
  for (long i = i0; i <= i1; ++i) {
    for (long j = j0; j <= j1; ++j) {
      if (object.covers(j + 0.5, i + 0.5, static_cast<double>(t))) out.at(i, j, 0) = 1.0;
    }
  }
  return out;
}

VideoSample generate_sequence(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t h = spec.height, w = spec.width;
  Tensor background(Shape{h, w, 3});
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      for (std::size_t c = 0; c < 3; ++c) {
        const std::uint64_t s = splitmix64(spec.background_seed * 3 + c);
        const double coarse = value_noise(s, j + 0.5, i + 0.5, 16);
        const double fine = value_noise(splitmix64(s), j + 0.5, i + 0.5, 4);
        background.at(i, j, c) = std::clamp(0.15 + 0.7 * coarse + 0.1 * (fine - 0.5), 0.0, 1.0);
      }
    }
  }

  std::vector<const ObjectSpec*> order;
  if (!spec.occlusion) {
    for (const auto& d : spec.distractors) order.push_back(&d);
    order.push_back(&spec.target);
  } else {
    order.push_back(&spec.target);
    for (const auto& d : spec.distractors) order.push_back(&d);
  }

  VideoSample sample;
  for (std::size_t t = 0; t < spec.frame_count; ++t) {
    Tensor frame = background;
    Tensor gt(Shape{h, w, 1});
    for (std::size_t k = 0; k < order.size(); ++k) {
      const ObjectSpec& obj = *order[k];
      const bool is_target = order[k] == &spec.target;
      const std::uint64_t tex_seed = splitmix64(seed + 7919 * (k + 1));
      const auto [cx, cy] = obj.path.position(static_cast<double>(t));
      const Tensor sil = silhouette(obj, t, h, w);
      for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
          if (sil.at(i, j, 0) == 0.0) continue;
          // Texture is anchored to the object so it moves with it.
          const double n = value_noise(tex_seed, j + 0.5 - cx + 64, i + 0.5 - cy + 64, 3);
          for (std::size_t c = 0; c < 3; ++c) {
            frame.at(i, j, c) = std::clamp(obj.color[c] + obj.texture_amplitude * (2 * n - 1), 0.0, 1.0);
          }
          gt.at(i, j, 0) = is_target ? 1.0 : 0.0;
        }
      }
    }
    if (sum(gt) == 0.0) {
      throw std::invalid_argument("target is fully hidden at frame " + std::to_string(t));
    }
    sample.boxes.push_back(box_from_mask(gt));
    sample.frames.push_back(std::move(frame));
    sample.gt_masks.push_back(std::move(gt));
  }
  return sample;
}

std::vector<bool> distractor_box_overlap(const SceneSpec& spec, std::size_t distractor) {
  const ObjectSpec& d = spec.distractors.at(distractor);
  std::vector<bool> out;
  for (std::size_t t = 0; t < spec.frame_count; ++t) {
    const BoundingBox box = box_from_mask(silhouette(spec.target, t, spec.height, spec.width));
    const Tensor sil = silhouette(d, t, spec.height, spec.width);
    bool hit = false;
    for (int i = box.y; i <= box.y_max() && !hit; ++i) {
      for (int j = box.x; j <= box.x_max() && !hit; ++j) hit = sil.at(i, j, 0) != 0.0;
    }
    out.push_back(hit);
  }
  return out;
}

SceneSpec random_scene(std::mt19937_64& rng, const SceneOptions& o) {
  const double n = static_cast<double>(std::max<std::size_t>(o.frame_count, 2) - 1);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    SceneSpec spec;
    spec.height = o.height;
    spec.width = o.width;
    spec.frame_count = o.frame_count;
    spec.background_seed = rng();
    spec.target = random_object(rng, o);

    Trajectory& p = spec.target.path;
    p.kind = std::bernoulli_distribution(0.5)(rng) ? PathKind::kSinusoidal : PathKind::kLinear;
    if (p.kind == PathKind::kSinusoidal) {
      p.amplitude = uniform(rng, 1, 4);
      p.period = uniform(rng, 12, 30);
    }
    const double margin = spec.target.bounding_radius() + 1.5 + p.amplitude;
    if (2 * margin >= std::min(o.width, o.height)) continue;
    const double x0 = uniform(rng, margin, o.width - margin), y0 = uniform(rng, margin, o.height - margin);
    const double x1 = uniform(rng, margin, o.width - margin), y1 = uniform(rng, margin, o.height - margin);
    p.x0 = x0;
    p.y0 = y0;
    p.vx = (x1 - x0) / n;
    p.vy = (y1 - y0) / n;
    const double speed = std::hypot(p.vx, p.vy);
    if (speed > 0) {
      p.dir_x = -p.vy / speed;
      p.dir_y = p.vx / speed;
    }
    try {
      spec.validate();
    } catch (const std::invalid_argument&) {
      continue;
    }
    if (!o.hard_distractors) return spec;

    ObjectSpec d = random_object(rng, o);
    const double crossing = std::floor(uniform(rng, n / 3, 2 * n / 3));
    const auto [tx, ty] = p.position(crossing);
    const double offset_angle = uniform(rng, 0, 2 * std::numbers::pi);
    const double offset = uniform(rng, 0.3, 1.0) * spec.target.bounding_radius();
    const double heading = uniform(rng, 0, 2 * std::numbers::pi);
    const double dspeed = uniform(rng, 1.2, 2.2);
    d.path.kind = PathKind::kLinear;
    d.path.vx = dspeed * std::cos(heading);
    d.path.vy = dspeed * std::sin(heading);
    d.path.x0 = tx + offset * std::cos(offset_angle) - d.path.vx * crossing;
    d.path.y0 = ty + offset * std::sin(offset_angle) - d.path.vy * crossing;
    spec.distractors.push_back(d);
    const auto overlap = distractor_box_overlap(spec, 0);
    const bool some_in = std::find(overlap.begin(), overlap.end(), true) != overlap.end();
    const bool some_out = std::find(overlap.begin(), overlap.end(), false) != overlap.end();
    if (some_in && some_out) return spec;
  }
  throw std::runtime_error("random_scene: could not place the objects; image too small");
}

std::vector<VideoSample> generate_dataset(std::size_t count, const SceneOptions& options,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<VideoSample> out;
  for (std::size_t k = 0; k < count; ++k) {
    const SceneSpec spec = random_scene(rng, options);
    VideoSample s = generate_sequence(spec, rng());
    char id[32];
    std::snprintf(id, sizeof(id), "seq%04zu", k);
    s.id = id;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace boxmask::synthetic
