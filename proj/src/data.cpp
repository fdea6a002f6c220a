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
#include "boxmask/data.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace boxmask {
namespace fs = std::filesystem;

void VideoSample::validate() const {
  if (frames.empty()) throw std::invalid_argument("sample '" + id + "' has no frames");
  if (boxes.size() != frames.size()) {
    throw std::invalid_argument("sample '" + id + "': " + std::to_string(boxes.size()) +
                                " boxes for " + std::to_string(frames.size()) + " frames");
  }
  if (!gt_masks.empty() && gt_masks.size() != frames.size()) {
    throw std::invalid_argument("sample '" + id + "': mask count differs from frame count");
  }
  const Shape frame_shape = frames.front().shape();
  if (frame_shape.size() != 3 || frame_shape[2] != 3) {
    throw std::invalid_argument("sample '" + id + "': frames must be H x W x 3");
  }
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].shape() != frame_shape) {
      throw std::invalid_argument("sample '" + id + "': frame " + std::to_string(t) +
                                  " has a different size");
    }
    validate_box(boxes[t], frame_shape[0], frame_shape[1]);
    if (!gt_masks.empty()) {
      const Tensor& m = gt_masks[t];
      if (m.shape() != Shape{frame_shape[0], frame_shape[1], 1}) {
        throw std::invalid_argument("sample '" + id + "': mask " + std::to_string(t) +
                                    " does not match its frame");
      }
      for (double v : m.data()) {
        if (v != 0.0 && v != 1.0) {
          throw std::invalid_argument("sample '" + id + "': mask " + std::to_string(t) +
                                      " is not binary");
        }
      }
    }
  }
}

VideoSample flip_horizontal(const VideoSample& sample) {
  VideoSample out;
  out.id = sample.id;
  const std::size_t w = sample.width();
  for (const Tensor& f : sample.frames) out.frames.push_back(flip_horizontal(f));
  for (const BoundingBox& b : sample.boxes) out.boxes.push_back(flip_horizontal(b, w));
  for (const Tensor& m : sample.gt_masks) out.gt_masks.push_back(flip_horizontal(m));
  return out;
}

std::string frame_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05zu.png", index);
  return buf;
}

void write_png(const fs::path& path, const Tensor& image) {
  if (image.rank() != 3 || (image.dim(2) != 1 && image.dim(2) != 3)) {
    throw ShapeError("write_png: expected H x W x 1 or H x W x 3, got " +
                     to_string(image.shape()));
  }
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.dim(1));
  png.height = static_cast<png_uint_32>(image.dim(0));
  png.format = image.dim(2) == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> bytes(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    bytes[i] = static_cast<png_byte>(std::lround(std::clamp(image[i], 0.0, 1.0) * 255.0));
  }
  if (!png_image_write_to_file(&png, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw std::runtime_error("cannot write " + path.string() + ": " + png.message);
  }
}

Tensor read_png(const fs::path& path, std::size_t channels) {
  if (channels != 1 && channels != 3) throw std::invalid_argument("read_png: channels must be 1 or 3");
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw std::runtime_error("cannot read " + path.string() + ": " + png.message);
  }
  png.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> bytes(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, bytes.data(), 0, nullptr)) {
    throw std::runtime_error("cannot decode " + path.string() + ": " + png.message);
  }
  Tensor out(Shape{png.height, png.width, channels});
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = bytes[i] / 255.0;
  return out;
}

void save_sample(const fs::path& dir, const VideoSample& sample) {
  sample.validate();
  fs::create_directories(dir / "frames");
  if (sample.has_masks()) fs::create_directories(dir / "masks");
  std::ofstream boxes(dir / "boxes.jsonl");
  if (!boxes) throw std::runtime_error("cannot write " + (dir / "boxes.jsonl").string());
  for (std::size_t t = 0; t < sample.size(); ++t) {
    write_png(dir / "frames" / frame_file_name(t), sample.frames[t]);
    if (sample.has_masks()) write_png(dir / "masks" / frame_file_name(t), sample.gt_masks[t]);
    boxes << nlohmann::json{{"frame", t}, {"box", sample.boxes[t].as_array()}}.dump() << '\n';
  }
}

VideoSample load_sample(const fs::path& dir) {
  VideoSample sample;
  sample.id = dir.filename().string();
  std::vector<fs::path> frame_files;
  for (const auto& entry : fs::directory_iterator(dir / "frames")) {
    if (entry.path().extension() == ".png") frame_files.push_back(entry.path());
  }
  std::sort(frame_files.begin(), frame_files.end());
  if (frame_files.empty()) throw std::runtime_error(dir.string() + ": no frames");
  for (std::size_t t = 0; t < frame_files.size(); ++t) {
    if (frame_files[t].filename() != frame_file_name(t)) {
      throw std::runtime_error(dir.string() + ": frame files must be numbered 00000.png upward");
    }
    sample.frames.push_back(read_png(frame_files[t], 3));
  }
  if (fs::is_directory(dir / "masks")) {
    for (std::size_t t = 0; t < frame_files.size(); ++t) {
      Tensor m = read_png(dir / "masks" / frame_file_name(t), 1);
      for (double& v : m.data()) v = v >= 0.5 ? 1.0 : 0.0;
      sample.gt_masks.push_back(std::move(m));
    }
  }

  std::ifstream in(dir / "boxes.jsonl");
  if (!in) throw std::runtime_error(dir.string() + ": missing boxes.jsonl");
  sample.boxes.assign(frame_files.size(), BoundingBox{});
  std::vector<bool> seen(frame_files.size(), false);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto record = nlohmann::json::parse(line);
    const auto frame = record.at("frame").get<std::size_t>();
    const auto box = record.at("box").get<std::array<int, 4>>();
    if (frame >= seen.size()) {
      throw std::runtime_error(dir.string() + ": box for nonexistent frame " +
                               std::to_string(frame));
    }
    sample.boxes[frame] = {box[0], box[1], box[2], box[3]};
    seen[frame] = true;
  }
  const auto missing = std::find(seen.begin(), seen.end(), false);
  if (missing != seen.end()) {
    throw std::runtime_error(dir.string() + ": no box for frame " +
                             std::to_string(missing - seen.begin()));
  }
  sample.validate();
  return sample;
}

std::vector<VideoSample> load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw std::runtime_error("dataset directory not found: " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::is_directory(entry.path() / "frames")) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<VideoSample> out;
  for (const auto& d : dirs) out.push_back(load_sample(d));
  if (out.empty()) throw std::runtime_error("no sequences under " + root.string());
  return out;
}

void save_dataset(const fs::path& root, const std::vector<VideoSample>& samples) {
  for (const auto& s : samples) save_sample(root / s.id, s);
}

}  // namespace boxmask
