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
#include "boxmask/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

namespace boxmask {
namespace fs = std::filesystem;

namespace {
constexpr const char* kFormat = "boxmask-checkpoint";
constexpr int kVersion = 1;
}  // namespace

void save_checkpoint(const fs::path& dir, const Checkpoint& ck) {
  const fs::path target = fs::absolute(dir).lexically_normal();
  const fs::path parent = target.parent_path();
  fs::create_directories(parent);
  const fs::path tmp = parent / (target.filename().string() + ".tmp");
  const fs::path old = parent / (target.filename().string() + ".old");
  fs::remove_all(tmp);
  fs::create_directories(tmp / "tensors");

  nlohmann::json manifest{{"format", kFormat},
                          {"version", kVersion},
                          {"iteration", ck.iteration},
                          {"config", ck.config},
                          {"tensors", nlohmann::json::array()}};
  std::size_t index = 0;
  for (const auto& [name, tensor] : ck.params.tensors()) {
    const std::string file = "tensors/" + std::to_string(index++) + ".bin";
    std::ofstream out(tmp / file, std::ios::binary);
    write_tensor(out, tensor);
    out.close();
    if (!out) throw std::runtime_error("cannot write " + (tmp / file).string());
    manifest["tensors"].push_back({{"name", name}, {"file", file}, {"shape", tensor.shape()}});
  }
  {
    std::ofstream out(tmp / "manifest.json");
    out << manifest.dump(2) << '\n';
    out.close();
    if (!out) throw std::runtime_error("cannot write manifest in " + tmp.string());
  }

  fs::remove_all(old);
  if (fs::exists(target)) fs::rename(target, old);
  fs::rename(tmp, target);
  fs::remove_all(old);
}

Checkpoint load_checkpoint(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("no checkpoint manifest in " + dir.string());
  const auto manifest = nlohmann::json::parse(in);
  if (manifest.value("format", "") != kFormat || manifest.value("version", 0) != kVersion) {
    throw std::runtime_error(dir.string() + " is not a supported checkpoint");
  }
  Checkpoint ck;
  ck.iteration = manifest.at("iteration");
  ck.config = manifest.at("config");
  for (const auto& entry : manifest.at("tensors")) {
    const std::string name = entry.at("name");
    std::ifstream tin(dir / entry.at("file").get<std::string>(), std::ios::binary);
    if (!tin) throw std::runtime_error("missing tensor file for '" + name + "'");
    Tensor t = read_tensor(tin);
    if (t.shape() != entry.at("shape").get<Shape>()) {
      throw std::runtime_error("tensor '" + name + "' has shape " + to_string(t.shape()) +
                               ", manifest says " + entry.at("shape").dump());
    }
    ck.params.add(name, std::move(t));
  }
  return ck;
}

}  // namespace boxmask
