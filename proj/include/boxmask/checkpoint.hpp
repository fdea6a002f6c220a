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

#include <nlohmann/json.hpp>

#include "boxmask/params.hpp"

namespace boxmask {

/// Directory with manifest.json (tensor names, shapes, config echo,
/// iteration count) and one binary file per tensor under tensors/.
struct Checkpoint {
  ParameterSet params;
  nlohmann::json config;
  std::size_t iteration = 0;
};

/// Written to a temporary sibling directory, then swapped into place.
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace boxmask
