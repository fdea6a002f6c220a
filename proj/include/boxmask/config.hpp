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
#include <optional>
#include <string>
#include <vector>

#include "boxmask/pipeline.hpp"

namespace boxmask {

/// Text configuration: one `key = value` per line, `#` starts a comment.
/// Keys are the PipelineConfig fields, the ModelDims fields, and
/// train_data, val_data, workers. Unknown or repeated keys are errors.
struct RunConfig {
  PipelineConfig pipeline;
  std::optional<std::filesystem::path> train_data;
  std::optional<std::filesystem::path> val_data;
  std::size_t workers = 1;

  /// Throws when a configured data path does not exist.
  void validate_paths() const;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Applies the keys in `text` on top of `base`.
RunConfig parse_run_config(const std::string& text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

/// Sets one key; throws ConfigError for unknown keys or malformed values.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

/// Every accepted key with its default value, in documentation order.
std::vector<std::pair<std::string, std::string>> config_defaults();

}  // namespace boxmask
