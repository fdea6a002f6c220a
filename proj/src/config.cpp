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
#include "boxmask/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace boxmask {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = first + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "'");
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

Setter size_field(std::size_t PipelineConfig::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) {
    c.pipeline.*field = parse_number<std::size_t>(k, v);
  };
}
Setter real_field(double PipelineConfig::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) {
    c.pipeline.*field = parse_number<double>(k, v);
  };
}
Setter dim_field(std::size_t ModelDims::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) {
    c.pipeline.dims.*field = parse_number<std::size_t>(k, v);
  };
}

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table = {
      {"num_frames", size_field(&PipelineConfig::num_frames)},
      {"interval", size_field(&PipelineConfig::interval)},
      {"sd_iters_train", size_field(&PipelineConfig::sd_iters_train)},
      {"sd_iters_infer", size_field(&PipelineConfig::sd_iters_infer)},
      {"crop_scale_train", real_field(&PipelineConfig::crop_scale_train)},
      {"crop_scale_infer", real_field(&PipelineConfig::crop_scale_infer)},
      {"work_height", size_field(&PipelineConfig::work_height)},
      {"work_width", size_field(&PipelineConfig::work_width)},
      {"learning_rate", real_field(&PipelineConfig::learning_rate)},
      {"momentum", real_field(&PipelineConfig::momentum)},
      {"lr_decay", real_field(&PipelineConfig::lr_decay)},
      {"grad_clip", real_field(&PipelineConfig::grad_clip)},
      {"flip_probability", real_field(&PipelineConfig::flip_probability)},
      {"iterations", size_field(&PipelineConfig::iterations)},
      {"sample_window", size_field(&PipelineConfig::sample_window)},
      {"log_every", size_field(&PipelineConfig::log_every)},
      {"checkpoint_every", size_field(&PipelineConfig::checkpoint_every)},
      {"seed",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.pipeline.seed = parse_number<std::uint64_t>(k, v);
       }},
      {"placement",
       [](RunConfig& c, const std::string&, const std::string& v) {
         try {
           c.pipeline.placement = parse_placement(v);
         } catch (const std::invalid_argument& e) {
           throw ConfigError(e.what());
         }
       }},
      {"variant",
       [](RunConfig& c, const std::string&, const std::string& v) {
         try {
           c.pipeline.variant = parse_variant(v);
         } catch (const std::invalid_argument& e) {
           throw ConfigError(e.what());
         }
       }},
      {"kernel_size", dim_field(&ModelDims::kernel_size)},
      {"embed_dim", dim_field(&ModelDims::embed_dim)},
      {"feature_dim", dim_field(&ModelDims::feature_dim)},
      {"hidden", dim_field(&ModelDims::hidden)},
      {"mask_width", dim_field(&ModelDims::mask_width)},
      {"backbone1", dim_field(&ModelDims::backbone1)},
      {"backbone2", dim_field(&ModelDims::backbone2)},
      {"decoder1", dim_field(&ModelDims::decoder1)},
      {"decoder2", dim_field(&ModelDims::decoder2)},
      {"train_data", [](RunConfig& c, const std::string&, const std::string& v) { c.train_data = v; }},
      {"val_data", [](RunConfig& c, const std::string&, const std::string& v) { c.val_data = v; }},
      {"workers",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.workers = parse_number<std::size_t>(k, v);
       }},
  };
  return table;
}

std::string format_real(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

void RunConfig::validate_paths() const {
  for (const auto* p : {&train_data, &val_data}) {
    if (*p && !std::filesystem::is_directory(**p)) {
      throw ConfigError("data directory not found: " + (*p)->string());
    }
  }
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& [name, setter] : setters()) {
    if (name == key) {
      setter(config, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_run_config(const std::string& text, RunConfig base) {
  RunConfig config = std::move(base);
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) {
      throw ConfigError("config line " + std::to_string(line_no) + ": key '" + key + "' repeated");
    }
    try {
      set_config_value(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  try {
    config.pipeline.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  if (config.workers < 1) throw ConfigError("workers must be >= 1");
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), std::move(base));
}

std::vector<std::pair<std::string, std::string>> config_defaults() {
  const RunConfig c;
  const PipelineConfig& p = c.pipeline;
  return {
      {"num_frames", std::to_string(p.num_frames)},
      {"interval", std::to_string(p.interval)},
      {"sd_iters_train", std::to_string(p.sd_iters_train)},
      {"sd_iters_infer", std::to_string(p.sd_iters_infer)},
      {"crop_scale_train", format_real(p.crop_scale_train)},
      {"crop_scale_infer", format_real(p.crop_scale_infer)},
      {"work_height", std::to_string(p.work_height)},
      {"work_width", std::to_string(p.work_width)},
      {"learning_rate", format_real(p.learning_rate)},
      {"momentum", format_real(p.momentum)},
      {"lr_decay", format_real(p.lr_decay)},
      {"grad_clip", format_real(p.grad_clip)},
      {"flip_probability", format_real(p.flip_probability)},
      {"iterations", std::to_string(p.iterations)},
      {"sample_window", std::to_string(p.sample_window)},
      {"log_every", std::to_string(p.log_every)},
      {"checkpoint_every", std::to_string(p.checkpoint_every)},
      {"seed", std::to_string(p.seed)},
      {"placement", to_string(p.placement)},
      {"variant", to_string(p.variant)},
      {"kernel_size", std::to_string(p.dims.kernel_size)},
      {"embed_dim", std::to_string(p.dims.embed_dim)},
      {"feature_dim", std::to_string(p.dims.feature_dim)},
      {"hidden", std::to_string(p.dims.hidden)},
      {"mask_width", std::to_string(p.dims.mask_width)},
      {"backbone1", std::to_string(p.dims.backbone1)},
      {"backbone2", std::to_string(p.dims.backbone2)},
      {"decoder1", std::to_string(p.dims.decoder1)},
      {"decoder2", std::to_string(p.dims.decoder2)},
      {"train_data", "(unset)"},
      {"val_data", "(unset)"},
      {"workers", std::to_string(c.workers)},
  };
}

}  // namespace boxmask
