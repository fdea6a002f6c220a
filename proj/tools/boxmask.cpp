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
// boxmask: command-line entry point.
//
//   boxmask gen-data --out DIR --num-seq N [--hard-distractors] [--seed S]
//   boxmask train --config FILE --out DIR [--data DIR] [--seed S]
//   boxmask infer --ckpt DIR --data DIR --out DIR
//   boxmask eval --ckpt DIR --data DIR --report FILE [--baseline KIND]
//   boxmask ablate --ckpt DIR --data DIR --axis AXIS [--values a,b] --report FILE
//   boxmask export-labels --ckpt DIR --data DIR --out DIR [--stride K] [--max-frames M]
//   boxmask check [--grad] [--oracle] [--report FILE]
//
// Exit status: 0 on success, 1 on runtime failure (JSON error on stderr),
// 2 on usage errors.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <nlohmann/json.hpp>

#include "boxmask/checkpoint.hpp"
#include "boxmask/checks.hpp"
#include "boxmask/config.hpp"
#include "boxmask/eval.hpp"
#include "boxmask/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "key = value configuration file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "random seed (overrides the config)");
  cmd->add_option("--workers", c.workers, "parallel sequences")->check(CLI::PositiveNumber);
}

// Checkpoint directory or a training output directory holding one.
fs::path resolve_checkpoint(const fs::path& p) {
  if (fs::exists(p / "manifest.json")) return p;
  if (fs::exists(p / "checkpoint" / "manifest.json")) return p / "checkpoint";
  throw std::runtime_error("no checkpoint found at " + p.string());
}

struct Loaded {
  boxmask::ParameterSet params;
  boxmask::RunConfig config;
};

Loaded load_model(const fs::path& ckpt_dir, const Common& c) {
  const boxmask::Checkpoint ck = boxmask::load_checkpoint(resolve_checkpoint(ckpt_dir));
  boxmask::RunConfig base;
  base.pipeline = boxmask::PipelineConfig::from_json(ck.config);
  Loaded out{ck.params, c.config_path ? boxmask::load_run_config(*c.config_path, base) : base};
  if (c.seed) out.config.pipeline.seed = *c.seed;
  if (c.workers) out.config.workers = *c.workers;
  const auto expected = boxmask::init_parameters(out.config.pipeline.dims, 0);
  if (!expected.same_layout(out.params)) {
    throw std::runtime_error("checkpoint tensors do not match the configured model dimensions");
  }
  return out;
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

boxmask::Tensor side_by_side(const boxmask::Tensor& a, const boxmask::Tensor& b) {
  boxmask::Tensor out(boxmask::Shape{a.dim(0), a.dim(1) * 2 + 1, 1}, 0.5);
  for (std::size_t i = 0; i < a.dim(0); ++i) {
    for (std::size_t j = 0; j < a.dim(1); ++j) {
      out.at(i, j, 0) = a.at(i, j, 0);
      out.at(i, a.dim(1) + 1 + j, 0) = b.at(i, j, 0);
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Box-to-mask conversion for box-annotated videos"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write synthetic box-annotated sequences");
  std::string gen_out;
  std::size_t num_seq = 0, gen_frames = 48, gen_size = 64;
  bool hard = false;
  std::uint64_t gen_seed = 0;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--num-seq", num_seq, "number of sequences")->required()->check(CLI::PositiveNumber);
  gen->add_option("--frames", gen_frames, "frames per sequence")->check(CLI::PositiveNumber);
  gen->add_option("--size", gen_size, "frame height and width")->check(CLI::Range(16, 4096));
  gen->add_flag("--hard-distractors", hard, "add a look-alike distractor crossing the target box");
  gen->add_option("--seed", gen_seed, "random seed");

  // train
  auto* train = app.add_subcommand("train", "train a model");
  Common train_c;
  add_common(train, train_c);
  std::string train_out;
  std::optional<std::string> train_data;
  bool progress = false;
  train->add_option("--out", train_out, "output directory (checkpoint/, metrics.jsonl)")->required();
  train->add_option("--data", train_data, "training set (overrides train_data)");
  train->add_flag("--progress", progress, "print log records to stderr");

  // infer
  auto* infer = app.add_subcommand("infer", "predict masks for every frame");
  Common infer_c;
  add_common(infer, infer_c);
  std::string infer_ckpt, infer_data, infer_out;
  infer->add_option("--ckpt", infer_ckpt, "checkpoint or training output directory")->required();
  infer->add_option("--data", infer_data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  infer->add_option("--out", infer_out, "output directory")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "mean Jaccard on an annotated set");
  Common eval_c;
  add_common(eval, eval_c);
  std::string eval_ckpt, eval_data, eval_report, baseline = "model";
  std::optional<std::string> dump_dir;
  eval->add_option("--ckpt", eval_ckpt, "checkpoint (required for the model predictor)");
  eval->add_option("--data", eval_data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--report", eval_report, "report path (JSON)")->required();
  eval->add_option("--baseline", baseline, "predictor")
      ->check(CLI::IsMember({"model", "box", "oracle", "empty"}));
  eval->add_option("--dump", dump_dir, "write prediction|gt PNGs here");

  // ablate
  auto* abl = app.add_subcommand("ablate", "evaluate along one configuration axis");
  Common abl_c;
  add_common(abl, abl_c);
  std::string abl_ckpt, abl_data, abl_report, axis_name;
  std::vector<std::string> axis_values;
  abl->add_option("--ckpt", abl_ckpt, "checkpoint")->required();
  abl->add_option("--data", abl_data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  abl->add_option("--axis", axis_name, "num_frames, sd_iters, crop_scale, interval or variant")
      ->required()
      ->check(CLI::IsMember({"num_frames", "sd_iters", "crop_scale", "interval", "variant"}));
  abl->add_option("--values", axis_values, "values to sweep (default: the standard sweep for the axis)")
      ->delimiter(',');
  abl->add_option("--report", abl_report, "report path (JSON)")->required();

  // export-labels
  auto* exp = app.add_subcommand("export-labels", "write pseudo-label masks from boxes");
  Common exp_c;
  add_common(exp, exp_c);
  std::string exp_ckpt, exp_data, exp_out;
  boxmask::ExportPolicy policy;
  exp->add_option("--ckpt", exp_ckpt, "checkpoint")->required();
  exp->add_option("--data", exp_data, "dataset directory (boxes required)")->required()->check(CLI::ExistingDirectory);
  exp->add_option("--out", exp_out, "output directory")->required();
  exp->add_option("--stride", policy.stride, "annotate every k-th frame")->check(CLI::PositiveNumber);
  exp->add_option("--max-frames", policy.max_frames, "frames per video at most")->check(CLI::PositiveNumber);

  // check
  auto* check = app.add_subcommand("check", "run the numerical verification suites");
  bool check_grad = false, check_oracle = false;
  std::uint64_t check_seed = 0;
  std::optional<std::string> check_report;
  check->add_flag("--grad", check_grad, "solver and pipeline gradient checks");
  check->add_flag("--oracle", check_oracle, "oracle equivalence, invariances and descent");
  check->add_option("--seed", check_seed, "random seed");
  check->add_option("--report", check_report, "report path (JSON)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    std::cerr << json{{"error", e.what()}, {"kind", "usage"}}.dump() << '\n';
    return 2;
  }

  try {
    json result;
    if (*gen) {
      boxmask::synthetic::SceneOptions opts;
      opts.height = opts.width = gen_size;
      opts.frame_count = gen_frames;
      opts.hard_distractors = hard;
      const auto data = boxmask::synthetic::generate_dataset(num_seq, opts, gen_seed);
      boxmask::save_dataset(gen_out, data);
      result = {{"sequences", data.size()}, {"out", gen_out}};
    } else if (*train) {
      boxmask::RunConfig cfg =
          train_c.config_path ? boxmask::load_run_config(*train_c.config_path) : boxmask::RunConfig{};
      if (train_c.seed) cfg.pipeline.seed = *train_c.seed;
      if (train_data) cfg.train_data = *train_data;
      if (!cfg.train_data) throw boxmask::ConfigError("no training data: set train_data or --data");
      cfg.validate_paths();
      const auto data = boxmask::load_dataset(*cfg.train_data);
      boxmask::TrainOptions opts;
      opts.out_dir = train_out;
      if (progress) {
        opts.on_log = [](const boxmask::TrainRecord& r) { std::cerr << r.to_json().dump() << '\n'; };
      }
      const auto res = boxmask::train(data, cfg.pipeline, opts);
      result = {{"iterations", cfg.pipeline.iterations},
                {"final_loss", res.log.back().loss},
                {"checkpoint", (fs::path(train_out) / "checkpoint").string()}};
    } else if (*infer) {
      const Loaded m = load_model(infer_ckpt, infer_c);
      const auto data = boxmask::load_dataset(infer_data);
      std::vector<std::size_t> counts(data.size());
      boxmask::parallel_for(data.size(), m.config.workers, [&](std::size_t k) {
        const auto pred = boxmask::infer_video(m.params, m.config.pipeline, data[k]);
        const fs::path dir = fs::path(infer_out) / data[k].id / "masks";
        fs::create_directories(dir);
        for (std::size_t t = 0; t < pred.masks.size(); ++t) {
          boxmask::write_png(dir / boxmask::frame_file_name(t), pred.masks[t]);
        }
        counts[k] = pred.masks.size();
      });
      json seqs = json::array();
      for (std::size_t k = 0; k < data.size(); ++k) seqs.push_back({{"id", data[k].id}, {"frames", counts[k]}});
      result = {{"sequences", seqs}, {"out", infer_out}};
    } else if (*eval) {
      const auto data = boxmask::load_dataset(eval_data);
      std::optional<Loaded> m;
      boxmask::Predictor predict;
      std::size_t workers = eval_c.workers.value_or(1);
      if (baseline == "model") {
        if (eval_ckpt.empty()) throw boxmask::ConfigError("eval --baseline model needs --ckpt");
        m = load_model(eval_ckpt, eval_c);
        workers = m->config.workers;
        predict = boxmask::model_predictor(m->params, m->config.pipeline);
      } else if (baseline == "box") {
        predict = boxmask::box_predictor();
      } else if (baseline == "oracle") {
        predict = boxmask::oracle_predictor();
      } else {
        predict = boxmask::empty_predictor();
      }
      if (dump_dir) {
        predict = [predict, dir = fs::path(*dump_dir)](const boxmask::VideoSample& s) {
          auto masks = predict(s);
          fs::create_directories(dir / s.id);
          for (std::size_t t = 0; t < masks.size(); ++t) {
            boxmask::write_png(dir / s.id / boxmask::frame_file_name(t), side_by_side(masks[t], s.gt_masks.at(t)));
          }
          return masks;
        };
      }
      auto report = boxmask::evaluate(data, predict, workers);
      report.config = m ? m->config.pipeline.to_json() : json{{"baseline", baseline}};
      write_json(eval_report, report.to_json());
      result = {{"dataset_mean_j", report.mean_j}, {"report", eval_report}};
    } else if (*abl) {
      const Loaded m = load_model(abl_ckpt, abl_c);
      const auto data = boxmask::load_dataset(abl_data);
      const auto axis = boxmask::parse_axis(axis_name);
      if (axis_values.empty()) axis_values = boxmask::default_axis_values(axis);
      const auto table = boxmask::ablate(data, m.params, m.config.pipeline, axis, axis_values, m.config.workers);
      write_json(abl_report, table.to_json());
      json cells = json::array();
      for (const auto& c : table.cells) cells.push_back({{"value", c.value}, {"dataset_mean_j", c.report.mean_j}});
      result = {{"axis", axis_name}, {"cells", cells}, {"report", abl_report}};
    } else if (*exp) {
      const Loaded m = load_model(exp_ckpt, exp_c);
      const auto data = boxmask::load_dataset(exp_data);
      const auto summary =
          boxmask::export_pseudo_labels(data, m.params, m.config.pipeline, policy, exp_out, m.config.workers);
      result = summary.to_json();
      if (!summary.all_ok()) {
        std::cout << result.dump(2) << '\n';
        std::cerr << json{{"error", "some sequences failed to export"}, {"kind", "runtime"}}.dump() << '\n';
        return 1;
      }
    } else if (*check) {
      if (!check_grad && !check_oracle) check_grad = check_oracle = true;
      namespace ck = boxmask::checks;
      ck::TraceLog log;
      std::vector<ck::CheckResult> results;
      if (check_grad) {
        results.push_back(ck::solver_gradients(check_seed + 1, 10, 1e-5, 1e-4, &log));
        results.push_back(ck::pipeline_gradients(check_seed + 2, 1e-5, 1e-4, &log));
      }
      if (check_oracle) {
        results.push_back(ck::oracle_equivalence(check_seed + 3, 50, 15, 1e-6, &log));
        for (auto& r : ck::invariances(check_seed + 4, 20, &log)) results.push_back(r);
      }
      results.push_back(ck::monotone_descent(log));
      bool all = true;
      json arr = json::array();
      for (const auto& r : results) {
        all = all && r.passed;
        arr.push_back(r.to_json());
      }
      result = {{"passed", all}, {"checks", arr}};
      if (check_report) write_json(*check_report, result);
      std::cout << result.dump(2) << '\n';
      return all ? 0 : 1;
    }
    std::cout << result.dump(2) << '\n';
    return 0;
  } catch (const boxmask::ConfigError& e) {
    std::cerr << json{{"error", e.what()}, {"kind", "config"}}.dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}, {"kind", "runtime"}}.dump() << '\n';
    return 1;
  }
}
