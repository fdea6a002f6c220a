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

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "boxmask/solver.hpp"

// Numerical verification suites: oracle equivalence, solver and pipeline
// gradient checks, descent monotonicity and the solver invariances.
namespace boxmask::checks {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0;
  nlohmann::json to_json() const;
};

/// Random aggregation problem.
struct SolverInstance {
  std::vector<aggregation::FrameTensors> frames;
  double lambda = aggregation::kInitialLambda;
  std::size_t kernel_size = 3;

  std::size_t input_count() const;
};

struct InstanceBounds {
  std::size_t max_hw = 6;
  std::size_t max_channels = 2;  // D and C
  std::size_t max_frames = 4;
  double min_lambda = 0.05;
  double max_lambda = 1.0;
};

/// H, W uniform in [1, max_hw]; D, C in [1, max_channels]; K in {1, 3};
/// T in [1, max_frames]; x, e ~ U(-1, 1); w ~ U(0.5, 1.5); lambda
/// log-uniform in [min_lambda, max_lambda].
SolverInstance random_instance(std::mt19937_64& rng, const InstanceBounds& bounds = {});

/// Runs `solve` on constants, returning the filter and trace.
aggregation::SolveResult solve_instance(Tape& tape, const SolverInstance& inst,
                                        std::size_t iterations);

/// Collects every trace produced by the suites for the descent check.
struct TraceLog {
  std::vector<aggregation::SolverTrace> traces;
  void add(const aggregation::SolverTrace& t) { traces.push_back(t); }
};

/// Objective after `iterations` steps within `tolerance` relative of the
/// dense optimum on `instances` random problems.
CheckResult oracle_equivalence(std::uint64_t seed, std::size_t instances = 50,
                               std::size_t iterations = 15, double tolerance = 1e-6,
                               TraceLog* log = nullptr);

/// Non-increasing objectives, strictly decreasing while ||g|| > grad_tol.
CheckResult monotone_descent(const TraceLog& log, double grad_tol = 1e-10);

/// Tape gradient of <z*, P> against central differences (step h) for every
/// entry of every x_t, e_t, w_t and lambda_raw.
CheckResult solver_gradients(std::uint64_t seed, std::size_t instances = 10, double h = 1e-5,
                             double tolerance = 1e-4, TraceLog* log = nullptr);

/// Loss gradients of the full pipeline on a 16x16, two-frame synthetic
/// window: a random directional derivative and the largest entries of each
/// trainable tensor against central differences.
CheckResult pipeline_gradients(std::uint64_t seed, double h = 1e-5, double tolerance = 1e-4,
                               TraceLog* log = nullptr);

/// Frame permutation (bit-identical), replication (1e-12), weight and
/// regulariser scaling (1e-10) and zero-weight independence (bit-identical),
/// each on `instances` random problems.
std::vector<CheckResult> invariances(std::uint64_t seed, std::size_t instances = 20,
                                     TraceLog* log = nullptr);

}  // namespace boxmask::checks
