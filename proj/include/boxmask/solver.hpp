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

#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "boxmask/autodiff.hpp"

// Spatio-temporal aggregation: fit one convolution filter z jointly over all
// frames of a window,
//
//   f(z) = (1/T) sum_t || w_t . (x_t * z - e_t) ||^2 + lambda ||z||^2,
//
// by a fixed number of steepest-descent steps with exact line search, every
// step recorded on the tape so that z* is differentiable in x, e, w, lambda.
namespace boxmask::aggregation {

/// Per-frame solver input: features x (H x W x D), embedding e and
/// confidence w (both H x W x C).
struct FrameObservation {
  Var x;
  Var e;
  Var w;
};

inline constexpr double kInitialLambda = 0.05;

/// Raw parameter value whose softplus is `lambda`.
double lambda_raw_for(double lambda);

struct SolverParams {
  std::size_t num_iterations = 5;
  std::size_t kernel_size = 3;
  Var lambda_raw;  // lambda = softplus(lambda_raw)
  double step_guard_eps = 1e-12;
};

struct SolverTrace {
  std::vector<double> objectives;  // f(z_0) .. f(z_N)
  std::vector<double> alphas;      // one per step
  std::vector<double> grad_norms;  // ||g_k|| at the start of each step
  std::vector<double> decreases;   // f(z_k) - f(z_{k+1})

  bool non_increasing() const;
  /// Every step with ||g_k|| > grad_tol lowered the objective.
  bool strictly_decreasing_while(double grad_tol) const;
  nlohmann::json to_json() const;
};

struct StepResult {
  Var z_next;
  Var alpha;
  bool guarded = false;
};

struct SolveResult {
  Var z;
  SolverTrace trace;
};

/// Checks shapes and returns the frames in canonical (content-sorted) order,
/// so every reduction over frames is independent of the caller's ordering.
std::vector<FrameObservation> canonical_frames(std::span<const FrameObservation> frames);

Var objective(const Var& z, std::span<const FrameObservation> frames, const Var& lambda);
Var gradient(const Var& z, std::span<const FrameObservation> frames, const Var& lambda);
Var hessian_apply(const Var& u, std::span<const FrameObservation> frames, const Var& lambda);
StepResult sd_step(const Var& z, std::span<const FrameObservation> frames, const Var& lambda,
                   double step_guard_eps);

/// Starts from z = 0 and applies params.num_iterations steps.
SolveResult solve(std::span<const FrameObservation> frames, const SolverParams& params);

/// s = x * z
Var apply_filter(const Var& x, const Var& z);

// ---- dense verification oracle ---------------------------------------------

struct FrameTensors {
  Tensor x;
  Tensor e;
  Tensor w;
};

inline constexpr std::size_t kOracleMaxUnknowns = 4096;

/// Minimizer of f via the normal equations
///   ((1/T) sum_t M_t^T W_t^2 M_t + lambda I) vec(z) = (1/T) sum_t M_t^T W_t^2 vec(e_t),
/// assembled densely with explicit loops and solved by Cholesky.
Tensor dense_oracle_solve(std::span<const FrameTensors> frames, double lambda,
                          std::size_t kernel_size);

/// Untaped objective evaluation.
double objective_value(const Tensor& z, std::span<const FrameTensors> frames, double lambda);

}  // namespace boxmask::aggregation
