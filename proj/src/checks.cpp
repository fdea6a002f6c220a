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
#include "boxmask/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "boxmask/pipeline.hpp"
#include "boxmask/synthetic.hpp"

namespace boxmask::checks {
namespace {

using aggregation::FrameObservation;
using aggregation::FrameTensors;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo, double hi) {
  Tensor t(shape);
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.data()) v = u(rng);
  return t;
}

// Norm-relative difference; two vectors that are both numerically zero agree.
double relative_error(const Tensor& a, const Tensor& b) {
  const double scale = std::max(std::sqrt(squared_norm(a)), std::sqrt(squared_norm(b)));
  if (scale < 1e-12) return 0.0;
  return std::sqrt(squared_norm(a - b)) / scale;
}

double relative_error(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  if (scale < 1e-12) return 0.0;
  return std::abs(a - b) / scale;
}

std::vector<FrameObservation> observe(Tape& tape, const std::vector<FrameTensors>& frames,
                                      bool trainable) {
  std::vector<FrameObservation> out;
  for (const auto& f : frames) {
    if (trainable) {
      out.push_back({tape.leaf(f.x), tape.leaf(f.e), tape.leaf(f.w)});
    } else {
      out.push_back({tape.constant(f.x), tape.constant(f.e), tape.constant(f.w)});
    }
  }
  return out;
}

Tensor solve_tensor(const SolverInstance& inst, std::size_t iterations, TraceLog* log) {
  Tape tape;
  const auto r = solve_instance(tape, inst, iterations);
  if (log) log->add(r.trace);
  return r.z.value();
}

std::string format(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

}  // namespace

nlohmann::json CheckResult::to_json() const {
  return {{"name", name}, {"passed", passed}, {"detail", detail}, {"seconds", seconds}};
}

std::size_t SolverInstance::input_count() const {
  std::size_t n = 1;
  for (const auto& f : frames) n += f.x.size() + f.e.size() + f.w.size();
  return n;
}

SolverInstance random_instance(std::mt19937_64& rng, const InstanceBounds& b) {
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  SolverInstance inst;
  const std::size_t h = pick(1, b.max_hw), w = pick(1, b.max_hw);
  const std::size_t d = pick(1, b.max_channels), c = pick(1, b.max_channels);
  inst.kernel_size = pick(0, 1) ? 3 : 1;
  const std::size_t t = pick(1, b.max_frames);
  inst.lambda = std::exp(std::uniform_real_distribution<double>(std::log(b.min_lambda),
                                                                std::log(b.max_lambda))(rng));
  for (std::size_t k = 0; k < t; ++k) {
    inst.frames.push_back({random_tensor({h, w, d}, rng, -1, 1), random_tensor({h, w, c}, rng, -1, 1),
                           random_tensor({h, w, c}, rng, 0.5, 1.5)});
  }
  return inst;
}

aggregation::SolveResult solve_instance(Tape& tape, const SolverInstance& inst,
                                        std::size_t iterations) {
  const auto frames = observe(tape, inst.frames, false);
  aggregation::SolverParams p;
  p.num_iterations = iterations;
  p.kernel_size = inst.kernel_size;
  p.lambda_raw = tape.constant(Tensor::scalar(aggregation::lambda_raw_for(inst.lambda)));
  return aggregation::solve(frames, p);
}

CheckResult oracle_equivalence(std::uint64_t seed, std::size_t instances, std::size_t iterations,
                               double tolerance, TraceLog* log) {
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  CheckResult r;
  r.name = "oracle_equivalence";
  std::size_t failures = 0;
  double worst = 0;
  for (std::size_t k = 0; k < instances; ++k) {
    const SolverInstance inst = random_instance(rng);
    const Tensor oracle = aggregation::dense_oracle_solve(inst.frames, inst.lambda, inst.kernel_size);
    const double fstar = aggregation::objective_value(oracle, inst.frames, inst.lambda);
    const double fsd = aggregation::objective_value(solve_tensor(inst, iterations, log),
                                                    inst.frames, inst.lambda);
    const double gap = (fsd - fstar) / std::max(std::abs(fstar), 1e-300);
    worst = std::max(worst, gap);
    if (gap > tolerance) ++failures;
  }
  r.seconds = seconds_since(start);
  r.passed = failures == 0;
  r.detail = std::to_string(instances - failures) + "/" + std::to_string(instances) +
             " instances within " + format(tolerance) + " after " + std::to_string(iterations) +
             " iterations; worst relative gap " + format(worst);
  return r;
}

CheckResult monotone_descent(const TraceLog& log, double grad_tol) {
  CheckResult r;
  r.name = "monotone_descent";
  std::size_t increasing = 0, stalled = 0;
  for (const auto& t : log.traces) {
    if (!t.non_increasing()) ++increasing;
    if (!t.strictly_decreasing_while(grad_tol)) ++stalled;
  }
  r.passed = increasing == 0 && stalled == 0 && !log.traces.empty();
  r.detail = std::to_string(log.traces.size()) + " solver traces; " + std::to_string(increasing) +
             " with an increase, " + std::to_string(stalled) +
             " with a non-decreasing step while ||g|| > " + format(grad_tol);
  return r;
}

CheckResult solver_gradients(std::uint64_t seed, std::size_t instances, double h,
                             double tolerance, TraceLog* log) {
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  CheckResult r;
  r.name = "solver_gradients";
  constexpr std::size_t kIterations = 5;
  double worst = 0;
  std::size_t checked = 0;
  for (std::size_t k = 0; k < instances; ++k) {
    SolverInstance inst;
    do {
      inst = random_instance(rng, {4, 2, 3, 0.05, 1.0});
    } while (inst.input_count() > 200);
    const FrameTensors& f0 = inst.frames.front();
    const Tensor projection =
        random_tensor({inst.kernel_size, inst.kernel_size, f0.x.dim(2), f0.e.dim(2)}, rng, -1, 1);
    const double raw = aggregation::lambda_raw_for(inst.lambda);

    auto value = [&](const std::vector<FrameTensors>& frames, double lambda_raw) {
      Tape tape;
      aggregation::SolverParams p;
      p.num_iterations = kIterations;
      p.kernel_size = inst.kernel_size;
      p.lambda_raw = tape.constant(Tensor::scalar(lambda_raw));
      return dot(aggregation::solve(observe(tape, frames, false), p).z.value(), projection);
    };

    Tape tape;
    const auto frames = observe(tape, inst.frames, true);
    aggregation::SolverParams p;
    p.num_iterations = kIterations;
    p.kernel_size = inst.kernel_size;
    p.lambda_raw = tape.leaf(Tensor::scalar(raw));
    const auto solved = aggregation::solve(frames, p);
    if (log) log->add(solved.trace);
    const Gradients g = tape.backward(dot(solved.z, tape.constant(projection)));

    for (std::size_t t = 0; t < inst.frames.size(); ++t) {
      for (int which = 0; which < 3; ++which) {
        const Var& leaf = which == 0 ? frames[t].x : which == 1 ? frames[t].e : frames[t].w;
        Tensor fd(leaf.shape());
        for (std::size_t i = 0; i < fd.size(); ++i) {
          auto probe = inst.frames;
          Tensor& target = which == 0 ? probe[t].x : which == 1 ? probe[t].e : probe[t].w;
          const double base = target[i];
          target[i] = base + h;
          const double up = value(probe, raw);
          target[i] = base - h;
          const double down = value(probe, raw);
          fd[i] = (up - down) / (2 * h);
        }
        worst = std::max(worst, relative_error(g[leaf], fd));
        ++checked;
      }
    }
    const double fd_lambda = (value(inst.frames, raw + h) - value(inst.frames, raw - h)) / (2 * h);
    worst = std::max(worst, relative_error(g[p.lambda_raw].item(), fd_lambda));
    ++checked;
  }
  r.seconds = seconds_since(start);
  r.passed = worst <= tolerance;
  r.detail = std::to_string(checked) + " input tensors on " + std::to_string(instances) +
             " instances; worst relative error " + format(worst) + " (tolerance " +
             format(tolerance) + ")";
  return r;
}

CheckResult pipeline_gradients(std::uint64_t seed, double h, double tolerance, TraceLog* log) {
  const auto start = Clock::now();
  CheckResult r;
  r.name = "pipeline_gradients";
  std::mt19937_64 rng(seed);

  synthetic::SceneOptions opts;
  opts.height = opts.width = 16;
  opts.frame_count = 2;
  opts.min_radius = 3;
  opts.max_radius = 4;
  const VideoSample sample =
      synthetic::generate_sequence(synthetic::random_scene(rng, opts), rng());

  ModelDims dims;
  ParameterSet params = init_parameters(dims, rng());
  // Zero biases on the all-zero part of the box raster put ReLUs exactly at
  // their kink; check at a generic point instead.
  for (auto& [name, t] : params.tensors()) {
    if (name.ends_with(".bias")) t = random_tensor(t.shape(), rng, -0.1, 0.1);
  }
  const ForwardOptions fwd{5, dims.kernel_size, Variant::kMultiFrameIterative};

  auto loss_of = [&](const ParameterSet& ps) {
    Tape tape;
    const auto bound = BoundParameters::frozen(tape, ps);
    return sequence_loss(forward_sequence(bound, sample.frames, sample.boxes, fwd), sample.gt_masks)
        .total.value()
        .item();
  };

  Tape tape;
  const auto bound = BoundParameters::trainable(tape, params);
  const auto seg = forward_sequence(bound, sample.frames, sample.boxes, fwd);
  if (log) {
    log->add(seg.trace);
    log->add(seg.refined_trace);
  }
  const Gradients grads = tape.backward(sequence_loss(seg, sample.gt_masks).total);

  double worst = 0;
  std::string worst_name;
  bool finite = true;
  std::normal_distribution<double> normal;
  for (const auto& [name, var] : bound.vars()) {
    const Tensor& g = grads[var];
    finite = finite && g.all_finite();
    Tensor dir(g.shape());
    for (double& v : dir.data()) v = normal(rng);
    dir = (1.0 / std::sqrt(squared_norm(dir))) * dir;

    auto directional = [&](const Tensor& d) {
      ParameterSet probe = params;
      axpy_into(probe.get(name), h, d);
      const double up = loss_of(probe);
      probe = params;
      axpy_into(probe.get(name), -h, d);
      return (up - loss_of(probe)) / (2 * h);
    };
    auto record = [&](double err) {
      if (err > worst) {
        worst = err;
        worst_name = name;
      }
    };
    record(relative_error(directional(dir), dot(g, dir)));

    std::vector<std::size_t> order(g.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const std::size_t top = std::min<std::size_t>(2, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<long>(top), order.end(),
                      [&](std::size_t a, std::size_t b) { return std::abs(g[a]) > std::abs(g[b]); });
    for (std::size_t k = 0; k < top; ++k) {
      Tensor unit(g.shape());
      unit[order[k]] = 1.0;
      record(relative_error(directional(unit), g[order[k]]));
    }
  }
  r.seconds = seconds_since(start);
  r.passed = finite && worst <= tolerance;
  r.detail = std::to_string(bound.vars().size()) + " trainable tensors" +
             (finite ? "" : " (non-finite gradient found)") + "; worst relative error " +
             format(worst) + (worst_name.empty() ? "" : " in " + worst_name) + " (tolerance " +
             format(tolerance) + ")";
  return r;
}

std::vector<CheckResult> invariances(std::uint64_t seed, std::size_t instances, TraceLog* log) {
  constexpr std::size_t kIterations = 15;
  std::mt19937_64 rng(seed);
  std::vector<CheckResult> out;

  auto run = [&](const char* name, auto&& body) {
    const auto start = Clock::now();
    CheckResult r;
    r.name = name;
    std::size_t passed = 0;
    double worst = 0;
    for (std::size_t k = 0; k < instances; ++k) {
      const SolverInstance inst = random_instance(rng);
      const Tensor base = solve_tensor(inst, kIterations, log);
      const auto [ok, err] = body(inst, base);
      passed += ok;
      worst = std::max(worst, err);
    }
    r.seconds = seconds_since(start);
    r.passed = passed == instances;
    r.detail = std::to_string(passed) + "/" + std::to_string(instances) +
               " instances; worst deviation " + format(worst);
    out.push_back(r);
  };

  run("permutation_invariance", [&](const SolverInstance& inst, const Tensor& base) {
    SolverInstance p = inst;
    std::shuffle(p.frames.begin(), p.frames.end(), rng);
    std::reverse(p.frames.begin(), p.frames.end());
    const Tensor z = solve_tensor(p, kIterations, log);
    return std::pair{z == base, relative_error(z, base)};
  });
  run("replication_invariance", [&](const SolverInstance& inst, const Tensor& base) {
    SolverInstance p = inst;
    const std::size_t copies = std::uniform_int_distribution<std::size_t>(2, 3)(rng);
    p.frames.clear();
    for (std::size_t c = 0; c < copies; ++c) {
      p.frames.insert(p.frames.end(), inst.frames.begin(), inst.frames.end());
    }
    const double err = relative_error(solve_tensor(p, kIterations, log), base);
    return std::pair{err <= 1e-12, err};
  });
  run("scaling_invariance", [&](const SolverInstance& inst, const Tensor& base) {
    SolverInstance p = inst;
    const double c = std::uniform_real_distribution<double>(0.5, 2.0)(rng);
    for (auto& f : p.frames) f.w = c * f.w;
    p.lambda = c * c * inst.lambda;
    const double err = relative_error(solve_tensor(p, kIterations, log), base);
    return std::pair{err <= 1e-10, err};
  });
  run("zero_weight_independence", [&](const SolverInstance& inst, const Tensor&) {
    SolverInstance p = inst;
    const FrameTensors first = inst.frames.front();
    p.frames.push_back({random_tensor(first.x.shape(), rng, -1, 1),
                        random_tensor(first.e.shape(), rng, -1, 1), zeros_like(first.w)});
    const Tensor a = solve_tensor(p, kIterations, log);
    p.frames.back().x = random_tensor(first.x.shape(), rng, -5, 5);
    p.frames.back().e = random_tensor(first.e.shape(), rng, -5, 5);
    const Tensor b = solve_tensor(p, kIterations, log);
    return std::pair{a == b, relative_error(a, b)};
  });
  return out;
}

}  // namespace boxmask::checks
