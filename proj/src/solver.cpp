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
#include "boxmask/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "boxmask/kernels.hpp"

namespace boxmask::aggregation {
namespace {

bool tensor_less(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return a.shape() < b.shape();
  return std::lexicographical_compare(a.data().begin(), a.data().end(), b.data().begin(),
                                      b.data().end());
}

// Keyed on w first: frames whose weights vanish contribute exact zeros, so
// their x and e never influence the order of the remaining terms.
bool frame_less(const FrameObservation& a, const FrameObservation& b) {
  if (tensor_less(a.w.value(), b.w.value())) return true;
  if (tensor_less(b.w.value(), a.w.value())) return false;
  if (tensor_less(a.x.value(), b.x.value())) return true;
  if (tensor_less(b.x.value(), a.x.value())) return false;
  return tensor_less(a.e.value(), b.e.value());
}

void check_filter(const Var& z, const std::vector<FrameObservation>& frames) {
  const Tensor& k = z.value();
  if (k.rank() != 4 || k.dim(0) != k.dim(1) || k.dim(0) % 2 == 0) {
    throw ShapeError("filter must be K x K x D x C with odd K, got " + to_string(k.shape()));
  }
  const Tensor& x = frames.front().x.value();
  const Tensor& e = frames.front().e.value();
  if (k.dim(2) != x.dim(2) || k.dim(3) != e.dim(2)) {
    throw ShapeError("filter " + to_string(k.shape()) + " incompatible with features " +
                     to_string(x.shape()) + " and embedding " + to_string(e.shape()));
  }
}

void check_lambda(const Var& lambda) {
  if (lambda.value().rank() != 0) throw ShapeError("lambda must be a rank-0 scalar");
}

// (2/T) sum_t kgrad(x_t, w_t^2 . (x_t * u [- e_t])), summed in frame order.
Var weighted_normal_term(const Var& u, const std::vector<FrameObservation>& frames,
                         const std::vector<Var>& w2, bool subtract_e) {
  const std::size_t k = u.value().dim(0);
  Var acc;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    Var r = conv2d(frames[t].x, u);
    if (subtract_e) r = r - frames[t].e;
    Var term = conv2d_kernel_grad(frames[t].x, w2[t] * r, k);
    acc = acc.valid() ? acc + term : term;
  }
  return scale(acc, 2.0 / static_cast<double>(frames.size()));
}

std::vector<Var> squared_weights(const std::vector<FrameObservation>& frames) {
  std::vector<Var> w2;
  w2.reserve(frames.size());
  for (const auto& f : frames) w2.push_back(f.w * f.w);
  return w2;
}

}  // namespace

double lambda_raw_for(double lambda) {
  if (!(lambda > 0)) throw std::invalid_argument("lambda must be positive");
  return lambda > 30 ? lambda : std::log(std::expm1(lambda));
}

bool SolverTrace::non_increasing() const {
  for (std::size_t i = 1; i < objectives.size(); ++i) {
    if (objectives[i] > objectives[i - 1]) return false;
  }
  return true;
}

bool SolverTrace::strictly_decreasing_while(double grad_tol) const {
  for (std::size_t i = 0; i < decreases.size(); ++i) {
    if (grad_norms[i] > grad_tol && !(decreases[i] > 0.0)) return false;
  }
  return true;
}

nlohmann::json SolverTrace::to_json() const {
  return nlohmann::json{{"objectives", objectives}, {"alphas", alphas}};
}

std::vector<FrameObservation> canonical_frames(std::span<const FrameObservation> frames) {
  if (frames.empty()) throw std::invalid_argument("aggregation: empty frame list");
  std::vector<FrameObservation> out(frames.begin(), frames.end());
  const std::size_t d = out.front().x.value().rank() == 3 ? out.front().x.value().dim(2) : 0;
  const std::size_t c = out.front().e.value().rank() == 3 ? out.front().e.value().dim(2) : 0;
  for (const auto& f : out) {
    const Tensor& x = f.x.value();
    const Tensor& e = f.e.value();
    const Tensor& w = f.w.value();
    if (x.rank() != 3 || e.rank() != 3 || e.shape() != w.shape() || x.dim(0) != e.dim(0) ||
        x.dim(1) != e.dim(1) || x.dim(2) != d || e.dim(2) != c) {
      throw ShapeError("aggregation: inconsistent frame shapes x=" + to_string(x.shape()) +
                       " e=" + to_string(e.shape()) + " w=" + to_string(w.shape()));
    }
  }
  std::stable_sort(out.begin(), out.end(), frame_less);
  return out;
}

Var objective(const Var& z, std::span<const FrameObservation> frames_in, const Var& lambda) {
  const auto frames = canonical_frames(frames_in);
  check_filter(z, frames);
  check_lambda(lambda);
  Var acc;
  for (const auto& f : frames) {
    Var term = squared_norm(f.w * (conv2d(f.x, z) - f.e));
    acc = acc.valid() ? acc + term : term;
  }
  return scale(acc, 1.0 / static_cast<double>(frames.size())) +
         lambda * squared_norm(z);
}

Var gradient(const Var& z, std::span<const FrameObservation> frames_in, const Var& lambda) {
  const auto frames = canonical_frames(frames_in);
  check_filter(z, frames);
  check_lambda(lambda);
  return weighted_normal_term(z, frames, squared_weights(frames), true) +
         scale(scale(z, lambda), 2.0);
}

Var hessian_apply(const Var& u, std::span<const FrameObservation> frames_in, const Var& lambda) {
  const auto frames = canonical_frames(frames_in);
  check_filter(u, frames);
  check_lambda(lambda);
  return weighted_normal_term(u, frames, squared_weights(frames), false) +
         scale(scale(u, lambda), 2.0);
}

namespace {

StepResult step_from(const Var& z, const Var& g, const Var& hg, double eps) {
  Var gg = dot(g, g);
  Var ghg = dot(g, hg);
  if (ghg.value().item() <= eps * gg.value().item()) {
    return {z, z.tape().constant(Tensor::scalar(0.0)), true};
  }
  Var alpha = gg / ghg;
  return {z - scale(g, alpha), alpha, false};
}

}  // namespace

StepResult sd_step(const Var& z, std::span<const FrameObservation> frames_in, const Var& lambda,
                   double step_guard_eps) {
  const auto frames = canonical_frames(frames_in);
  check_filter(z, frames);
  check_lambda(lambda);
  const auto w2 = squared_weights(frames);
  Var g = weighted_normal_term(z, frames, w2, true) + scale(scale(z, lambda), 2.0);
  Var hg = weighted_normal_term(g, frames, w2, false) + scale(scale(g, lambda), 2.0);
  return step_from(z, g, hg, step_guard_eps);
}

SolveResult solve(std::span<const FrameObservation> frames_in, const SolverParams& params) {
  const auto frames = canonical_frames(frames_in);
  if (params.kernel_size % 2 == 0) throw ShapeError("solve: kernel size must be odd");
  if (!params.lambda_raw.valid()) throw std::invalid_argument("solve: lambda_raw not bound");
  Tape& tape = frames.front().x.tape();
  const std::size_t k = params.kernel_size;
  const std::size_t d = frames.front().x.value().dim(2);
  const std::size_t c = frames.front().e.value().dim(2);
  const double inv_t = 1.0 / static_cast<double>(frames.size());

  Var lambda = softplus(params.lambda_raw);
  const auto w2 = squared_weights(frames);

  SolveResult result;
  SolverTrace& trace = result.trace;
  Var z = tape.constant(Tensor(Shape{k, k, d, c}));

  // f(z_0 = 0) directly; afterwards f(z - a g) = f(z) - (a |g|^2 - a^2 <g,Hg> / 2),
  // which stays exact where direct evaluation cannot resolve the decrease.
  double initial = 0.0;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    initial += dot(w2[t].value() * frames[t].e.value(), frames[t].e.value());
  }
  trace.objectives.push_back(inv_t * initial);

  for (std::size_t it = 0; it < params.num_iterations; ++it) {
    Var g = weighted_normal_term(z, frames, w2, true) + scale(scale(z, lambda), 2.0);
    Var hg = weighted_normal_term(g, frames, w2, false) + scale(scale(g, lambda), 2.0);
    const double gg = squared_norm(g.value());
    const double ghg = dot(g.value(), hg.value());
    StepResult step = step_from(z, g, hg, params.step_guard_eps);
    const double alpha = step.alpha.value().item();
    const double decrease = alpha * gg - 0.5 * alpha * alpha * ghg;
    trace.grad_norms.push_back(std::sqrt(gg));
    trace.alphas.push_back(alpha);
    trace.decreases.push_back(decrease);
    trace.objectives.push_back(trace.objectives.back() - decrease);
    z = step.z_next;
  }
  result.z = z;
  return result;
}

Var apply_filter(const Var& x, const Var& z) { return conv2d(x, z); }

double objective_value(const Tensor& z, std::span<const FrameTensors> frames, double lambda) {
  if (frames.empty()) throw std::invalid_argument("objective_value: empty frame list");
  double acc = 0.0;
  for (const auto& f : frames) {
    const Tensor r = kernels::conv2d(f.x, z) - f.e;
    const Tensor wr = f.w * r;
    acc += squared_norm(wr);
  }
  return acc / static_cast<double>(frames.size()) + lambda * squared_norm(z);
}

Tensor dense_oracle_solve(std::span<const FrameTensors> frames, double lambda,
                          std::size_t kernel_size) {
  if (frames.empty()) throw std::invalid_argument("dense_oracle_solve: empty frame list");
  if (kernel_size % 2 == 0) throw ShapeError("dense_oracle_solve: kernel size must be odd");
  const std::size_t k = kernel_size;
  const std::size_t d = frames.front().x.dim(2);
  const std::size_t c = frames.front().e.dim(2);
  const std::size_t n = k * k * d * c;
  if (n > kOracleMaxUnknowns) {
    throw std::invalid_argument("dense_oracle_solve: " + std::to_string(n) +
                                " unknowns exceeds limit " + std::to_string(kOracleMaxUnknowns));
  }
  const std::size_t patch = k * k * d;
  const double inv_t = 1.0 / static_cast<double>(frames.size());
  const std::ptrdiff_t p = static_cast<std::ptrdiff_t>(k - 1) / 2;

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(n));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  std::vector<double> row(patch);

  for (const auto& f : frames) {
    if (f.x.rank() != 3 || f.e.shape() != f.w.shape() || f.x.dim(0) != f.e.dim(0) ||
        f.x.dim(1) != f.e.dim(1) || f.x.dim(2) != d || f.e.dim(2) != c) {
      throw ShapeError("dense_oracle_solve: inconsistent frame shapes");
    }
    const auto h = static_cast<std::ptrdiff_t>(f.x.dim(0));
    const auto w = static_cast<std::ptrdiff_t>(f.x.dim(1));
    for (std::ptrdiff_t i = 0; i < h; ++i) {
      for (std::ptrdiff_t j = 0; j < w; ++j) {
        // Row of M_t for output pixel (i, j): the zero-padded K x K x D patch.
        for (std::size_t u = 0; u < k; ++u) {
          for (std::size_t v = 0; v < k; ++v) {
            const std::ptrdiff_t ii = i + static_cast<std::ptrdiff_t>(u) - p;
            const std::ptrdiff_t jj = j + static_cast<std::ptrdiff_t>(v) - p;
            const bool inside = ii >= 0 && ii < h && jj >= 0 && jj < w;
            for (std::size_t dd = 0; dd < d; ++dd) {
              row[(u * k + v) * d + dd] =
                  inside ? f.x.at(static_cast<std::size_t>(ii), static_cast<std::size_t>(jj), dd)
                         : 0.0;
            }
          }
        }
        for (std::size_t ch = 0; ch < c; ++ch) {
          const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
          const double wt = f.w.at(ui, uj, ch);
          const double w2 = wt * wt * inv_t;
          if (w2 == 0.0) continue;
          const double target = f.e.at(ui, uj, ch);
          for (std::size_t q = 0; q < patch; ++q) {
            if (row[q] == 0.0) continue;
            const auto iq = static_cast<Eigen::Index>(q * c + ch);
            b(iq) += w2 * row[q] * target;
            for (std::size_t r = 0; r < patch; ++r) {
              a(iq, static_cast<Eigen::Index>(r * c + ch)) += w2 * row[q] * row[r];
            }
          }
        }
      }
    }
  }
  a.diagonal().array() += lambda;

  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("dense_oracle_solve: normal matrix is not positive definite");
  }
  const Eigen::VectorXd solution = llt.solve(b);
  Tensor z(Shape{k, k, d, c});
  for (std::size_t i = 0; i < n; ++i) z[i] = solution(static_cast<Eigen::Index>(i));
  return z;
}

}  // namespace boxmask::aggregation
