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
#include "boxmask/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "boxmask/kernels.hpp"

namespace boxmask {

const Tensor& Gradients::operator[](const Var& leaf) const {
  auto it = grads_.find(leaf.id());
  if (it == grads_.end()) {
    throw std::out_of_range("no gradient recorded for node " + std::to_string(leaf.id()) +
                            " (not a trainable leaf)");
  }
  return it->second;
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<NodeId>(nodes_.size() - 1));
}

Var Tape::leaf(Tensor value) {
  if (!value.all_finite()) throw NumericError("leaf: non-finite value");
  return push(Node{"leaf", {}, std::move(value), nullptr, true, true});
}

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw NumericError("constant: non-finite value");
  return push(Node{"constant", {}, std::move(value), nullptr, false, false});
}

Var Tape::record(const char* op, Tensor value, std::initializer_list<Var> parents,
                 BackwardFn backward) {
  return record(op, std::move(value), std::vector<Var>(parents), std::move(backward));
}

Var Tape::record(const char* op, Tensor value, const std::vector<Var>& parents,
                 BackwardFn backward) {
  if (!value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + op);
  }
  Node node{op, {}, std::move(value), std::move(backward), false, false};
  node.parents.reserve(parents.size());
  for (const Var& p : parents) {
    if (&p.tape() != this) throw std::logic_error(std::string(op) + ": operand from another tape");
    node.parents.push_back(p.id());
    node.requires_grad = node.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (!node.requires_grad) node.backward = nullptr;
  return push(std::move(node));
}

Gradients Tape::backward(const Var& loss) const {
  if (&loss.tape() != this) throw std::logic_error("backward: loss from another tape");
  if (loss.value().size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " + to_string(loss.shape()));
  }
  std::vector<Tensor> grads(nodes_.size());
  grads[loss.id()] = Tensor(loss.shape(), 1.0);

  std::vector<const Tensor*> inputs;
  std::vector<std::uint8_t> needs;
  std::vector<Tensor> input_grads;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (grads[id].empty() || !node.backward) continue;
    const std::size_t n = node.parents.size();
    inputs.assign(n, nullptr);
    needs.assign(n, 0);
    input_grads.assign(n, Tensor{});
    for (std::size_t i = 0; i < n; ++i) {
      inputs[i] = &nodes_[node.parents[i]].value;
      needs[i] = nodes_[node.parents[i]].requires_grad ? 1 : 0;
    }
    node.backward(BackwardContext{grads[id], node.value, inputs, needs}, input_grads);
    for (std::size_t i = 0; i < n; ++i) {
      if (!needs[i] || input_grads[i].empty()) continue;
      Tensor& dst = grads[node.parents[i]];
      if (dst.empty()) {
        dst = std::move(input_grads[i]);
      } else {
        add_into(dst, input_grads[i]);
      }
    }
    if (!node.trainable) grads[id] = Tensor{};
  }

  Gradients out;
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (!nodes_[id].trainable) continue;
    out.grads_[static_cast<NodeId>(id)] =
        grads[id].empty() ? zeros_like(nodes_[id].value) : std::move(grads[id]);
  }
  return out;
}

namespace {

Tape& common_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw std::logic_error("operands live on different tapes");
  return a.tape();
}

template <typename F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_scalar(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

void require_scalar(const Var& s, const char* what) {
  if (s.value().size() != 1 || s.value().rank() != 0) {
    throw ShapeError(std::string(what) + ": expected a rank-0 scalar, got " +
                     to_string(s.shape()));
  }
}

}  // namespace

Var operator+(const Var& a, const Var& b) {
  return common_tape(a, b).record(
      "add", a.value() + b.value(), {a, b},
      [](const BackwardContext& ctx, std::span<Tensor> g) {
        if (ctx.needs[0]) g[0] = ctx.grad;
        if (ctx.needs[1]) g[1] = ctx.grad;
      });
}

Var operator-(const Var& a, const Var& b) {
  return common_tape(a, b).record(
      "sub", a.value() - b.value(), {a, b},
      [](const BackwardContext& ctx, std::span<Tensor> g) {
        if (ctx.needs[0]) g[0] = ctx.grad;
        if (ctx.needs[1]) g[1] = -1.0 * ctx.grad;
      });
}

Var operator*(const Var& a, const Var& b) {
  return common_tape(a, b).record(
      "mul", a.value() * b.value(), {a, b},
      [](const BackwardContext& ctx, std::span<Tensor> g) {
        if (ctx.needs[0]) g[0] = ctx.grad * *ctx.inputs[1];
        if (ctx.needs[1]) g[1] = ctx.grad * *ctx.inputs[0];
      });
}

Var operator-(const Var& a) { return scale(a, -1.0); }

Var operator/(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "div");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] / b.value()[i];
  return common_tape(a, b).record(
      "div", std::move(out), {a, b},
      [](const BackwardContext& ctx, std::span<Tensor> g) {
        const Tensor& den = *ctx.inputs[1];
        if (ctx.needs[0]) {
          g[0] = Tensor(den.shape());
          for (std::size_t i = 0; i < den.size(); ++i) g[0][i] = ctx.grad[i] / den[i];
        }
        if (ctx.needs[1]) {
          g[1] = Tensor(den.shape());
          for (std::size_t i = 0; i < den.size(); ++i) {
            g[1][i] = -ctx.grad[i] * ctx.output[i] / den[i];
          }
        }
      });
}

Var scale(const Var& a, double s) {
  return a.tape().record("scale", s * a.value(), {a},
                         [s](const BackwardContext& ctx, std::span<Tensor> g) {
                           g[0] = s * ctx.grad;
                         });
}

Var scale(const Var& a, const Var& s) {
  require_scalar(s, "scale");
  return common_tape(a, s).record(
      "scale_var", s.value().item() * a.value(), {a, s},
      [](const BackwardContext& ctx, std::span<Tensor> g) {
        if (ctx.needs[0]) g[0] = ctx.inputs[1]->item() * ctx.grad;
        if (ctx.needs[1]) g[1] = Tensor::scalar(dot(ctx.grad, *ctx.inputs[0]));
      });
}

Var add_scalar(const Var& a, double s) {
  return a.tape().record("add_scalar", map(a.value(), [s](double v) { return v + s; }), {a},
                         [](const BackwardContext& ctx, std::span<Tensor> g) {
                           g[0] = ctx.grad;
                         });
}

Var relu(const Var& a) {
  return a.tape().record("relu", map(a.value(), [](double v) { return v > 0 ? v : 0.0; }), {a},
                         [](const BackwardContext& ctx, std::span<Tensor> g) {
                           const Tensor& x = *ctx.inputs[0];
                           g[0] = Tensor(x.shape());
                           for (std::size_t i = 0; i < x.size(); ++i) {
                             g[0][i] = x[i] > 0 ? ctx.grad[i] : 0.0;
                           }
                         });
}

Var sigmoid(const Var& a) {
  return a.tape().record("sigmoid", map(a.value(), sigmoid_scalar), {a},
                         [](const BackwardContext& ctx, std::span<Tensor> g) {
                           const Tensor& y = ctx.output;
                           g[0] = Tensor(y.shape());
                           for (std::size_t i = 0; i < y.size(); ++i) {
                             g[0][i] = ctx.grad[i] * y[i] * (1.0 - y[i]);
                           }
                         });
}

Var softplus(const Var& a) {
  return a.tape().record("softplus", map(a.value(), softplus_scalar), {a},
                         [](const BackwardContext& ctx, std::span<Tensor> g) {
                           const Tensor& x = *ctx.inputs[0];
                           g[0] = Tensor(x.shape());
                           for (std::size_t i = 0; i < x.size(); ++i) {
                             g[0][i] = ctx.grad[i] * sigmoid_scalar(x[i]);
                           }
                         });
}

Var sum(const Var& a) {
  return a.tape().record("sum", Tensor::scalar(sum(a.value())), {a},
                         [](const BackwardContext& ctx, std::span<Tensor> g) {
                           g[0] = full_like(*ctx.inputs[0], ctx.grad.item());
                         });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  return a.tape().record("mean", Tensor::scalar(sum(a.value()) / n), {a},
                         [n](const BackwardContext& ctx, std::span<Tensor> g) {
                           g[0] = full_like(*ctx.inputs[0], ctx.grad.item() / n);
                         });
}

Var dot(const Var& a, const Var& b) {
  return common_tape(a, b).record(
      "dot", Tensor::scalar(dot(a.value(), b.value())), {a, b},
      [](const BackwardContext& ctx, std::span<Tensor> g) {
        const double s = ctx.grad.item();
        if (ctx.needs[0]) g[0] = s * *ctx.inputs[1];
        if (ctx.needs[1]) g[1] = s * *ctx.inputs[0];
      });
}

Var squared_norm(const Var& a) {
  return a.tape().record("squared_norm", Tensor::scalar(squared_norm(a.value())), {a},
                         [](const BackwardContext& ctx, std::span<Tensor> g) {
                           g[0] = (2.0 * ctx.grad.item()) * *ctx.inputs[0];
                         });
}

Var concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  std::vector<const Tensor*> values;
  std::vector<std::size_t> widths;
  for (const Var& p : parts) {
    values.push_back(&p.value());
    widths.push_back(p.value().rank() == 3 ? p.value().dim(2) : 0);
  }
  return parts[0].tape().record(
      "concat_channels", kernels::concat_channels(values), parts,
      [widths](const BackwardContext& ctx, std::span<Tensor> g) {
        const std::size_t h = ctx.grad.dim(0), w = ctx.grad.dim(1), total = ctx.grad.dim(2);
        std::size_t offset = 0;
        for (std::size_t p = 0; p < widths.size(); ++p) {
          const std::size_t c = widths[p];
          if (ctx.needs[p]) {
            g[p] = Tensor(Shape{h, w, c});
            for (std::size_t px = 0; px < h * w; ++px) {
              std::copy_n(ctx.grad.data().data() + px * total + offset, c,
                          g[p].data().data() + px * c);
            }
          }
          offset += c;
        }
      });
}

Var max_pool2(const Var& a) {
  auto argmax = std::make_shared<std::vector<std::uint32_t>>();
  Tensor out = kernels::max_pool2(a.value(), argmax.get());
  return a.tape().record("max_pool2", std::move(out), {a},
                         [argmax](const BackwardContext& ctx, std::span<Tensor> g) {
                           g[0] = kernels::max_pool2_backward(ctx.grad, ctx.inputs[0]->shape(),
                                                              *argmax);
                         });
}

Var avg_pool(const Var& a, std::size_t factor) {
  return a.tape().record("avg_pool", kernels::avg_pool(a.value(), factor), {a},
                         [factor](const BackwardContext& ctx, std::span<Tensor> g) {
                           g[0] = kernels::avg_pool_backward(ctx.grad, factor);
                         });
}

Var upsample2(const Var& a) {
  return a.tape().record("upsample2", kernels::upsample2(a.value()), {a},
                         [](const BackwardContext& ctx, std::span<Tensor> g) {
                           g[0] = kernels::upsample2_backward(ctx.grad);
                         });
}

Var conv2d(const Var& input, const Var& kernel) {
  return common_tape(input, kernel).record(
      "conv2d", kernels::conv2d(input.value(), kernel.value()), {input, kernel},
      [](const BackwardContext& ctx, std::span<Tensor> g) {
        const Tensor& x = *ctx.inputs[0];
        const Tensor& k = *ctx.inputs[1];
        if (ctx.needs[0]) g[0] = kernels::conv2d_transpose(ctx.grad, k);
        if (ctx.needs[1]) g[1] = kernels::conv2d_kernel_grad(x, ctx.grad, k.dim(0));
      });
}

Var conv2d_transpose(const Var& grad_out, const Var& kernel) {
  return common_tape(grad_out, kernel).record(
      "conv2d_transpose", kernels::conv2d_transpose(grad_out.value(), kernel.value()),
      {grad_out, kernel}, [](const BackwardContext& ctx, std::span<Tensor> g) {
        const Tensor& go = *ctx.inputs[0];
        const Tensor& k = *ctx.inputs[1];
        if (ctx.needs[0]) g[0] = kernels::conv2d(ctx.grad, k);
        if (ctx.needs[1]) g[1] = kernels::conv2d_kernel_grad(ctx.grad, go, k.dim(0));
      });
}

Var conv2d_kernel_grad(const Var& input, const Var& grad_out, std::size_t kernel_size) {
  return common_tape(input, grad_out).record(
      "conv2d_kernel_grad",
      kernels::conv2d_kernel_grad(input.value(), grad_out.value(), kernel_size),
      {input, grad_out}, [](const BackwardContext& ctx, std::span<Tensor> g) {
        const Tensor& x = *ctx.inputs[0];
        const Tensor& r = *ctx.inputs[1];
        // d/dx <G, kgrad(x, r)> = conv2d_transpose(r, G); d/dr = conv2d(x, G)
        if (ctx.needs[0]) g[0] = kernels::conv2d_transpose(r, ctx.grad);
        if (ctx.needs[1]) g[1] = kernels::conv2d(x, ctx.grad);
      });
}

Var add_bias(const Var& input, const Var& bias) {
  return common_tape(input, bias).record(
      "add_bias", kernels::add_bias(input.value(), bias.value()), {input, bias},
      [](const BackwardContext& ctx, std::span<Tensor> g) {
        if (ctx.needs[0]) g[0] = ctx.grad;
        if (ctx.needs[1]) g[1] = kernels::bias_grad(ctx.grad);
      });
}

Var bce_with_logits(const Var& logits, const Tensor& targets) {
  require_same_shape(logits.value(), targets, "bce_with_logits");
  const Tensor& l = logits.value();
  const double n = static_cast<double>(l.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) {
    // -[g log s(l) + (1-g) log(1-s(l))] = softplus(l) - g*l
    acc += softplus_scalar(l[i]) - targets[i] * l[i];
  }
  return logits.tape().record(
      "bce_with_logits", Tensor::scalar(acc / n), {logits},
      [targets, n](const BackwardContext& ctx, std::span<Tensor> g) {
        const Tensor& x = *ctx.inputs[0];
        const double s = ctx.grad.item() / n;
        g[0] = Tensor(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) {
          g[0][i] = s * (sigmoid_scalar(x[i]) - targets[i]);
        }
      });
}

}  // namespace boxmask
