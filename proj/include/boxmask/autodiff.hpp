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
#include <functional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "boxmask/tensor.hpp"

namespace boxmask {

/// Raised when an op produces NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Tape;
using NodeId = std::uint32_t;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  NodeId id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  NodeId id_ = 0;
};

struct BackwardContext {
  const Tensor& grad;    // d loss / d output
  const Tensor& output;
  std::span<const Tensor* const> inputs;
  std::span<const std::uint8_t> needs;  // nonzero where an input wants a gradient
};

/// Fills `input_grads[i]` for every i with needs[i] set. Entries left empty
/// are treated as zero.
using BackwardFn = std::function<void(const BackwardContext&, std::span<Tensor> input_grads)>;

/// Gradients of a scalar with respect to every trainable leaf of a tape.
class Gradients {
 public:
  /// Gradient for `leaf`; zeros when the leaf is not on any path to the loss.
  const Tensor& operator[](const Var& leaf) const;
  bool contains(const Var& leaf) const { return grads_.count(leaf.id()) != 0; }

 private:
  friend class Tape;
  std::unordered_map<NodeId, Tensor> grads_;
};

/// Append-only record of taped operations. Node ids are assigned in creation
/// order, so reverse id order is a reverse topological order. A tape is
/// confined to one thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Trainable leaf: receives a gradient from backward().
  Var leaf(Tensor value);
  /// Non-trainable input.
  Var constant(Tensor value);

  /// Records an op result. Used by the op library; throws NumericError on
  /// non-finite values.
  Var record(const char* op, Tensor value, std::initializer_list<Var> parents,
             BackwardFn backward);
  Var record(const char* op, Tensor value, const std::vector<Var>& parents,
             BackwardFn backward);

  Gradients backward(const Var& loss) const;

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  const char* op(NodeId id) const { return nodes_[id].op; }
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    const char* op;
    std::vector<NodeId> parents;
    Tensor value;
    BackwardFn backward;
    bool requires_grad = false;
    bool trainable = false;
  };

  Var push(Node node);
  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

// ---- elementwise suite -----------------------------------------------------

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator-(const Var& a);
/// Elementwise quotient; used on scalars by the solver's step length.
Var operator/(const Var& a, const Var& b);

Var scale(const Var& a, double s);
/// Tensor times a rank-0 Var.
Var scale(const Var& a, const Var& s);
Var add_scalar(const Var& a, double s);

Var relu(const Var& a);
Var sigmoid(const Var& a);
Var softplus(const Var& a);

Var sum(const Var& a);
Var mean(const Var& a);
Var dot(const Var& a, const Var& b);
Var squared_norm(const Var& a);

Var concat_channels(const std::vector<Var>& parts);
Var max_pool2(const Var& a);
Var avg_pool(const Var& a, std::size_t factor);
Var upsample2(const Var& a);

// ---- convolution family ----------------------------------------------------

Var conv2d(const Var& input, const Var& kernel);
Var conv2d_transpose(const Var& grad_out, const Var& kernel);
Var conv2d_kernel_grad(const Var& input, const Var& grad_out, std::size_t kernel_size);
Var add_bias(const Var& input, const Var& bias);

/// Pixel-mean binary cross-entropy of sigmoid(logits) against fixed targets,
/// evaluated in the log-sigmoid form.
Var bce_with_logits(const Var& logits, const Tensor& targets);

}  // namespace boxmask
