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
#include <map>
#include <random>
#include <string>

#include "boxmask/autodiff.hpp"

namespace boxmask {

/// Named trainable tensors, ordered by name.
class ParameterSet {
 public:
  void add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  const std::map<std::string, Tensor>& tensors() const { return tensors_; }
  std::map<std::string, Tensor>& tensors() { return tensors_; }
  std::size_t scalar_count() const;

  /// Same names and shapes.
  bool same_layout(const ParameterSet& other) const;

 private:
  std::map<std::string, Tensor> tensors_;
};

/// A ParameterSet placed on a tape, either as trainable leaves or as
/// constants.
class BoundParameters {
 public:
  static BoundParameters trainable(Tape& tape, const ParameterSet& params);
  static BoundParameters frozen(Tape& tape, const ParameterSet& params);

  const Var& operator[](const std::string& name) const;
  const std::map<std::string, Var>& vars() const { return vars_; }
  Tape& tape() const { return *tape_; }

 private:
  Tape* tape_ = nullptr;
  std::map<std::string, Var> vars_;
};

// Layer helpers. A conv layer named `n` owns `n.weight` (K x K x in x out)
// and `n.bias` (out).
void declare_conv(ParameterSet& params, const std::string& name, std::size_t k,
                  std::size_t in, std::size_t out, std::mt19937_64& rng);
Var conv_layer(const BoundParameters& p, const std::string& name, const Var& x);

/// relu(shortcut(x) + conv2(relu(conv1(x)))); the shortcut is a 1x1 conv
/// named `n.shortcut` when the channel count changes.
void declare_residual(ParameterSet& params, const std::string& name, std::size_t in,
                      std::size_t out, std::mt19937_64& rng);
Var residual_block(const BoundParameters& p, const std::string& name, const Var& x);

}  // namespace boxmask
