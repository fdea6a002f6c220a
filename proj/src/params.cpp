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
#include "boxmask/params.hpp"

#include <cmath>
#include <stdexcept>

namespace boxmask {

void ParameterSet::add(const std::string& name, Tensor value) {
  if (!tensors_.emplace(name, std::move(value)).second) {
    throw std::invalid_argument("duplicate parameter '" + name + "'");
  }
}

const Tensor& ParameterSet::get(const std::string& name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

Tensor& ParameterSet::get(const std::string& name) {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.size();
  return n;
}

bool ParameterSet::same_layout(const ParameterSet& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  for (const auto& [name, t] : tensors_) {
    if (!other.contains(name) || other.get(name).shape() != t.shape()) return false;
  }
  return true;
}

BoundParameters BoundParameters::trainable(Tape& tape, const ParameterSet& params) {
  BoundParameters b;
  b.tape_ = &tape;
  for (const auto& [name, t] : params.tensors()) b.vars_.emplace(name, tape.leaf(t));
  return b;
}

BoundParameters BoundParameters::frozen(Tape& tape, const ParameterSet& params) {
  BoundParameters b;
  b.tape_ = &tape;
  for (const auto& [name, t] : params.tensors()) b.vars_.emplace(name, tape.constant(t));
  return b;
}

const Var& BoundParameters::operator[](const std::string& name) const {
  const auto it = vars_.find(name);
  if (it == vars_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

void declare_conv(ParameterSet& params, const std::string& name, std::size_t k, std::size_t in,
                  std::size_t out, std::mt19937_64& rng) {
  // He initialisation for ReLU networks.
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(k * k * in)));
  Tensor w(Shape{k, k, in, out});
  for (double& v : w.data()) v = normal(rng);
  params.add(name + ".weight", std::move(w));
  params.add(name + ".bias", Tensor(Shape{out}));
}

Var conv_layer(const BoundParameters& p, const std::string& name, const Var& x) {
  return add_bias(conv2d(x, p[name + ".weight"]), p[name + ".bias"]);
}

void declare_residual(ParameterSet& params, const std::string& name, std::size_t in,
                      std::size_t out, std::mt19937_64& rng) {
  declare_conv(params, name + ".conv1", 3, in, out, rng);
  declare_conv(params, name + ".conv2", 3, out, out, rng);
  if (in != out) declare_conv(params, name + ".shortcut", 1, in, out, rng);
}

Var residual_block(const BoundParameters& p, const std::string& name, const Var& x) {
  Var inner = conv_layer(p, name + ".conv2", relu(conv_layer(p, name + ".conv1", x)));
  const auto& vars = p.vars();
  Var shortcut = vars.count(name + ".shortcut.weight") ? conv_layer(p, name + ".shortcut", x) : x;
  return relu(shortcut + inner);
}

}  // namespace boxmask
