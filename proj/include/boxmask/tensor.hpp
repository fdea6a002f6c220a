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

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace boxmask {

/// Raised on any extent disagreement between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Dense row-major array of doubles.
///
/// A default-constructed tensor is *empty* (rank 1, extent 0) and is used as
/// the "no value" marker throughout the tape. A rank-0 tensor holds a single
/// scalar. Spatial tensors are laid out H x W x C; convolution kernels are
/// K x K x D x C.
class Tensor {
 public:
  Tensor() : shape_{0} {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value) { return Tensor(Shape{}, value); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double& at(std::size_t u, std::size_t v, std::size_t d, std::size_t c) {
    return data_[((u * shape_[1] + v) * shape_[2] + d) * shape_[3] + c];
  }
  double at(std::size_t u, std::size_t v, std::size_t d, std::size_t c) const {
    return data_[((u * shape_[1] + v) * shape_[2] + d) * shape_[3] + c];
  }

  /// Value of a single-element tensor.
  double item() const;

  Tensor reshaped(Shape shape) const;
  bool all_finite() const noexcept;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

Tensor zeros_like(const Tensor& t);
Tensor full_like(const Tensor& t, double value);

double dot(const Tensor& a, const Tensor& b);
double squared_norm(const Tensor& t);
double sum(const Tensor& t);
double max_abs(const Tensor& t);

// In-place accumulation helpers used by backward rules and optimizers.
void add_into(Tensor& dst, const Tensor& src);
void axpy_into(Tensor& dst, double alpha, const Tensor& src);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

/// Flat binary encoding: rank and extents as little-endian u64, followed by
/// row-major little-endian f64 values.
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

}  // namespace boxmask
