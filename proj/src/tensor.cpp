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
#include "boxmask/tensor.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>

namespace boxmask {

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + to_string(shape_));
  }
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("item() on tensor of shape " + to_string(shape_));
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor zeros_like(const Tensor& t) { return Tensor(t.shape(), 0.0); }
Tensor full_like(const Tensor& t, double value) { return Tensor(t.shape(), value); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " +
                     to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double squared_norm(const Tensor& t) {
  double acc = 0.0;
  for (double v : t.data()) acc += v * v;
  return acc;
}

double sum(const Tensor& t) {
  double acc = 0.0;
  for (double v : t.data()) acc += v;
  return acc;
}

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (double v : t.data()) m = std::max(m, std::abs(v));
  return m;
}

void add_into(Tensor& dst, const Tensor& src) {
  require_same_shape(dst, src, "add_into");
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

void axpy_into(Tensor& dst, double alpha, const Tensor& src) {
  require_same_shape(dst, src, "axpy_into");
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += alpha * s[i];
}

namespace {

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, const char* what, F f) {
  require_same_shape(a, b, what);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> buf{};
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(buf.data(), buf.size());
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!in) throw std::runtime_error("read_tensor: truncated stream");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
  return v;
}

}  // namespace

Tensor operator+(const Tensor& a, const Tensor& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}
Tensor operator-(const Tensor& a, const Tensor& b) {
  return zip(a, b, "sub", [](double x, double y) { return x - y; });
}
Tensor operator*(const Tensor& a, const Tensor& b) {
  return zip(a, b, "mul", [](double x, double y) { return x * y; });
}
Tensor operator*(double s, const Tensor& a) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
  return out;
}

void write_tensor(std::ostream& out, const Tensor& t) {
  put_u64(out, t.rank());
  for (std::size_t e : t.shape()) put_u64(out, e);
  for (double v : t.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw std::runtime_error("write_tensor: stream failure");
}

Tensor read_tensor(std::istream& in) {
  const std::uint64_t rank = get_u64(in);
  if (rank > 8) throw std::runtime_error("read_tensor: implausible rank");
  Shape shape(rank);
  for (auto& e : shape) e = get_u64(in);
  std::vector<double> data(shape_size(shape));
  for (auto& v : data) v = std::bit_cast<double>(get_u64(in));
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace boxmask
