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
#include "boxmask/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace boxmask::kernels {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) +
                     ", got shape " + to_string(t.shape()));
  }
}

std::size_t checked_kernel_size(const Tensor& kernel, const char* what) {
  require_rank(kernel, 4, what);
  const std::size_t k = kernel.dim(0);
  if (kernel.dim(1) != k) throw ShapeError(std::string(what) + ": kernel must be square");
  if (k % 2 == 0) throw ShapeError(std::string(what) + ": kernel size must be odd");
  return k;
}

// Patch matrix of shape (H*W) x (K*K*D); column (u*K+v)*D+d holds
// input[i+u-p, j+v-p, d] or zero outside the image.
RowMatrix im2col(const Tensor& input, std::size_t k) {
  const std::size_t h = input.dim(0), w = input.dim(1), d = input.dim(2);
  const std::ptrdiff_t p = static_cast<std::ptrdiff_t>(k - 1) / 2;
  RowMatrix cols = RowMatrix::Zero(static_cast<Eigen::Index>(h * w),
                                   static_cast<Eigen::Index>(k * k * d));
  const double* src = input.data().data();
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      double* row = cols.data() + (i * w + j) * k * k * d;
      for (std::size_t u = 0; u < k; ++u) {
        const std::ptrdiff_t a = static_cast<std::ptrdiff_t>(i + u) - p;
        if (a < 0 || a >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t v = 0; v < k; ++v) {
          const std::ptrdiff_t b = static_cast<std::ptrdiff_t>(j + v) - p;
          if (b < 0 || b >= static_cast<std::ptrdiff_t>(w)) continue;
          std::copy_n(src + (a * static_cast<std::ptrdiff_t>(w) + b) * d, d,
                      row + (u * k + v) * d);
        }
      }
    }
  }
  return cols;
}

void col2im_add(const RowMatrix& cols, std::size_t k, Tensor& out) {
  const std::size_t h = out.dim(0), w = out.dim(1), d = out.dim(2);
  const std::ptrdiff_t p = static_cast<std::ptrdiff_t>(k - 1) / 2;
  double* dst = out.data().data();
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const double* row = cols.data() + (i * w + j) * k * k * d;
      for (std::size_t u = 0; u < k; ++u) {
        const std::ptrdiff_t a = static_cast<std::ptrdiff_t>(i + u) - p;
        if (a < 0 || a >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t v = 0; v < k; ++v) {
          const std::ptrdiff_t b = static_cast<std::ptrdiff_t>(j + v) - p;
          if (b < 0 || b >= static_cast<std::ptrdiff_t>(w)) continue;
          double* cell = dst + (a * static_cast<std::ptrdiff_t>(w) + b) * d;
          const double* from = row + (u * k + v) * d;
          for (std::size_t c = 0; c < d; ++c) cell[c] += from[c];
        }
      }
    }
  }
}

ConstMap as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(rows),
                  static_cast<Eigen::Index>(cols));
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel) {
  require_rank(input, 3, "conv2d");
  const std::size_t k = checked_kernel_size(kernel, "conv2d");
  const std::size_t h = input.dim(0), w = input.dim(1), d = input.dim(2);
  if (kernel.dim(2) != d) {
    throw ShapeError("conv2d: input has " + std::to_string(d) +
                     " channels, kernel expects " + std::to_string(kernel.dim(2)));
  }
  const std::size_t c = kernel.dim(3);
  Tensor out(Shape{h, w, c});
  Map result(out.data().data(), static_cast<Eigen::Index>(h * w),
             static_cast<Eigen::Index>(c));
  const auto kmat = as_matrix(kernel, k * k * d, c);
  if (k == 1) {
    result.noalias() = as_matrix(input, h * w, d) * kmat;
  } else {
    result.noalias() = im2col(input, k) * kmat;
  }
  return out;
}

Tensor conv2d_transpose(const Tensor& grad_out, const Tensor& kernel) {
  require_rank(grad_out, 3, "conv2d_transpose");
  const std::size_t k = checked_kernel_size(kernel, "conv2d_transpose");
  const std::size_t h = grad_out.dim(0), w = grad_out.dim(1), c = grad_out.dim(2);
  if (kernel.dim(3) != c) throw ShapeError("conv2d_transpose: channel mismatch");
  const std::size_t d = kernel.dim(2);
  Tensor out(Shape{h, w, d});
  const auto g = as_matrix(grad_out, h * w, c);
  const auto kmat = as_matrix(kernel, k * k * d, c);
  if (k == 1) {
    Map result(out.data().data(), static_cast<Eigen::Index>(h * w),
               static_cast<Eigen::Index>(d));
    result.noalias() = g * kmat.transpose();
  } else {
    RowMatrix cols = g * kmat.transpose();
    col2im_add(cols, k, out);
  }
  return out;
}

Tensor conv2d_kernel_grad(const Tensor& input, const Tensor& grad_out,
                          std::size_t kernel_size) {
  require_rank(input, 3, "conv2d_kernel_grad");
  require_rank(grad_out, 3, "conv2d_kernel_grad");
  if (kernel_size % 2 == 0) throw ShapeError("conv2d_kernel_grad: kernel size must be odd");
  const std::size_t h = input.dim(0), w = input.dim(1), d = input.dim(2);
  if (grad_out.dim(0) != h || grad_out.dim(1) != w) {
    throw ShapeError("conv2d_kernel_grad: spatial mismatch " + to_string(input.shape()) +
                     " vs " + to_string(grad_out.shape()));
  }
  const std::size_t c = grad_out.dim(2), k = kernel_size;
  Tensor out(Shape{k, k, d, c});
  Map result(out.data().data(), static_cast<Eigen::Index>(k * k * d),
             static_cast<Eigen::Index>(c));
  const auto g = as_matrix(grad_out, h * w, c);
  if (k == 1) {
    result.noalias() = as_matrix(input, h * w, d).transpose() * g;
  } else {
    result.noalias() = im2col(input, k).transpose() * g;
  }
  return out;
}

Tensor add_bias(const Tensor& input, const Tensor& bias) {
  require_rank(input, 3, "add_bias");
  const std::size_t c = input.dim(2);
  if (bias.rank() != 1 || bias.dim(0) != c) throw ShapeError("add_bias: bias shape");
  Tensor out = input;
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += bias[i % c];
  return out;
}

Tensor bias_grad(const Tensor& grad_out) {
  const std::size_t c = grad_out.dim(2);
  Tensor out(Shape{c});
  auto g = grad_out.data();
  for (std::size_t i = 0; i < g.size(); ++i) out[i % c] += g[i];
  return out;
}

Tensor max_pool2(const Tensor& input, std::vector<std::uint32_t>* argmax) {
  require_rank(input, 3, "max_pool2");
  const std::size_t h = input.dim(0), w = input.dim(1), c = input.dim(2);
  if (h % 2 || w % 2) throw ShapeError("max_pool2: spatial extents must be even");
  Tensor out(Shape{h / 2, w / 2, c});
  if (argmax) argmax->assign(out.size(), 0);
  for (std::size_t i = 0; i < h / 2; ++i) {
    for (std::size_t j = 0; j < w / 2; ++j) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::size_t best = ((2 * i) * w + 2 * j) * c + ch;
        for (std::size_t di = 0; di < 2; ++di) {
          for (std::size_t dj = 0; dj < 2; ++dj) {
            const std::size_t idx = ((2 * i + di) * w + 2 * j + dj) * c + ch;
            if (input[idx] > input[best]) best = idx;
          }
        }
        const std::size_t o = (i * (w / 2) + j) * c + ch;
        out[o] = input[best];
        if (argmax) (*argmax)[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return out;
}

Tensor max_pool2_backward(const Tensor& grad_out, const Shape& input_shape,
                          const std::vector<std::uint32_t>& argmax) {
  Tensor out(input_shape);
  for (std::size_t o = 0; o < grad_out.size(); ++o) out[argmax[o]] += grad_out[o];
  return out;
}

Tensor avg_pool(const Tensor& input, std::size_t factor) {
  require_rank(input, 3, "avg_pool");
  const std::size_t h = input.dim(0), w = input.dim(1), c = input.dim(2);
  if (factor == 0 || h % factor || w % factor) {
    throw ShapeError("avg_pool: extents " + to_string(input.shape()) +
                     " not divisible by " + std::to_string(factor));
  }
  const std::size_t oh = h / factor, ow = w / factor;
  const double scale = 1.0 / static_cast<double>(factor * factor);
  Tensor out(Shape{oh, ow, c});
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t ch = 0; ch < c; ++ch)
        out.at(i / factor, j / factor, ch) += scale * input.at(i, j, ch);
  return out;
}

Tensor avg_pool_backward(const Tensor& grad_out, std::size_t factor) {
  const std::size_t oh = grad_out.dim(0), ow = grad_out.dim(1), c = grad_out.dim(2);
  const double scale = 1.0 / static_cast<double>(factor * factor);
  Tensor out(Shape{oh * factor, ow * factor, c});
  for (std::size_t i = 0; i < oh * factor; ++i)
    for (std::size_t j = 0; j < ow * factor; ++j)
      for (std::size_t ch = 0; ch < c; ++ch)
        out.at(i, j, ch) = scale * grad_out.at(i / factor, j / factor, ch);
  return out;
}

namespace {

struct Tap {
  std::size_t lo, hi;
  double frac;  // weight of `hi`
};

// Source taps for output index `o` when doubling an axis of length n.
Tap upsample_tap(std::size_t o, std::size_t n) {
  double s = (static_cast<double>(o) + 0.5) / 2.0 - 0.5;
  s = std::clamp(s, 0.0, static_cast<double>(n - 1));
  const auto lo = static_cast<std::size_t>(std::floor(s));
  const std::size_t hi = std::min(lo + 1, n - 1);
  return {lo, hi, s - static_cast<double>(lo)};
}

}  // namespace

Tensor upsample2(const Tensor& input) {
  require_rank(input, 3, "upsample2");
  const std::size_t h = input.dim(0), w = input.dim(1), c = input.dim(2);
  Tensor out(Shape{2 * h, 2 * w, c});
  for (std::size_t i = 0; i < 2 * h; ++i) {
    const Tap ti = upsample_tap(i, h);
    for (std::size_t j = 0; j < 2 * w; ++j) {
      const Tap tj = upsample_tap(j, w);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double top = (1 - tj.frac) * input.at(ti.lo, tj.lo, ch) +
                           tj.frac * input.at(ti.lo, tj.hi, ch);
        const double bot = (1 - tj.frac) * input.at(ti.hi, tj.lo, ch) +
                           tj.frac * input.at(ti.hi, tj.hi, ch);
        out.at(i, j, ch) = (1 - ti.frac) * top + ti.frac * bot;
      }
    }
  }
  return out;
}

Tensor upsample2_backward(const Tensor& grad_out) {
  const std::size_t h = grad_out.dim(0) / 2, w = grad_out.dim(1) / 2, c = grad_out.dim(2);
  Tensor out(Shape{h, w, c});
  for (std::size_t i = 0; i < 2 * h; ++i) {
    const Tap ti = upsample_tap(i, h);
    for (std::size_t j = 0; j < 2 * w; ++j) {
      const Tap tj = upsample_tap(j, w);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double g = grad_out.at(i, j, ch);
        out.at(ti.lo, tj.lo, ch) += (1 - ti.frac) * (1 - tj.frac) * g;
        out.at(ti.lo, tj.hi, ch) += (1 - ti.frac) * tj.frac * g;
        out.at(ti.hi, tj.lo, ch) += ti.frac * (1 - tj.frac) * g;
        out.at(ti.hi, tj.hi, ch) += ti.frac * tj.frac * g;
      }
    }
  }
  return out;
}

Tensor concat_channels(const std::vector<const Tensor*>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const std::size_t h = parts[0]->dim(0), w = parts[0]->dim(1);
  std::size_t total = 0;
  for (const Tensor* p : parts) {
    require_rank(*p, 3, "concat_channels");
    if (p->dim(0) != h || p->dim(1) != w) {
      throw ShapeError("concat_channels: spatial mismatch " + to_string(parts[0]->shape()) +
                       " vs " + to_string(p->shape()));
    }
    total += p->dim(2);
  }
  Tensor out(Shape{h, w, total});
  for (std::size_t px = 0; px < h * w; ++px) {
    double* dst = out.data().data() + px * total;
    for (const Tensor* p : parts) {
      const std::size_t c = p->dim(2);
      std::copy_n(p->data().data() + px * c, c, dst);
      dst += c;
    }
  }
  return out;
}

}  // namespace boxmask::kernels
