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
#include <vector>

#include "boxmask/tensor.hpp"

// Untaped numeric kernels. All convolutions are stride 1 with "same" zero
// padding of (K-1)/2 on every spatial side.
namespace boxmask::kernels {

/// out[i,j,c] = sum_{u,v,d} in[i+u-p, j+v-p, d] * kernel[u,v,d,c]
Tensor conv2d(const Tensor& input, const Tensor& kernel);

/// Adjoint of conv2d in its input argument: H x W x C -> H x W x D.
Tensor conv2d_transpose(const Tensor& grad_out, const Tensor& kernel);

/// Adjoint of conv2d in its kernel argument. `kernel_size` is K.
Tensor conv2d_kernel_grad(const Tensor& input, const Tensor& grad_out,
                          std::size_t kernel_size);

/// Adds a per-channel bias to an H x W x C tensor.
Tensor add_bias(const Tensor& input, const Tensor& bias);
Tensor bias_grad(const Tensor& grad_out);

/// 2x2 max-pool, stride 2. `argmax` receives the flat input index chosen for
/// each output element.
Tensor max_pool2(const Tensor& input, std::vector<std::uint32_t>* argmax);
Tensor max_pool2_backward(const Tensor& grad_out, const Shape& input_shape,
                          const std::vector<std::uint32_t>& argmax);

/// Non-overlapping f x f average pool.
Tensor avg_pool(const Tensor& input, std::size_t factor);
Tensor avg_pool_backward(const Tensor& grad_out, std::size_t factor);

/// Bilinear 2x upsampling with half-pixel centers and edge clamping.
Tensor upsample2(const Tensor& input);
Tensor upsample2_backward(const Tensor& grad_out);

Tensor concat_channels(const std::vector<const Tensor*>& parts);

}  // namespace boxmask::kernels
