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

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace boxmask {
namespace {

using testing::random_extent;
using testing::random_tensor;

TEST(Conv2dTest, OneByOneKernelIsScalarMultiply) {
  const Tensor in(Shape{3, 3, 1}, 2.0);
  const Tensor k(Shape{1, 1, 1, 1}, 3.0);
  const Tensor out = kernels::conv2d(in, k);
  ASSERT_EQ(out.shape(), (Shape{3, 3, 1}));
  for (double v : out.data()) EXPECT_DOUBLE_EQ(v, 6.0);
}

TEST(Conv2dTest, ZeroKernelGivesZeroOutput) {
  std::mt19937_64 rng(1);
  const Tensor out = kernels::conv2d(random_tensor({5, 4, 3}, rng), Tensor(Shape{3, 3, 3, 2}));
  EXPECT_EQ(max_abs(out), 0.0);
}

TEST(Conv2dTest, MatchesLoopNestReference) {
  std::mt19937_64 rng(2);
  const Tensor in = random_tensor({4, 4, 2}, rng);
  const Tensor k = random_tensor({3, 3, 2, 1}, rng);
  const Tensor expected = testing::conv2d_reference(in, k);
  const Tensor got = kernels::conv2d(in, k);
  ASSERT_EQ(got.shape(), expected.shape());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expected[i], 1e-14);
}

TEST(Conv2dTest, MatchesLoopNestReferenceAcrossShapes) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t k = 2 * random_extent(rng, 0, 2) + 1;
    const Tensor in = random_tensor({random_extent(rng, 1, 7), random_extent(rng, 1, 7),
                                     random_extent(rng, 1, 4)},
                                    rng);
    const Tensor kern = random_tensor({k, k, in.dim(2), random_extent(rng, 1, 4)}, rng);
    EXPECT_LT(testing::relative_error(kernels::conv2d(in, kern),
                                      testing::conv2d_reference(in, kern)),
              1e-14);
  }
}

TEST(Conv2dTest, RejectsEvenKernelAndChannelMismatch) {
  EXPECT_THROW(kernels::conv2d(Tensor(Shape{3, 3, 1}), Tensor(Shape{2, 2, 1, 1})), ShapeError);
  EXPECT_THROW(kernels::conv2d(Tensor(Shape{3, 3, 2}), Tensor(Shape{3, 3, 1, 1})), ShapeError);
  EXPECT_THROW(kernels::conv2d_transpose(Tensor(Shape{3, 3, 2}), Tensor(Shape{3, 3, 1, 1})),
               ShapeError);
  EXPECT_THROW(kernels::conv2d_kernel_grad(Tensor(Shape{3, 3, 1}), Tensor(Shape{3, 4, 1}), 3),
               ShapeError);
}

TEST(Conv2dTransposeTest, ZeroGradientGivesZero) {
  std::mt19937_64 rng(4);
  const Tensor k = random_tensor({3, 3, 2, 3}, rng);
  EXPECT_EQ(max_abs(kernels::conv2d_transpose(Tensor(Shape{4, 5, 3}), k)), 0.0);
  EXPECT_EQ(max_abs(kernels::conv2d_kernel_grad(random_tensor({4, 5, 2}, rng),
                                                Tensor(Shape{4, 5, 3}), 3)),
            0.0);
}

// <conv2d(x, z), u> = <x, conv2d_transpose(u, z)> = <z, conv2d_kernel_grad(x, u)>
TEST(Conv2dTransposeTest, AdjointIdentitiesHoldOnRandomInstances) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t k = 2 * random_extent(rng, 0, 2) + 1;
    const Shape xs{random_extent(rng, 1, 8), random_extent(rng, 1, 8), random_extent(rng, 1, 4)};
    const std::size_t c = random_extent(rng, 1, 4);
    const Tensor x = random_tensor(xs, rng);
    const Tensor z = random_tensor({k, k, xs[2], c}, rng);
    const Tensor u = random_tensor({xs[0], xs[1], c}, rng);
    const double lhs = dot(kernels::conv2d(x, z), u);
    EXPECT_LE(testing::relative_error(lhs, dot(x, kernels::conv2d_transpose(u, z))), 1e-12)
        << "trial " << trial;
    EXPECT_LE(testing::relative_error(lhs, dot(z, kernels::conv2d_kernel_grad(x, u, k))), 1e-12)
        << "trial " << trial;
  }
}

TEST(PoolingTest, MaxPoolPicksWindowMaximum) {
  Tensor in(Shape{2, 2, 1}, std::vector<double>{1.0, 4.0, -2.0, 3.0});
  std::vector<std::uint32_t> argmax;
  const Tensor out = kernels::max_pool2(in, &argmax);
  EXPECT_DOUBLE_EQ(out.item(), 4.0);
  EXPECT_EQ(argmax[0], 1u);
  EXPECT_THROW(kernels::max_pool2(Tensor(Shape{3, 2, 1}), nullptr), ShapeError);
}

TEST(PoolingTest, AveragePoolAndUpsampleAdjointsHold) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Shape s{2 * random_extent(rng, 1, 4), 2 * random_extent(rng, 1, 4),
                  random_extent(rng, 1, 3)};
    const Tensor x = random_tensor(s, rng);
    const Tensor y = random_tensor({s[0] / 2, s[1] / 2, s[2]}, rng);
    EXPECT_LE(testing::relative_error(dot(kernels::avg_pool(x, 2), y),
                                      dot(x, kernels::avg_pool_backward(y, 2))),
              1e-12);
    const Tensor big = random_tensor({s[0] * 2, s[1] * 2, s[2]}, rng);
    EXPECT_LE(testing::relative_error(dot(kernels::upsample2(x), big),
                                      dot(x, kernels::upsample2_backward(big))),
              1e-12);
  }
}

TEST(PoolingTest, UpsamplePreservesConstants) {
  const Tensor out = kernels::upsample2(Tensor(Shape{3, 2, 2}, 0.25));
  ASSERT_EQ(out.shape(), (Shape{6, 4, 2}));
  for (double v : out.data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

}  // namespace
}  // namespace boxmask
