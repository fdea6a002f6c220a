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
#include <gtest/gtest.h>

#include <sstream>

#include "boxmask/tensor.hpp"
#include "test_support.hpp"

namespace boxmask {
namespace {

TEST(TensorTest, DataLengthMustMatchShape) {
  EXPECT_THROW(Tensor(Shape{2, 3}, std::vector<double>(5)), ShapeError);
  Tensor t(Shape{2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_DOUBLE_EQ(t[5], 1.5);
}

TEST(TensorTest, DefaultIsEmptyAndScalarHasOneElement) {
  EXPECT_TRUE(Tensor{}.empty());
  Tensor s = Tensor::scalar(3.0);
  EXPECT_EQ(s.rank(), 0u);
  EXPECT_DOUBLE_EQ(s.item(), 3.0);
  EXPECT_THROW(Tensor(Shape{2}).item(), ShapeError);
}

TEST(TensorTest, ArithmeticRejectsMismatchedShapes) {
  EXPECT_THROW(Tensor(Shape{2}) + Tensor(Shape{3}), ShapeError);
  EXPECT_THROW(dot(Tensor(Shape{2, 1}), Tensor(Shape{2})), ShapeError);
}

TEST(TensorTest, BinaryLayoutIsLittleEndianHeaderThenValues) {
  Tensor t(Shape{1, 2}, std::vector<double>{1.0, -2.0});
  std::ostringstream out;
  write_tensor(out, t);
  const std::string bytes = out.str();
  ASSERT_EQ(bytes.size(), 8u * (1 + 2 + 2));
  EXPECT_EQ(bytes[0], 2);  // rank
  EXPECT_EQ(bytes[8], 1);  // first extent
  EXPECT_EQ(bytes[16], 2);
  // 1.0 = 0x3FF0000000000000, least significant byte first.
  EXPECT_EQ(static_cast<unsigned char>(bytes[24 + 7]), 0x3Fu);
  EXPECT_EQ(static_cast<unsigned char>(bytes[24 + 6]), 0xF0u);
}

TEST(TensorTest, SerializationRoundTripsRandomTensors) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    Shape shape;
    const std::size_t rank = testing::random_extent(rng, 0, 4);
    for (std::size_t r = 0; r < rank; ++r) shape.push_back(testing::random_extent(rng, 1, 4));
    const Tensor t = testing::random_tensor(shape, rng, -1e6, 1e6);
    std::stringstream buf;
    write_tensor(buf, t);
    EXPECT_EQ(read_tensor(buf), t);
  }
}

TEST(TensorTest, TruncatedStreamIsAnError) {
  std::stringstream buf;
  write_tensor(buf, Tensor(Shape{4}, 1.0));
  std::string bytes = buf.str();
  bytes.resize(bytes.size() - 3);
  std::stringstream cut(bytes);
  EXPECT_THROW(read_tensor(cut), std::runtime_error);
}

}  // namespace
}  // namespace boxmask
