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
#include "boxmask/geometry.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"

namespace boxmask {
namespace {

using testing::random_tensor;

TEST(BoxTest, RasterizeMatchesContains) {
  const BoundingBox b{3, 2, 4, 5};
  const Tensor r = rasterize_box(b, 10, 12);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 12; ++j)
      EXPECT_EQ(r.at(i, j, 0), b.contains(static_cast<int>(j), static_cast<int>(i)) ? 1.0 : 0.0);
}

TEST(BoxTest, RasterizeClipsPartiallyOutsideBox) {
  const Tensor r = rasterize_box({-2, -1, 4, 3}, 5, 5);
  double sum = 0;
  for (double v : r.data()) sum += v;
  EXPECT_EQ(sum, 2.0 * 2.0);
}

TEST(BoxTest, RejectsDegenerateOrOutsideBoxes) {
  EXPECT_THROW(validate_box({0, 0, 0, 3}, 8, 8), std::invalid_argument);
  EXPECT_THROW(validate_box({8, 0, 2, 2}, 8, 8), std::invalid_argument);
  EXPECT_THROW(validate_box({-3, 0, 3, 2}, 8, 8), std::invalid_argument);
  EXPECT_NO_THROW(validate_box({7, 7, 1, 1}, 8, 8));
}

TEST(BoxTest, BoxFromMaskInvertsRasterize) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int w = 1 + static_cast<int>(rng() % 10), h = 1 + static_cast<int>(rng() % 10);
    const BoundingBox b{static_cast<int>(rng() % (20 - w)), static_cast<int>(rng() % (20 - h)), w, h};
    EXPECT_EQ(box_from_mask(rasterize_box(b, 20, 20)), b);
  }
  EXPECT_THROW(box_from_mask(Tensor(Shape{4, 4, 1})), std::invalid_argument);
}

TEST(BoxTest, FlipTwiceIsIdentity) {
  std::mt19937_64 rng(5);
  const Tensor img = random_tensor({7, 9, 3}, rng);
  EXPECT_EQ(flip_horizontal(flip_horizontal(img)), img);
  const BoundingBox b{1, 2, 3, 4};
  EXPECT_EQ(flip_horizontal(flip_horizontal(b, 9), 9), b);
  // flipped box covers the flipped raster
  EXPECT_EQ(rasterize_box(flip_horizontal(b, 9), 7, 9),
            flip_horizontal(rasterize_box(b, 7, 9)));
}

TEST(CropTest, WholeImageAtNativeSizeIsIdentity) {
  std::mt19937_64 rng(7);
  const Tensor img = random_tensor({16, 16, 3}, rng);
  const auto crop = crop_resample(img, nullptr, {0, 0, 16, 16}, 1.0, 16, 16);
  EXPECT_DOUBLE_EQ(crop.transform.scale, 1.0);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(crop.patch[i], img[i], 1e-12);
  EXPECT_EQ(crop.box, (BoundingBox{0, 0, 16, 16}));
}

TEST(CropTest, IntegerUpsamplingOfConstantRegionIsExact) {
  // A constant image resamples to the same constant anywhere inside the crop.
  const Tensor img(Shape{32, 32, 1}, 0.25);
  const auto crop = crop_resample(img, nullptr, {12, 12, 4, 4}, 2.0, 32, 32);
  EXPECT_DOUBLE_EQ(crop.transform.scale, 4.0);
  for (double v : crop.patch.data()) EXPECT_DOUBLE_EQ(v, 0.25);
  EXPECT_EQ(crop.box, (BoundingBox{8, 8, 16, 16}));
}

TEST(CropTest, ClipsAtImageBorderAndPadsWithZeros) {
  const Tensor img(Shape{20, 40, 1}, 1.0);
  const auto crop = crop_resample(img, nullptr, {0, 0, 10, 10}, 4.0, 16, 16);
  // region [0,25) x [0,20) after clipping, fitted by the width
  EXPECT_DOUBLE_EQ(crop.transform.x1, 25.0);
  EXPECT_DOUBLE_EQ(crop.transform.y1, 20.0);
  EXPECT_DOUBLE_EQ(crop.transform.scale, 16.0 / 25.0);
  EXPECT_EQ(crop.patch.at(0, 15, 0), 1.0);
  EXPECT_EQ(crop.patch.at(15, 0, 0), 0.0);  // below the used rows
  EXPECT_EQ(crop.patch.at(12, 0, 0), 1.0);
}

TEST(CropTest, MaskIsBinaryAndBoxMapsBack) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const BoundingBox b{static_cast<int>(rng() % 30) + 5, static_cast<int>(rng() % 30) + 5,
                        static_cast<int>(rng() % 12) + 3, static_cast<int>(rng() % 12) + 3};
    const Tensor img = random_tensor({64, 64, 3}, rng, 0, 1);
    const Tensor mask = rasterize_box(b, 64, 64);
    const auto crop = crop_resample(img, &mask, b, 3.0, 48, 48);
    ASSERT_TRUE(crop.mask.has_value());
    for (double v : crop.mask->data()) EXPECT_TRUE(v == 0.0 || v == 1.0);
    const BoundingBox back = crop.transform.box_to_image(crop.box);
    EXPECT_LE(std::abs(back.x - b.x), 1);
    EXPECT_LE(std::abs(back.y - b.y), 1);
    EXPECT_LE(std::abs(back.x_max() - b.x_max()), 1);
    EXPECT_LE(std::abs(back.y_max() - b.y_max()), 1);
  }
}

TEST(CropTest, ResampleToImageRoundTripsSmoothMaps) {
  // A linear ramp survives crop then paste back up to bilinear edge effects.
  Tensor img(Shape{40, 40, 1});
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t j = 0; j < 40; ++j) img.at(i, j, 0) = 0.01 * i + 0.02 * j;
  const BoundingBox b{14, 14, 8, 8};
  const auto crop = crop_resample(img, nullptr, b, 2.0, 32, 32);
  const Tensor back = resample_to_image(crop.patch, crop.transform, -1.0);
  EXPECT_EQ(back.at(0, 0, 0), -1.0);
  for (int i = 12; i < 24; ++i)
    for (int j = 12; j < 24; ++j) EXPECT_NEAR(back.at(i, j, 0), img.at(i, j, 0), 1e-9);
}

TEST(CropTest, RejectsBadArguments) {
  const Tensor img(Shape{8, 8, 3});
  EXPECT_THROW(crop_resample(img, nullptr, {0, 0, 2, 2}, 0.5, 8, 8), std::invalid_argument);
  EXPECT_THROW(crop_resample(img, nullptr, {0, 0, 2, 2}, 2, 0, 8), std::invalid_argument);
  const Tensor wrong(Shape{4, 4, 1});
  EXPECT_THROW(crop_resample(img, &wrong, {0, 0, 2, 2}, 2, 8, 8), ShapeError);
}

}  // namespace
}  // namespace boxmask
