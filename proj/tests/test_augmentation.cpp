/*
 * Copyright 2026 The LithoCNN Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "lithocnn/augment.hpp"
#include "lithocnn/synth.hpp"

using namespace lithocnn;
namespace fs = std::filesystem;

namespace {

TensorF random_image(Index c, Index h, Index w, unsigned seed) {
  std::mt19937 g(seed);
  std::uniform_real_distribution<float> u(0, 1);
  TensorF t(Shape{c, h, w});
  for (auto& v : t.values()) v = u(g);
  return t;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lithocnn_test_aug_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Rotate, RightAngleHandWorked) {
  const TensorF x(Shape{1, 2, 2}, {1, 2, 3, 4});
  const TensorF y = rotate_right_angle(x, 90);
  EXPECT_EQ(y, TensorF(Shape{1, 2, 2}, {2, 4, 1, 3}));
  EXPECT_EQ(rotate(x, 90.0), y);
  EXPECT_EQ(rotate_right_angle(x, 180), TensorF(Shape{1, 2, 2}, {4, 3, 2, 1}));
}

TEST(Rotate, FourQuarterTurnsAreIdentity) {
  const TensorF x = random_image(3, 9, 9, 1);
  TensorF y = x;
  for (int i = 0; i < 4; ++i) y = rotate_right_angle(y, 90);
  EXPECT_EQ(y, x);
  EXPECT_EQ(rotate(x, 360.0), x);
  EXPECT_EQ(rotate(x, 0.0), x);
}

TEST(Rotate, SmallAngleKeepsSizeAndRange) {
  const TensorF x = random_image(3, 31, 31, 2);
  const TensorF y = rotate(x, 13.0);
  EXPECT_EQ(y.shape(), x.shape());
  EXPECT_GE(y.vector().minCoeff(), 0.0f);
  EXPECT_LE(y.vector().maxCoeff(), 1.0f);
  const TensorF c(Shape{1, 20, 20}, 0.4f);
  const TensorF rc = rotate(c, 7.0);
  for (auto v : rc.values()) EXPECT_FLOAT_EQ(v, 0.4f);  // mirrored borders: no fill leaks in
}

TEST(Photometric, BrightnessAndColorClamp) {
  const TensorF x(Shape{2, 1, 2}, {0.1f, 0.9f, 0.5f, 0.5f});
  EXPECT_EQ(adjust_brightness(x, 0.2), TensorF(Shape{2, 1, 2}, {0.3f, 1.0f, 0.7f, 0.7f}));
  const std::vector<double> gains{2.0, 0.5};
  EXPECT_EQ(color_shift(x, gains), TensorF(Shape{2, 1, 2}, {0.2f, 1.0f, 0.25f, 0.25f}));
  EXPECT_THROW(color_shift(x, std::vector<double>{1.0}), DimensionError);
}

TEST(Noise, ZeroSigmaIsIdentityAndSeeded) {
  const TensorF x = random_image(1, 8, 8, 3);
  EXPECT_EQ(gaussian_noise(x, 0.0, RngHandle(1, 1)), x);
  EXPECT_EQ(gaussian_noise(x, 0.1, RngHandle(1, 1)), gaussian_noise(x, 0.1, RngHandle(1, 1)));
  EXPECT_NE(gaussian_noise(x, 0.1, RngHandle(1, 1)), gaussian_noise(x, 0.1, RngHandle(1, 2)));
}

TEST(Blur, IdentityConstantAndOddOnly) {
  const TensorF x = random_image(3, 10, 12, 4);
  EXPECT_EQ(blur(x, 1), x);
  const TensorF c(Shape{3, 10, 12}, 0.6f);
  const TensorF bc = blur(c, 5);
  for (auto v : bc.values()) EXPECT_NEAR(v, 0.6f, 1e-6);
  EXPECT_THROW(blur(x, 4), ParameterError);
  // Interior pixel equals the 3x3 mean.
  const TensorF b = blur(x, 3);
  double s = 0;
  for (Index dy = -1; dy <= 1; ++dy)
    for (Index dx = -1; dx <= 1; ++dx) s += x(0, 5 + dy, 6 + dx);
  EXPECT_NEAR(b(0, 5, 6), s / 9, 1e-6);
}

TEST(Crop, BlankRectangleArea) {
  const TensorF x(Shape{1, 40, 50}, 1.0f);
  const TensorF y = random_crop(x, 0.25, RngHandle(5, 5), CropMode::blank, 0.0f);
  Index zeros = 0;
  for (auto v : y.values()) zeros += v == 0.0f;
  EXPECT_EQ(zeros, 10 * 13);  // ceil(0.25*40) x ceil(0.25*50)
  const TensorF r = random_crop(x, 0.25, RngHandle(5, 5), CropMode::resize);
  EXPECT_EQ(r.shape(), x.shape());
}

TEST(Pipeline, DeterministicAndInRange) {
  const auto p = AugmentationPipeline::defaults(7);
  EXPECT_NO_THROW(p.validate());
  const TensorF x = random_image(3, 64, 64, 5);
  for (std::uint64_t j = 1; j < 12; ++j) {
    const TensorF a = p.apply(x, p.variant_rng("tile", j));
    EXPECT_EQ(a, p.apply(x, p.variant_rng("tile", j)));
    EXPECT_EQ(a.shape(), x.shape());
    EXPECT_GE(a.vector().minCoeff(), 0.0f);
    EXPECT_LE(a.vector().maxCoeff(), 1.0f);
  }
  EXPECT_NE(p.apply(x, p.variant_rng("tile", 1)).vector(), p.apply(x, p.variant_rng("other", 1)).vector());
}

TEST(Pipeline, StepsDrawIndependentStreams) {
  // Disabling an earlier step must not change what a later step draws.
  AugmentationPipeline a;
  a.steps = {{AugOp::brightness, 1.0, 0.1, 0.1}, {AugOp::brightness, 1.0, -0.2, 0.2}};
  AugmentationPipeline b = a;
  b.steps[0].probability = 0.0;
  const TensorF x(Shape{1, 4, 4}, 0.5f);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const TensorF ya = a.apply(x, RngHandle(s, 1)), yb = b.apply(x, RngHandle(s, 1));
    EXPECT_NEAR(ya[0] - yb[0], 0.1f, 1e-6);
  }
}

TEST(Pipeline, JsonRoundTripAndValidation) {
  const auto p = AugmentationPipeline::defaults(3);
  EXPECT_EQ(to_json(pipeline_from_json(to_json(p))), to_json(p));
  AugmentationPipeline bad;
  bad.steps = {{AugOp::noise, 1.5, 0, 0.1}};
  EXPECT_THROW(bad.validate(), ParameterError);
  bad.steps = {{AugOp::random_crop, 0.5, 0.1, 1.0}};
  EXPECT_THROW(bad.validate(), ParameterError);
  EXPECT_THROW(aug_op_from_string("shear"), ParameterError);
}

TEST(Oversample, TargetsProvenanceAndDeterminism) {
  const fs::path dir = scratch("over");
  Manifest src;
  src.base_dir = dir / "src";
  src.records = synth_corpus(src.base_dir, {{Lithotype::granite, 3}, {Lithotype::siltstone, 5}}, 1, 0, 32);
  OversampleConfig cfg;
  cfg.pipeline = AugmentationPipeline::defaults(11);
  cfg.default_target = 8;
  cfg.targets[Lithotype::siltstone] = 5;
  const auto a = oversample(src, cfg, dir / "a");
  const auto b = oversample(src, cfg, dir / "b");
  ASSERT_EQ(a.size(), 13u);
  std::map<Lithotype, int> per;
  for (const auto& r : a) ++per[*r.label];
  EXPECT_EQ(per[Lithotype::granite], 8);
  EXPECT_EQ(per[Lithotype::siltstone], 5);
  std::set<std::string> sources;
  for (const auto& r : src.records) sources.insert(r.id);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(sources.count(a[i].source_id)) << a[i].id;
    EXPECT_EQ(a[i].id, b[i].id);
    EXPECT_EQ(read_image(dir / "a" / a[i].path).data, read_image(dir / "b" / b[i].path).data);
  }
  // Variant k of granite (3 originals) derives from original k mod 3.
  EXPECT_EQ(a[3].id, src.records[0].id + "_aug1");
  EXPECT_EQ(a[6].id, src.records[0].id + "_aug2");
  cfg.targets[Lithotype::siltstone] = 2;
  EXPECT_THROW(oversample(src, cfg, dir / "c"), DataError);
}

TEST(Oversample, LeakageDetection) {
  ManifestRecord held;
  held.id = "t1";
  held.source_id = "t1";
  ManifestRecord clean;
  clean.id = "t2";
  clean.source_id = "t2";
  ManifestRecord leaked;
  leaked.id = "t1_aug1";
  leaked.source_id = "t1";
  const std::vector<ManifestRecord> train{clean, leaked}, val{held};
  EXPECT_EQ(leakage(train, val), std::vector<std::string>{"t1_aug1"});
  EXPECT_TRUE(leakage(std::vector<ManifestRecord>{clean}, val).empty());
}

TEST(Rotate, RightAnglesPreservePixelMultiset) {
  const TensorF x = random_image(3, 7, 11, 6);
  std::vector<float> a(x.values().begin(), x.values().end());
  std::sort(a.begin(), a.end());
  for (int deg : {90, 180, 270}) {
    const TensorF y = rotate_right_angle(x, deg);
    std::vector<float> b(y.values().begin(), y.values().end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b) << deg;
  }
}
