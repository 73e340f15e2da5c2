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

#include <filesystem>
#include <fstream>
#include <random>

#include "lithocnn/image.hpp"
#include "lithocnn/manifest.hpp"

using namespace lithocnn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lithocnn_test_image_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

CoreBoxImage column(Index h, Index w, std::optional<double> dpi, double top = 10.0, double bottom = 100.0) {
  CoreBoxImage img;
  img.pixels = Image8(h, w, 3);
  for (std::size_t i = 0; i < img.pixels.data.size(); ++i) img.pixels.data[i] = static_cast<std::uint8_t>(i % 251);
  img.dpi = dpi;
  img.well_id = "W";
  img.depth_top_m = top;
  img.depth_bottom_m = bottom;
  return img;
}

}  // namespace

TEST(Resize, HalfPixelCentersHandWorked) {
  const TensorF x(Shape{1, 2, 2}, {0, 1, 0, 1});
  const TensorF y = resize_bilinear(x, 2, 4);
  const float expected[4] = {0.0f, 0.25f, 0.75f, 1.0f};
  for (Index r = 0; r < 2; ++r)
    for (Index c = 0; c < 4; ++c) EXPECT_FLOAT_EQ(y(0, r, c), expected[c]);
}

TEST(Resize, IdentityAndConstant) {
  std::mt19937 g(1);
  TensorF x(Shape{3, 227, 227});
  std::uniform_real_distribution<float> u(0, 1);
  for (auto& v : x.values()) v = u(g);
  EXPECT_EQ(resize_bilinear(x, 227, 227), x);
  const TensorF c(Shape{1, 40, 30}, 0.3f);
  const TensorF r = resize_bilinear(c, 227, 227);
  for (auto v : r.values()) EXPECT_FLOAT_EQ(v, 0.3f);
  EXPECT_THROW(resize_bilinear(TensorF(Shape{1, 1, 5}), 4, 4), DimensionError);
}

TEST(Resize, OutputWithinSourceRange) {
  std::mt19937 g(2);
  std::uniform_real_distribution<float> u(0.2f, 0.7f);
  for (int trial = 0; trial < 20; ++trial) {
    TensorF x(Shape{2, 5 + trial, 7 + trial});
    for (auto& v : x.values()) v = u(g);
    const TensorF y = resize_bilinear(x, 13 + 3 * trial, 11 + trial);
    EXPECT_GE(y.vector().minCoeff(), x.vector().minCoeff());
    EXPECT_LE(y.vector().maxCoeff(), x.vector().maxCoeff());
  }
}

TEST(Normalize, ValuesAndRoundTrip) {
  Image8 img(1, 256, 1);
  for (int i = 0; i < 256; ++i) img.data[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
  const TensorF t = normalize(img);
  EXPECT_EQ(t[255], 1.0f);
  EXPECT_EQ(t[0], 0.0f);
  EXPECT_FLOAT_EQ(t[51], 0.2f);
  EXPECT_EQ(denormalize(t).data, img.data);
}

TEST(Grayscale, StandardWeights) {
  const TensorF red(Shape{3, 1, 1}, {1, 0, 0});
  EXPECT_FLOAT_EQ(to_grayscale(red)[0], 0.299f);
  EXPECT_FLOAT_EQ(to_grayscale(TensorF(Shape{3, 1, 1}, {1, 1, 1}))[0], 1.0f);
  EXPECT_EQ(to_grayscale(TensorF(Shape{3, 1, 1}, {0, 0, 0}))[0], 0.0f);
  for (int i = 0; i <= 255; ++i) {
    const float v = static_cast<float>(i) / 255.0f;
    EXPECT_EQ(to_grayscale(TensorF(Shape{3, 1, 1}, {v, v, v}))[0], v);
  }
}

TEST(Crop, NominalTileSize) {
  EXPECT_EQ(tile_size_px(150), 606);
  EXPECT_EQ(tile_size_px(300), 1212);
  EXPECT_EQ(tile_size_px(150, 5), 303);
  EXPECT_THROW(tile_size_px(0), DataError);
}

TEST(Crop, TwoTilesFromTwoTileColumn) {
  const auto tiles = crop_samples(column(1212, 606, 150.0));
  ASSERT_EQ(tiles.size(), 2u);
  EXPECT_EQ(tiles[0].pixels.height, 606);
  EXPECT_DOUBLE_EQ(tiles[0].depth_top_m, 10.0);
  EXPECT_DOUBLE_EQ(tiles[1].depth_bottom_m, 10.2);
}

TEST(Crop, RemainderRule) {
  std::vector<std::string> warnings;
  // 302 px remainder (< half of 606) is dropped with a warning.
  EXPECT_EQ(crop_samples(column(1212 + 302, 606, 150.0), 10, &warnings).size(), 2u);
  EXPECT_FALSE(warnings.empty());
  // 303 px remainder is bottom-aligned into a third full tile.
  const auto tiles = crop_samples(column(1212 + 303, 606, 150.0));
  ASSERT_EQ(tiles.size(), 3u);
  const auto src = column(1212 + 303, 606, 150.0);
  EXPECT_EQ(tiles[2].pixels.data.front(), src.pixels.data[static_cast<std::size_t>((1212 + 303 - 606) * 606 * 3)]);
  warnings.clear();
  EXPECT_TRUE(crop_samples(column(200, 606, 150.0), 10, &warnings).empty());
  EXPECT_FALSE(warnings.empty());
}

TEST(Crop, IntervalsDisjointAndInsideImage) {
  const auto tiles = crop_samples(column(606 * 7 + 400, 700, 150.0, 3.0, 3.8));
  ASSERT_EQ(tiles.size(), 8u);
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    EXPECT_NEAR(tiles[i].depth_bottom_m - tiles[i].depth_top_m, 0.1, 1e-12);
    EXPECT_GE(tiles[i].depth_top_m, 3.0);
    EXPECT_LE(tiles[i].depth_bottom_m, 3.8 + 1e-9);
    if (i) EXPECT_GE(tiles[i].depth_top_m, tiles[i - 1].depth_bottom_m - 1e-12);
    EXPECT_EQ(tiles[i].pixels.width, 606);  // horizontally center-cropped
  }
}

TEST(Crop, MissingDpiIsAnIngestionError) { EXPECT_THROW(crop_samples(column(1212, 606, std::nullopt)), DataError); }

TEST(Crop, FourHundredFortyTilesSpanFortyFourMetres) {
  EXPECT_EQ(tile_depth(0.0, 440) - tile_depth(0.0, 0), 44.0);
  EXPECT_DOUBLE_EQ(tile_depth(1250.0, 440) - 1250.0, 44.0);
}

TEST(ImageIo, PngRoundTripAndBadInput) {
  const fs::path dir = scratch("png");
  Image8 img(5, 7, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<std::uint8_t>(i * 7);
  write_png(dir / "a.png", img);
  const Image8 back = read_image(dir / "a.png");
  EXPECT_EQ(back.data, img.data);
  EXPECT_EQ(back.height, 5);
  std::ofstream(dir / "bad.png") << "not an image";
  EXPECT_THROW(read_image(dir / "bad.png"), DataError);
  EXPECT_THROW(read_image(dir / "missing.png"), DataError);
  const TensorF g = load_tile(dir / "a.png", ColorMode::gray);
  EXPECT_EQ(g.dim(0), 1);
}

TEST(Manifest, RoundTripPreservesUnknownKeys) {
  const fs::path dir = scratch("manifest");
  {
    std::ofstream f(dir / "m.jsonl");
    f << R"({"path":"a.png","well_id":"W1","depth_top_m":1.0,"depth_bottom_m":1.1,"dpi":150,"color_mode":"rgb","label":"granite","operator":"ops"})"
      << "\n"
      << R"({"path":"b.png","well_id":"W1","depth_top_m":1.1,"depth_bottom_m":1.2,"label":3})" << "\n";
  }
  const Manifest m = read_manifest(dir / "m.jsonl");
  ASSERT_EQ(m.records.size(), 2u);
  EXPECT_EQ(m.records[0].label, Lithotype::granite);
  EXPECT_EQ(m.records[1].label, Lithotype::sandstone_laminated);
  EXPECT_EQ(m.records[0].extra["operator"], "ops");
  EXPECT_FALSE(m.records[1].dpi.has_value());
  write_manifest(dir / "n.jsonl", m.records);
  const Manifest n = read_manifest(dir / "n.jsonl");
  EXPECT_EQ(manifest_text(n.records), manifest_text(m.records));
  EXPECT_EQ(n.resolve(n.records[0]), dir / "a.png");
}

TEST(Manifest, LabelCodesAreStable) {
  const std::vector<std::string> names{"argillite",          "granite",           "limestone",
                                       "sandstone_laminated", "sandstone_massive", "siltstone"};
  EXPECT_EQ(lithotype_names(), names);
  for (int c = 0; c < kLithotypeCount; ++c) {
    EXPECT_EQ(static_cast<int>(lithotype_from_string(names[static_cast<std::size_t>(c)])), c);
    EXPECT_EQ(lithotype_from_string(std::to_string(c)), lithotype_from_code(c));
  }
  EXPECT_THROW(lithotype_from_string("basalt"), DataError);
  EXPECT_THROW(lithotype_from_code(6), DataError);
}
