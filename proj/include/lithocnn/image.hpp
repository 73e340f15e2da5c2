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

// Core-box ingestion: 8-bit images, PNG/JPEG IO, tile cropping with depth
// bookkeeping, bilinear resize, normalization and grayscale conversion.
// Real-valued images are tensors laid out [C,H,W].

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lithocnn/tensor.hpp"

namespace lithocnn {

/// Interleaved 8-bit image, row-major H x W x C.
struct Image8 {
  Index height = 0;
  Index width = 0;
  Index channels = 3;
  std::vector<std::uint8_t> data;

  Image8() = default;
  Image8(Index h, Index w, Index c, std::uint8_t fill = 0)
      : height(h), width(w), channels(c), data(static_cast<std::size_t>(h * w * c), fill) {}

  std::uint8_t& at(Index y, Index x, Index c) { return data[static_cast<std::size_t>((y * width + x) * channels + c)]; }
  std::uint8_t at(Index y, Index x, Index c) const {
    return data[static_cast<std::size_t>((y * width + x) * channels + c)];
  }
  bool empty() const noexcept { return data.empty(); }
  friend bool operator==(const Image8&, const Image8&) = default;
};

/// Decodes PNG or JPEG (by signature) to 8-bit RGB.
Image8 read_image(const std::filesystem::path& path);
/// Writes 8-bit gray (1 channel) or RGB (3 channels) PNG.
void write_png(const std::filesystem::path& path, const Image8& image);
std::vector<std::uint8_t> encode_png(const Image8& image);

/// Nominal tile edge: 606 px for 10 cm at 150 dpi, scaled linearly with dpi.
inline constexpr Index kNominalTilePx = 606;
inline constexpr double kNominalDpi = 150.0;
inline constexpr double kTileMeters = 0.1;
Index tile_size_px(double dpi, double tile_cm = 10.0);

struct CoreBoxImage {
  Image8 pixels;
  std::optional<double> dpi;
  std::string well_id;
  double depth_top_m = 0;
  double depth_bottom_m = 0;
};

struct RawTile {
  Image8 pixels;
  std::string well_id;
  double depth_top_m = 0;
  double depth_bottom_m = 0;
  Index index = 0;  // position within the source image, top to bottom
};

/// Depth of tile i starting at `top`: top + i * 0.1 m, evaluated as top + i/10.
inline double tile_depth(double top, Index i) { return top + static_cast<double>(i) / 10.0; }

/// Non-overlapping square tiles, top to bottom. A trailing remainder of at
/// least half a tile becomes a bottom-aligned final tile; shorter ones are
/// dropped with a warning. Tiles whose interval would pass depth_bottom_m are
/// dropped with a warning.
std::vector<RawTile> crop_samples(const CoreBoxImage& image, double tile_cm = 10.0,
                                  std::vector<std::string>* warnings = nullptr);

/// v/255 per sample, [C,H,W].
TensorF normalize(const Image8& image);
/// round(v*255), clamped to [0,255]; [C,H,W] to interleaved.
Image8 denormalize(const TensorF& tensor);

/// Bilinear resize with half-pixel centers: src = (dst + 0.5) * in/out - 0.5,
/// clamped to the valid range. Input [C,H,W] with H, W >= 2.
TensorF resize_bilinear(const TensorF& image, Index out_h, Index out_w);

/// Luma with weights (0.299, 0.587, 0.114); [3,H,W] -> [1,H,W].
TensorF to_grayscale(const TensorF& rgb);

enum class ColorMode { rgb, gray };
std::string to_string(ColorMode mode);
ColorMode color_mode_from_string(const std::string& name);
inline Index channels_of(ColorMode mode) { return mode == ColorMode::rgb ? 3 : 1; }

/// Reads a prepared tile image as a network input [C,H,W] in the given mode.
TensorF load_tile(const std::filesystem::path& path, ColorMode mode);

}  // namespace lithocnn
