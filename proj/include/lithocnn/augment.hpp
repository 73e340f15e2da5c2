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

// Seeded tile augmentation on [C,H,W] tensors with values in [0,1], and
// corpus oversampling with provenance tracking.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lithocnn/manifest.hpp"
#include "lithocnn/rng.hpp"
#include "lithocnn/tensor.hpp"

namespace lithocnn {

/// Counter-clockwise rotation by a multiple of 90 degrees (lossless):
/// 90 degrees maps out(i, j) = in(j, W-1-i).
TensorF rotate_right_angle(const TensorF& image, int degrees);

/// Counter-clockwise rotation about the center. Multiples of 90 use the exact
/// permutation; other angles resample bilinearly with mirrored borders and
/// keep the input size.
TensorF rotate(const TensorF& image, double degrees);

/// clamp(v + delta, 0, 1).
TensorF adjust_brightness(const TensorF& image, double delta);

/// clamp(gain_c * v_c, 0, 1); one gain per channel.
TensorF color_shift(const TensorF& image, std::span<const double> gains);

enum class CropMode { blank, resize };

/// blank: a ceil(f*H) x ceil(f*W) rectangle at a uniform position is set to
/// `fill`. resize: a window of that size is removed from the frame by cropping
/// to (H - ceil(f*H)) x (W - ceil(f*W)) and resized back.
TensorF random_crop(const TensorF& image, double fraction, RngHandle rng, CropMode mode = CropMode::blank,
                    float fill = 0.0f);

/// clamp(v + n, 0, 1), n ~ N(0, sigma^2) per sample.
TensorF gaussian_noise(const TensorF& image, double sigma, RngHandle rng);

/// Normalized k x k box filter with mirrored borders, computed with conv2d.
/// k must be odd; k = 1 is the identity.
TensorF blur(const TensorF& image, Index kernel_size);

enum class AugOp { rotate90, rotate, brightness, color_shift, random_crop, noise, blur };

std::string to_string(AugOp op);
AugOp aug_op_from_string(const std::string& name);

struct AugStep {
  AugOp op = AugOp::rotate90;
  double probability = 0.5;
  double lo = 0;  // parameter range; unused by rotate90
  double hi = 0;
  CropMode crop_mode = CropMode::blank;
};

struct AugmentationPipeline {
  std::vector<AugStep> steps;
  std::uint64_t seed = 0;

  /// All six op families with conservative magnitudes.
  static AugmentationPipeline defaults(std::uint64_t seed = 0);

  void validate() const;
  /// Applies each step in order; step i draws from rng.split(i) only.
  TensorF apply(const TensorF& image, RngHandle rng) const;
  /// Stream for variant j of the tile with id `id`: RngHandle(seed, hash(id, j)).
  RngHandle variant_rng(const std::string& id, std::uint64_t j) const;
};

nlohmann::json to_json(const AugmentationPipeline& p);
AugmentationPipeline pipeline_from_json(const nlohmann::json& j);

struct OversampleConfig {
  AugmentationPipeline pipeline;
  Index default_target = 0;  // 0 keeps each class at its current count
  std::map<Lithotype, Index> targets;

  Index target_for(Lithotype label, Index current) const;
};

OversampleConfig oversample_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const OversampleConfig& c);

/// Writes originals and variants into `out_dir` and returns their records in
/// class order (originals first within each class). Variant k of a class with
/// n originals derives from original k mod n as its (k / n)-th variant.
std::vector<ManifestRecord> oversample(const Manifest& corpus, const OversampleConfig& config,
                                       const std::filesystem::path& out_dir);

/// Records of `train` whose source or id belongs to any held-out record.
std::vector<std::string> leakage(std::span<const ManifestRecord> train, std::span<const ManifestRecord> held_out);

}  // namespace lithocnn
