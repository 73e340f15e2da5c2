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

// Feature-map extraction and LIME-style explanations over a regular grid of
// tile regions.

#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "lithocnn/network.hpp"
#include "lithocnn/rng.hpp"

namespace lithocnn {

struct FeatureMap {
  std::string layer;
  TensorF activation;      // per-sample layer output, [C,H,W] or [n]
  std::vector<float> min;  // per filter
  std::vector<float> max;

  Index filters() const { return activation.rank() == 3 ? activation.dim(0) : 1; }
  /// Filter f min-max normalized to [0,1] as [1,H,W] (a constant map becomes zeros).
  TensorF display(Index filter) const;
};

struct FeatureMapSet {
  std::vector<FeatureMap> layers;
  TensorF output;  // the network's prediction for the same pass
};

/// Inference-mode capture of the named layers for one [C,H,W] tile.
FeatureMapSet extract_feature_maps(const Network<float>& net, const TensorF& tile, std::span<const std::string> layers);

/// <dir>/<layer>_f<k>.png for the first `filters` filters of each layer, plus feature_maps.json.
void export_feature_maps(const FeatureMapSet& maps, const std::filesystem::path& dir, Index filters = 4);

/// Maps a batch [B,C,H,W] to class scores [B,classes].
using PredictFn = std::function<TensorF(const TensorF& batch)>;

PredictFn network_predictor(const Network<float>& net);

struct LimeConfig {
  Index grid = 7;
  Index samples = 1000;
  double sigma = 0.25;  // kernel width on the masked-region fraction
  Index top_k = 5;
  Index batch = 25;
};

struct Surrogate {
  Eigen::VectorXd weights;  // one per region column
  double intercept = 0;
  double residual = 0;      // weighted RMS residual
};

/// Weighted least squares y ~ intercept + Z w with sample weights `sw`.
Surrogate fit_surrogate(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, const Eigen::VectorXd& sw);

struct RegionWeight {
  Index row = 0;
  Index col = 0;
  double weight = 0;
};

struct Explanation {
  Index grid_rows = 0;
  Index grid_cols = 0;
  Index explained_class = 0;
  std::vector<RegionWeight> regions;  // row-major
  std::vector<bool> mask;             // top-k positive regions, row-major
  double intercept = 0;
  double residual = 0;
  bool uninformative = false;         // model output did not vary over the samples
};

/// Region (r, c) covers rows [r*H/g, (r+1)*H/g) and the matching columns.
void apply_region_mask(TensorF& tile, Index grid, std::span<const std::uint8_t> keep, std::span<const float> fill);

/// LIME over a grid x grid partition. Sample 0 keeps every region; the rest
/// keep each region with probability 1/2. Masked regions take the tile's
/// per-channel mean. `target_class` < 0 explains the model's top class.
Explanation explain(const PredictFn& predict, const TensorF& tile, Index target_class, const LimeConfig& cfg,
                    RngHandle rng);
Explanation explain(const Network<float>& net, const TensorF& tile, Index target_class, const LimeConfig& cfg,
                    RngHandle rng);

nlohmann::json to_json(const Explanation& e);
/// Mask overlay (unselected regions dimmed) as PNG and the weights as a JSON sidecar.
void export_explanation(const Explanation& e, const TensorF& tile, const std::filesystem::path& png,
                        const std::filesystem::path& json);

}  // namespace lithocnn
