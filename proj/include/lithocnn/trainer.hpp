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

// Dataset splitting, the training loop with per-epoch validation and best
// checkpoint selection, and checkpoint evaluation.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lithocnn/augment.hpp"
#include "lithocnn/checkpoint.hpp"
#include "lithocnn/evaluation.hpp"
#include "lithocnn/image.hpp"
#include "lithocnn/manifest.hpp"
#include "lithocnn/optimizers.hpp"

namespace lithocnn {

struct SplitRule {
  Index draw = 110;  // per class, into validation and again into test
  std::map<Lithotype, Index> overrides{{Lithotype::limestone, 50}};

  Index draw_for(Lithotype label) const;
};

struct DatasetSplit {
  std::vector<ManifestRecord> train;
  std::vector<ManifestRecord> validation;
  std::vector<ManifestRecord> test;
};

/// Per class: shuffle with RngHandle(seed, class code), take `draw` into
/// validation, the next `draw` into test, the rest into training. Records
/// sharing a source id always land in the same part. Each class needs at
/// least 2*draw + 1 source groups.
DatasetSplit split_dataset(const std::vector<ManifestRecord>& records, std::uint64_t seed, const SplitRule& rule = {});

/// In-memory tiles ready for the network.
struct Dataset {
  std::vector<TensorF> x;  // [C,H,W]
  std::vector<Index> y;
  std::vector<std::string> ids;
  std::vector<std::string> source_ids;

  std::size_t size() const noexcept { return x.size(); }
};

Dataset load_dataset(const Manifest& manifest, ColorMode mode);
Dataset load_dataset(const Manifest& manifest, const std::vector<ManifestRecord>& records, ColorMode mode);

struct TrainConfig {
  std::string architecture = "alexnet";
  std::string variant;
  double width = 1.0;
  ColorMode color = ColorMode::rgb;
  OptimizerConfig optimizer;
  LRSchedule schedule;
  int epochs = 20;
  Index batch_size = 32;
  std::uint64_t seed = 0;
  std::vector<std::string> classes = lithotype_names();
  /// Stop once both thresholds are reached (a zero threshold is ignored;
  /// both zero disables early stopping).
  double stop_train_accuracy = 0;
  double stop_val_accuracy = 0;
  /// Re-augment every training sample each epoch instead of using a materialized corpus.
  std::optional<AugmentationPipeline> on_the_fly;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochStats {
  int epoch = 0;
  double lr = 0;
  double train_loss = 0;
  double train_acc = 0;  // running accuracy over the epoch's training batches
  double val_loss = 0;
  double val_acc = 0;
};

std::string epoch_stats_csv(const std::vector<EpochStats>& stats);

struct TrainResult {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;
  double best_val_acc = -1;
  Checkpoint best;
  Checkpoint final;
  bool stopped_early = false;
};

/// Called after every epoch; return false to stop.
using EpochCallback = std::function<bool(const EpochStats&)>;

/// Runs the training loop. When `out_dir` is non-empty, writes best.ckpt,
/// final.ckpt, epoch_stats.csv and run_manifest.json there.
TrainResult train(const TrainConfig& config, const Dataset& train_set, const Dataset& val_set,
                  const std::filesystem::path& out_dir = {}, const nlohmann::json& provenance = {},
                  const EpochCallback& on_epoch = {});

struct EvalResult {
  ConfusionMatrix confusion;
  EvalReport report;
  double mean_loss = 0;
  std::vector<Index> predicted;
};

EvalResult evaluate(const Network<float>& net, const Dataset& data, const std::vector<std::string>& class_names,
                    Index batch_size = 32);

/// Checkpoint classes must match the manifest labels.
EvalResult evaluate(const Checkpoint& ckpt, const Manifest& manifest, Index batch_size = 32);

/// Class names and color mode stored in a checkpoint descriptor.
std::vector<std::string> checkpoint_classes(const Checkpoint& ckpt);
ColorMode checkpoint_color(const Checkpoint& ckpt);

/// FNV-1a hex digest of a record list's serialized manifest.
std::string records_digest(const std::vector<ManifestRecord>& records);

}  // namespace lithocnn
