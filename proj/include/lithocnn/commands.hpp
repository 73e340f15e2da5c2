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

// Pipeline commands behind the lithocnn executable. Each command reads and
// writes manifests; warnings go to the supplied sink.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lithocnn/architectures.hpp"
#include "lithocnn/checkpoint.hpp"
#include "lithocnn/image.hpp"
#include "lithocnn/interpret.hpp"
#include "lithocnn/manifest.hpp"
#include "lithocnn/trainer.hpp"

namespace lithocnn {

/// Exit codes of the executable.
enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitData = 3, kExitNumeric = 4 };

/// Maps the current exception to an exit code (call inside a catch block).
int exit_code_for_current_exception() noexcept;

using WarningSink = std::function<void(const std::string&)>;

struct DepthRecord {
  double depth_top_m = 0;
  double depth_bottom_m = 0;
  std::string label;
  double confidence = 0;  // softmax maximum
  std::string runner_up;
  double runner_up_confidence = 0;
  std::string tile_id;
};

struct DepthLog {
  std::string well_id;
  std::vector<DepthRecord> records;  // sorted by depth, non-overlapping

  double span_m() const;  // bottom of the last record minus top of the first
};

/// One CSV for all wells: well_id, depth_top_m, depth_bottom_m, label,
/// confidence, runner_up, runner_up_confidence.
std::string depth_log_csv(const std::vector<DepthLog>& logs);
nlohmann::json to_json(const std::vector<DepthLog>& logs);

struct Throughput {
  std::size_t tiles = 0;
  double seconds = 0;
  double tiles_per_second() const { return seconds > 0 ? static_cast<double>(tiles) / seconds : 0; }
  double meters_per_minute() const { return tiles_per_second() * 0.1 * 60; }
};

struct PredictResult {
  std::vector<DepthLog> logs;  // wells in first-appearance order
  Throughput throughput;
};

/// Classifies every tile of `manifest`. Tiles are grouped by well and ordered
/// by depth; out-of-order input, overlaps and gaps produce warnings.
PredictResult predict_depth_log(const Checkpoint& ckpt, const Manifest& manifest, Index batch_size = 16,
                                const WarningSink& warn = {});

struct PrepareOptions {
  double tile_cm = 10.0;
  Index tile_px = kInputExtent;
};

struct PrepareStats {
  std::size_t images = 0;
  std::size_t tiles = 0;
  std::size_t reused = 0;  // images whose tiles were already current
};

/// Crops each core image into tiles, resizes them to tile_px and writes
/// out_dir/<image id>_t<i>.png plus out_dir/manifest.jsonl. An image whose
/// content hash matches the previous run's output is not re-cut.
PrepareStats cmd_prepare(const std::filesystem::path& manifest, const std::filesystem::path& out_dir,
                         const PrepareOptions& options = {}, const WarningSink& warn = {});

/// Writes out_dir/{train,validation,test}.jsonl with paths relative to out_dir.
DatasetSplit cmd_split(const std::filesystem::path& manifest, const std::filesystem::path& out_dir,
                       std::uint64_t seed, const SplitRule& rule = {});

/// Materializes an oversampled corpus into out_dir (with manifest.jsonl);
/// every record echoes the pipeline seed.
std::vector<ManifestRecord> cmd_augment(const std::filesystem::path& manifest, const std::filesystem::path& config,
                                        const std::filesystem::path& out_dir, std::optional<std::uint64_t> seed);

struct TrainPaths {
  std::filesystem::path train_manifest;
  std::filesystem::path val_manifest;
  std::filesystem::path out_dir;
};

TrainResult cmd_train(const TrainConfig& config, const TrainPaths& paths, const EpochCallback& on_epoch = {});

/// Writes report.json, report.txt and confusion.csv into out_dir.
EvalResult cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& manifest,
                    const std::filesystem::path& out_dir);

/// Writes depth_log.csv and depth_log.json into out_dir.
PredictResult cmd_predict(const std::filesystem::path& checkpoint, const std::filesystem::path& manifest,
                          const std::filesystem::path& out_dir, Index batch_size = 16, const WarningSink& warn = {});

/// Writes explanation.png and explanation.json into out_dir.
Explanation cmd_explain(const std::filesystem::path& checkpoint, const std::filesystem::path& tile,
                        const std::filesystem::path& out_dir, Index target_class, const LimeConfig& config,
                        std::uint64_t seed);

FeatureMapSet cmd_features(const std::filesystem::path& checkpoint, const std::filesystem::path& tile,
                           const std::vector<std::string>& layers, const std::filesystem::path& out_dir,
                           Index filters = 4);

/// Reads a tile image for a checkpoint: color conversion, then resize to the input extent if needed.
TensorF load_tile_for(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Entry point of the executable.
int run_cli(int argc, char** argv);

}  // namespace lithocnn
