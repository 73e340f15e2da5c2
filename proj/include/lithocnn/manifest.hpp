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

// Lithotype labels and JSON-lines manifests. Each record describes one core
// image or tile; keys the reader does not know are carried through unchanged.

#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lithocnn/image.hpp"

namespace lithocnn {

enum class Lithotype : int {
  argillite = 0,
  granite = 1,
  limestone = 2,
  sandstone_laminated = 3,
  sandstone_massive = 4,
  siltstone = 5,
};

inline constexpr int kLithotypeCount = 6;

std::string_view to_string(Lithotype label);
/// Accepts the name or the integer code (as text).
Lithotype lithotype_from_string(std::string_view name);
Lithotype lithotype_from_code(int code);
std::vector<std::string> lithotype_names();

struct ManifestRecord {
  std::string path;  // relative paths resolve against the manifest's directory
  std::string well_id;
  double depth_top_m = 0;
  double depth_bottom_m = 0;
  std::optional<double> dpi;
  ColorMode color_mode = ColorMode::rgb;
  std::optional<Lithotype> label;
  std::string id;         // unique record id
  std::string source_id;  // id of the original tile this record derives from
  nlohmann::json extra = nlohmann::json::object();
};

nlohmann::json to_json(const ManifestRecord& record);
ManifestRecord record_from_json(const nlohmann::json& j);

struct Manifest {
  std::filesystem::path base_dir;  // directory used to resolve relative paths
  std::vector<ManifestRecord> records;

  std::filesystem::path resolve(const ManifestRecord& r) const;
};

Manifest read_manifest(const std::filesystem::path& path);
/// One compact JSON object per line, keys in sorted order.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);
std::string manifest_text(const std::vector<ManifestRecord>& records);

}  // namespace lithocnn
