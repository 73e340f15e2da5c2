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

// Versioned synthetic six-class core textures used in place of real core
// photographs: dark low-contrast (argillite), coarse crystalline (granite),
// blotchy (limestone), horizontal laminae over fine speckle (laminated
// sandstone), medium speckle (massive sandstone), fine speckle (siltstone).
// Laminae amplitude varies per tile, so faint laminated tiles resemble siltstone.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lithocnn/image.hpp"
#include "lithocnn/manifest.hpp"

namespace lithocnn {

/// Bump when any generator parameter changes; it keys every tile's stream.
inline constexpr std::uint64_t kSynthVersion = 2;

/// Tile `index` of class `label`; a pure function of (label, seed, index, size).
Image8 synth_tile(Lithotype label, std::uint64_t seed, Index index, Index size = 227);

/// Writes `per_class` tiles of each class to out_dir/<id>.png; ids are
/// "syn<seed>_<class code>_<index>". Returns records in class then index order.
std::vector<ManifestRecord> synth_corpus(const std::filesystem::path& out_dir, const std::map<Lithotype, Index>& per_class,
                                         std::uint64_t seed, Index first_index = 0, Index size = 227);

/// A well of `tiles` consecutive 0.1 m tiles in beds of 5 to 30 tiles.
/// Tile i covers [top + i/10, top + (i+1)/10) and carries its true label.
std::vector<ManifestRecord> synth_well(const std::filesystem::path& out_dir, const std::string& well_id, Index tiles,
                                       double top_m, std::uint64_t seed, Index size = 227);

/// A single-column core image of `tiles` tile-heights at `dpi`, one label
/// throughout, written to `path`; returns its manifest record.
ManifestRecord synth_core_image(const std::filesystem::path& path, const std::string& well_id, Lithotype label,
                                Index tiles, double dpi, double top_m, std::uint64_t seed, Index extra_rows = 0);

}  // namespace lithocnn
