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

// Binary checkpoint: "LCN1", u32 version, architecture id, variant descriptor
// (JSON text), tensor count, then per tensor name / dims / float32 data.
// All integers and floats little-endian; a CRC-32 of every preceding byte
// closes the file.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lithocnn/network.hpp"

namespace lithocnn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointError : DataError {
  using DataError::DataError;
};

struct Checkpoint {
  std::string architecture;
  nlohmann::json descriptor;  // variant, width, in_channels, classes, class_names, color_mode...
  std::vector<std::pair<std::string, TensorF>> tensors;
};

/// Descriptor fields needed to rebuild the graph of `net`.
nlohmann::json describe(const NetworkGraph& graph);

Checkpoint make_checkpoint(const Network<float>& net, nlohmann::json extra = nlohmann::json::object());

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies tensors into `net`; names and shapes must match its parameter set exactly.
void restore(Network<float>& net, const Checkpoint& ckpt);

/// Rebuilds the graph from the descriptor and restores all parameters.
Network<float> network_from_checkpoint(const Checkpoint& ckpt);

}  // namespace lithocnn
