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

// Builders for AlexNet, VGG, GoogLeNet and ResNet graphs at 227x227 input.
// A width multiplier in (0,1] scales every channel and hidden-unit count.

#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "lithocnn/graph.hpp"

namespace lithocnn {

inline constexpr Index kInputExtent = 227;

struct InceptionWidths {
  Index branch1 = 1;    // 1x1
  Index reduce3 = 1;    // 1x1 before 3x3
  Index branch3 = 1;
  Index reduce5 = 1;    // 1x1 before 5x5
  Index branch5 = 1;
  Index pool_proj = 1;  // 1x1 after 3x3/1 max pool

  Index output_channels() const noexcept { return branch1 + branch3 + branch5 + pool_proj; }

  /// Output widths only; reductions default to 3/4 of the 3x3 width and half
  /// of the 5x5 width.
  static InceptionWidths from_outputs(Index branch1, Index branch3, Index branch5, Index pool_proj);
};

/// Channel count after applying a width multiplier: max(1, round(c * width)).
Index scaled_width(Index channels, double width);

/// Four-branch module concatenated along channels; spatial size preserved.
LayerSpec build_inception_module(const std::string& name, Index in_channels, const InceptionWidths& widths);
LayerSpec build_inception_module(const std::string& name, Index in_channels, std::array<Index, 4> output_widths);

/// conv3x3(stride)-BN-ReLU-conv3x3-BN plus identity (or 1x1 projection + BN
/// when channels or stride change), summed, then ReLU.
LayerSpec build_residual_module(const std::string& name, Index in_channels, Index out_channels, Index stride);

NetworkGraph build_alexnet(Index classes, Index in_channels, double width = 1.0);
/// variant: vgg11, vgg13, vgg16 (default) or vgg19.
NetworkGraph build_vgg(Index classes, Index in_channels, std::string_view variant = "vgg16", double width = 1.0);
NetworkGraph build_googlenet(Index classes, Index in_channels, double width = 1.0);
/// variant: resnet18 (default) or resnet34.
NetworkGraph build_resnet(Index classes, Index in_channels, std::string_view variant = "resnet18",
                          double width = 1.0);

/// Dispatch by architecture id: alexnet, vgg, googlenet, resnet. An empty
/// variant picks the default depth.
NetworkGraph build_architecture(std::string_view architecture, Index classes, Index in_channels,
                                std::string_view variant = {}, double width = 1.0);

std::vector<std::string> architecture_ids();

}  // namespace lithocnn
