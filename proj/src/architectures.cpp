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

#include "lithocnn/architectures.hpp"

#include <cmath>

#include "lithocnn/conv.hpp"

namespace lithocnn {
namespace {

void check_common(Index classes, Index in_channels, double width) {
  if (classes < 2) throw ParameterError("classes must be >= 2, got " + std::to_string(classes));
  if (in_channels != 1 && in_channels != 3) {
    throw ParameterError("in_channels must be 1 or 3, got " + std::to_string(in_channels));
  }
  if (!(width > 0.0 && width <= 1.0)) throw ParameterError("width multiplier must be in (0,1]");
}

NetworkGraph empty_graph(std::string arch, std::string variant, double width, Index classes, Index in_channels) {
  NetworkGraph g;
  g.architecture = std::move(arch);
  g.variant = std::move(variant);
  g.width = width;
  g.classes = classes;
  g.input_shape = {in_channels, kInputExtent, kInputExtent};
  return g;
}

// Stride-2 max pool that halves an extent exactly: window 2 on even sizes,
// window 3 on odd ones, so no trailing row is dropped unevenly.
LayerSpec halving_pool(const std::string& name, Index& extent) {
  const Index window = extent % 2 == 0 ? 2 : 3;
  extent = output_extent(extent, window, 0, 2, "pool");
  return max_pool_layer(name, window, 2);
}

void add_classifier_head(NetworkGraph& g, Index hidden, double dropout, int hidden_layers) {
  for (int i = 0; i < hidden_layers; ++i) {
    const std::string id = std::to_string(6 + i);
    g.layers.push_back(dense_layer("fc" + id, hidden));
    g.layers.push_back(relu_layer("relu" + id));
    g.layers.push_back(dropout_layer("drop" + id, dropout));
  }
  g.layers.push_back(dense_layer("fc" + std::to_string(6 + hidden_layers), g.classes));
  g.layers.push_back(softmax_layer("softmax"));
}

}  // namespace

InceptionWidths InceptionWidths::from_outputs(Index branch1, Index branch3, Index branch5, Index pool_proj) {
  return {branch1, std::max<Index>(1, branch3 * 3 / 4), branch3, std::max<Index>(1, branch5 / 2), branch5,
          pool_proj};
}

Index scaled_width(Index channels, double width) {
  return std::max<Index>(1, static_cast<Index>(std::lround(static_cast<double>(channels) * width)));
}

LayerSpec build_inception_module(const std::string& name, Index in_channels, const InceptionWidths& w) {
  if (in_channels < 1) throw ParameterError("inception input channels must be positive");
  for (Index v : {w.branch1, w.reduce3, w.branch3, w.reduce5, w.branch5, w.pool_proj}) {
    if (v < 1) throw ParameterError("inception branch widths must be positive");
  }
  const std::string in{kScopeInput};
  const auto n = [&](const char* part) { return name + "/" + part; };
  std::vector<LayerSpec> body;
  body.push_back(conv_layer(n("1x1"), w.branch1, 1, 1, 0, {in}));
  body.push_back(relu_layer(n("1x1_relu")));
  body.push_back(conv_layer(n("3x3_reduce"), w.reduce3, 1, 1, 0, {in}));
  body.push_back(relu_layer(n("3x3_reduce_relu")));
  body.push_back(conv_layer(n("3x3"), w.branch3, 3, 1, 1));
  body.push_back(relu_layer(n("3x3_relu")));
  body.push_back(conv_layer(n("5x5_reduce"), w.reduce5, 1, 1, 0, {in}));
  body.push_back(relu_layer(n("5x5_reduce_relu")));
  body.push_back(conv_layer(n("5x5"), w.branch5, 5, 1, 2));
  body.push_back(relu_layer(n("5x5_relu")));
  // Zero padding is equivalent to -inf padding here: the module input is a ReLU output.
  body.push_back(zero_pad_layer(n("pool_pad"), 1, {in}));
  body.push_back(max_pool_layer(n("pool"), 3, 1));
  body.push_back(conv_layer(n("pool_proj"), w.pool_proj, 1, 1, 0));
  body.push_back(relu_layer(n("pool_proj_relu")));
  body.push_back(compose_layer(n("concat"), ComposeOp::concat,
                               {n("1x1_relu"), n("3x3_relu"), n("5x5_relu"), n("pool_proj_relu")}));
  return LayerSpec{LayerKind::inception, name, ModuleSpec{std::move(body)}, {}};
}

LayerSpec build_inception_module(const std::string& name, Index in_channels, std::array<Index, 4> w) {
  return build_inception_module(name, in_channels, InceptionWidths::from_outputs(w[0], w[1], w[2], w[3]));
}

LayerSpec build_residual_module(const std::string& name, Index in_channels, Index out_channels, Index stride) {
  if (stride != 1 && stride != 2) throw ParameterError("residual stride must be 1 or 2");
  if (in_channels < 1 || out_channels < 1) throw ParameterError("residual channels must be positive");
  const std::string in{kScopeInput};
  const auto n = [&](const char* part) { return name + "/" + part; };
  std::vector<LayerSpec> body;
  body.push_back(conv_layer(n("conv1"), out_channels, 3, stride, 1, {in}));
  body.push_back(batch_norm_layer(n("bn1")));
  body.push_back(relu_layer(n("relu1")));
  body.push_back(conv_layer(n("conv2"), out_channels, 3, 1, 1));
  body.push_back(batch_norm_layer(n("bn2")));
  std::string skip = in;
  if (in_channels != out_channels || stride != 1) {
    body.push_back(conv_layer(n("proj"), out_channels, 1, stride, 0, {in}));
    body.push_back(batch_norm_layer(n("proj_bn")));
    skip = n("proj_bn");
  }
  body.push_back(compose_layer(n("add"), ComposeOp::add, {n("bn2"), skip}));
  body.push_back(relu_layer(n("relu")));
  return LayerSpec{LayerKind::residual, name, ModuleSpec{std::move(body)}, {}};
}

NetworkGraph build_alexnet(Index classes, Index in_channels, double width) {
  check_common(classes, in_channels, width);
  auto g = empty_graph("alexnet", "alexnet", width, classes, in_channels);
  const auto c = [&](Index v) { return scaled_width(v, width); };
  auto& L = g.layers;
  L.push_back(conv_layer("conv1", c(96), 11, 4, 0));
  L.push_back(relu_layer("relu1"));
  L.push_back(max_pool_layer("pool1", 3, 2));
  L.push_back(conv_layer("conv2", c(256), 5, 1, 2));
  L.push_back(relu_layer("relu2"));
  L.push_back(max_pool_layer("pool2", 3, 2));
  L.push_back(conv_layer("conv3", c(384), 3, 1, 1));
  L.push_back(relu_layer("relu3"));
  L.push_back(conv_layer("conv4", c(384), 3, 1, 1));
  L.push_back(relu_layer("relu4"));
  L.push_back(conv_layer("conv5", c(256), 3, 1, 1));
  L.push_back(relu_layer("relu5"));
  L.push_back(max_pool_layer("pool5", 3, 2));
  add_classifier_head(g, c(4096), 0.5, 2);
  g.validate_classifier();
  return g;
}

NetworkGraph build_vgg(Index classes, Index in_channels, std::string_view variant, double width) {
  check_common(classes, in_channels, width);
  std::array<int, 5> reps{};
  if (variant == "vgg11") {
    reps = {1, 1, 2, 2, 2};
  } else if (variant == "vgg13") {
    reps = {2, 2, 2, 2, 2};
  } else if (variant == "vgg16") {
    reps = {2, 2, 3, 3, 3};
  } else if (variant == "vgg19") {
    reps = {2, 2, 4, 4, 4};
  } else {
    throw ParameterError("unknown VGG variant '" + std::string(variant) + "'");
  }
  auto g = empty_graph("vgg", std::string(variant), width, classes, in_channels);
  constexpr std::array<Index, 5> channels{64, 128, 256, 512, 512};
  Index extent = kInputExtent;
  for (int b = 0; b < 5; ++b) {
    const std::string block = "block" + std::to_string(b + 1);
    for (int i = 1; i <= reps[b]; ++i) {
      g.layers.push_back(conv_layer(block + "_conv" + std::to_string(i), scaled_width(channels[b], width), 3, 1, 1));
      g.layers.push_back(relu_layer(block + "_relu" + std::to_string(i)));
    }
    g.layers.push_back(halving_pool(block + "_pool", extent));
  }
  add_classifier_head(g, scaled_width(4096, width), 0.5, 2);
  g.validate_classifier();
  return g;
}

NetworkGraph build_googlenet(Index classes, Index in_channels, double width) {
  check_common(classes, in_channels, width);
  auto g = empty_graph("googlenet", "v1", width, classes, in_channels);
  const auto c = [&](Index v) { return scaled_width(v, width); };
  auto& L = g.layers;
  L.push_back(conv_layer("conv1", c(64), 7, 2, 2));
  L.push_back(relu_layer("relu1"));
  L.push_back(max_pool_layer("pool1", 3, 2));
  L.push_back(conv_layer("conv2_reduce", c(64), 1, 1, 0));
  L.push_back(relu_layer("relu2_reduce"));
  L.push_back(conv_layer("conv2", c(192), 3, 1, 1));
  L.push_back(relu_layer("relu2"));
  Index extent = 56;
  L.push_back(halving_pool("pool2", extent));

  struct Stage {
    const char* name;
    std::array<Index, 6> w;
  };
  const std::array<Stage, 9> stages{{
      {"inception_3a", {64, 96, 128, 16, 32, 32}},
      {"inception_3b", {128, 128, 192, 32, 96, 64}},
      {"inception_4a", {192, 96, 208, 16, 48, 64}},
      {"inception_4b", {160, 112, 224, 24, 64, 64}},
      {"inception_4c", {128, 128, 256, 24, 64, 64}},
      {"inception_4d", {112, 144, 288, 32, 64, 64}},
      {"inception_4e", {256, 160, 320, 32, 128, 128}},
      {"inception_5a", {256, 160, 320, 32, 128, 128}},
      {"inception_5b", {384, 192, 384, 48, 128, 128}},
  }};
  Index channels = c(192);
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& w = stages[i].w;
    const InceptionWidths iw{c(w[0]), c(w[1]), c(w[2]), c(w[3]), c(w[4]), c(w[5])};
    L.push_back(build_inception_module(stages[i].name, channels, iw));
    channels = iw.output_channels();
    if (i == 1) L.push_back(halving_pool("pool3", extent));
    if (i == 6) L.push_back(halving_pool("pool4", extent));
  }
  L.push_back(global_avg_pool_layer("avgpool"));
  L.push_back(dropout_layer("dropout", 0.4));
  L.push_back(dense_layer("classifier", classes));
  L.push_back(softmax_layer("softmax"));
  g.validate_classifier();
  return g;
}

NetworkGraph build_resnet(Index classes, Index in_channels, std::string_view variant, double width) {
  check_common(classes, in_channels, width);
  std::array<int, 4> blocks{};
  if (variant == "resnet18") {
    blocks = {2, 2, 2, 2};
  } else if (variant == "resnet34") {
    blocks = {3, 4, 6, 3};
  } else {
    throw ParameterError("unknown ResNet variant '" + std::string(variant) + "'");
  }
  auto g = empty_graph("resnet", std::string(variant), width, classes, in_channels);
  auto& L = g.layers;
  L.push_back(conv_layer("conv1", scaled_width(64, width), 7, 2, 3));
  L.push_back(batch_norm_layer("bn1"));
  L.push_back(relu_layer("relu1"));
  Index extent = output_extent(kInputExtent, 7, 3, 2, "conv1");
  L.push_back(halving_pool("pool1", extent));
  constexpr std::array<Index, 4> widths{64, 128, 256, 512};
  Index channels = scaled_width(64, width);
  for (int s = 0; s < 4; ++s) {
    const Index out = scaled_width(widths[s], width);
    for (int b = 0; b < blocks[s]; ++b) {
      const Index stride = (s > 0 && b == 0) ? 2 : 1;
      const std::string name = "stage" + std::to_string(s + 1) + "_block" + std::to_string(b + 1);
      L.push_back(build_residual_module(name, channels, out, stride));
      channels = out;
    }
  }
  L.push_back(global_avg_pool_layer("avgpool"));
  L.push_back(dense_layer("classifier", classes));
  L.push_back(softmax_layer("softmax"));
  g.validate_classifier();
  return g;
}

NetworkGraph build_architecture(std::string_view architecture, Index classes, Index in_channels,
                                std::string_view variant, double width) {
  if (architecture == "alexnet") return build_alexnet(classes, in_channels, width);
  if (architecture == "vgg") return build_vgg(classes, in_channels, variant.empty() ? "vgg16" : variant, width);
  if (architecture == "googlenet") return build_googlenet(classes, in_channels, width);
  if (architecture == "resnet") {
    return build_resnet(classes, in_channels, variant.empty() ? "resnet18" : variant, width);
  }
  throw ParameterError("unknown architecture '" + std::string(architecture) + "'");
}

std::vector<std::string> architecture_ids() { return {"alexnet", "vgg", "googlenet", "resnet"}; }

}  // namespace lithocnn
