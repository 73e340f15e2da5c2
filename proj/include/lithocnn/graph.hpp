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

// Static description of a network: a topologically ordered list of layer
// specifications, where inception and residual modules nest their own body.

#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "lithocnn/tensor.hpp"

namespace lithocnn {

enum class LayerKind {
  conv,
  activation,
  inception,
  avg_pool,
  batch_norm,
  max_pool,
  zero_pad,
  residual,
  dropout,
  compose,
  dense,
};

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

enum class ActivationFn { relu, softmax };
enum class ComposeOp { add, concat };

struct ConvSpec {
  Index filters = 1;
  Index kernel = 1;
  Index stride = 1;
  Index padding = 0;
};

struct PoolSpec {
  Index window = 2;
  Index stride = 2;
  bool global = false;  // window = full spatial extent
};

struct PadSpec {
  Index padding = 1;
};

struct DropoutSpec {
  double rate = 0.5;
};

struct DenseSpec {
  Index units = 1;
};

struct BatchNormSpec {};

struct ActivationSpec {
  ActivationFn fn = ActivationFn::relu;
};

struct ComposeSpec {
  ComposeOp op = ComposeOp::add;
};

struct LayerSpec;

/// Body of an inception or residual module. The module's output is its last layer.
struct ModuleSpec {
  std::vector<LayerSpec> body;
};

using LayerParams = std::variant<ConvSpec, ActivationSpec, ModuleSpec, PoolSpec, BatchNormSpec, PadSpec, DropoutSpec,
                                 ComposeSpec, DenseSpec>;

/// Reference to the enclosing scope's input (graph input, or module input).
inline constexpr std::string_view kScopeInput = "@input";

struct LayerSpec {
  LayerKind kind = LayerKind::conv;
  std::string name;
  LayerParams params;
  /// Producer names within the same scope. Empty means "the previous layer"
  /// (or the scope input for the first layer).
  std::vector<std::string> inputs;

  template <typename P>
  const P& as() const {
    return std::get<P>(params);
  }
};

// Layer factories; each returns a LayerSpec with the matching kind.
LayerSpec conv_layer(std::string name, Index filters, Index kernel, Index stride = 1, Index padding = 0,
                     std::vector<std::string> inputs = {});
LayerSpec relu_layer(std::string name, std::vector<std::string> inputs = {});
LayerSpec softmax_layer(std::string name);
LayerSpec max_pool_layer(std::string name, Index window, Index stride, std::vector<std::string> inputs = {});
LayerSpec avg_pool_layer(std::string name, Index window, Index stride);
LayerSpec global_avg_pool_layer(std::string name);
LayerSpec batch_norm_layer(std::string name, std::vector<std::string> inputs = {});
LayerSpec zero_pad_layer(std::string name, Index padding, std::vector<std::string> inputs = {});
LayerSpec dropout_layer(std::string name, double rate);
LayerSpec dense_layer(std::string name, Index units);
LayerSpec compose_layer(std::string name, ComposeOp op, std::vector<std::string> inputs);

struct Edge {
  std::string producer;
  std::string consumer;
};

/// Per-layer static output shape (per sample: [C,H,W] or [n]).
struct LayerShape {
  std::string name;
  LayerKind kind;
  Shape shape;
  int depth = 0;  // module nesting level
};

struct NetworkGraph {
  std::string architecture;
  std::string variant;
  double width = 1.0;
  Shape input_shape;  // [C,H,W]
  Index classes = 0;
  std::vector<LayerSpec> layers;

  /// Producer -> consumer links, module bodies included ("@input" for graph input).
  std::vector<Edge> edges() const;

  /// Output shape of every layer, derived by the shape law. Throws on any
  /// inconsistency (unknown producer, channel/spatial mismatch, non-integer size).
  std::vector<LayerShape> infer_shapes() const;

  Shape output_shape() const;

  /// Unique names, resolvable producers, consistent shapes.
  void validate() const;

  /// validate() plus: final layers are dense(classes) then softmax.
  void validate_classifier() const;

  /// Counts layers of a kind, recursing into modules.
  std::size_t count(LayerKind kind) const;

  /// Every layer name including module members, in execution order.
  std::vector<std::string> layer_names() const;
};

/// N = h * w * k.
constexpr Index node_count(Index h, Index w, Index k) { return h * w * k; }

/// Number of nodes of a per-sample layer output ([C,H,W] -> H*W*C, [n] -> n).
inline Index node_count(const Shape& shape) { return numel(shape); }

nlohmann::json to_json(const NetworkGraph& graph);
NetworkGraph graph_from_json(const nlohmann::json& doc);

}  // namespace lithocnn
