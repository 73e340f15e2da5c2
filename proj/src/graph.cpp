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

#include "lithocnn/graph.hpp"

#include <array>
#include <map>
#include <set>

#include "lithocnn/conv.hpp"

namespace lithocnn {
namespace {

constexpr std::array<std::pair<LayerKind, std::string_view>, 11> kKindNames{{
    {LayerKind::conv, "conv"},
    {LayerKind::activation, "activation"},
    {LayerKind::inception, "inception"},
    {LayerKind::avg_pool, "avg_pool"},
    {LayerKind::batch_norm, "batch_norm"},
    {LayerKind::max_pool, "max_pool"},
    {LayerKind::zero_pad, "zero_pad"},
    {LayerKind::residual, "residual"},
    {LayerKind::dropout, "dropout"},
    {LayerKind::compose, "compose"},
    {LayerKind::dense, "dense"},
}};

LayerSpec make(LayerKind kind, std::string name, LayerParams params, std::vector<std::string> inputs = {}) {
  return LayerSpec{kind, std::move(name), std::move(params), std::move(inputs)};
}

Shape spatial_input(const LayerSpec& layer, const Shape& in) {
  if (in.size() != 3) {
    throw DimensionError("layer '" + layer.name + "' needs a [C,H,W] input, got " + shape_string(in));
  }
  return in;
}

class ShapeWalker {
 public:
  explicit ShapeWalker(std::vector<LayerShape>& out) : out_(out) {}

  Shape scope(const std::vector<LayerSpec>& layers, const Shape& scope_in, int depth) {
    if (layers.empty()) throw DimensionError("empty layer scope");
    std::map<std::string, Shape> local;
    Shape prev = scope_in;
    for (const auto& layer : layers) {
      if (layer.name.empty()) throw DimensionError("layer without a name");
      if (!seen_.insert(layer.name).second) throw DimensionError("duplicate layer name '" + layer.name + "'");
      std::vector<Shape> ins;
      if (layer.inputs.empty()) {
        ins.push_back(prev);
      } else {
        for (const auto& src : layer.inputs) {
          if (src == kScopeInput) {
            ins.push_back(scope_in);
          } else if (auto it = local.find(src); it != local.end()) {
            ins.push_back(it->second);
          } else {
            throw DimensionError("layer '" + layer.name + "' reads unknown producer '" + src + "'");
          }
        }
      }
      if (layer.kind != LayerKind::compose && ins.size() != 1) {
        throw DimensionError("layer '" + layer.name + "' takes exactly one input");
      }
      Shape shape = infer(layer, ins, depth);
      out_.push_back(LayerShape{layer.name, layer.kind, shape, depth});
      local[layer.name] = shape;
      prev = std::move(shape);
    }
    return prev;
  }

 private:
  Shape infer(const LayerSpec& layer, const std::vector<Shape>& ins, int depth) {
    const Shape& in = ins.front();
    switch (layer.kind) {
      case LayerKind::conv: {
        const auto& c = layer.as<ConvSpec>();
        const Shape s = spatial_input(layer, in);
        return {c.filters, output_extent(s[1], c.kernel, c.padding, c.stride, "height"),
                output_extent(s[2], c.kernel, c.padding, c.stride, "width")};
      }
      case LayerKind::max_pool:
      case LayerKind::avg_pool: {
        const auto& p = layer.as<PoolSpec>();
        const Shape s = spatial_input(layer, in);
        if (p.global) return {s[0], 1, 1};
        return {s[0], output_extent(s[1], p.window, 0, p.stride, "height"),
                output_extent(s[2], p.window, 0, p.stride, "width")};
      }
      case LayerKind::zero_pad: {
        const Shape s = spatial_input(layer, in);
        const Index p = layer.as<PadSpec>().padding;
        return {s[0], s[1] + 2 * p, s[2] + 2 * p};
      }
      case LayerKind::activation:
      case LayerKind::batch_norm:
      case LayerKind::dropout:
        return in;
      case LayerKind::dense:
        return {layer.as<DenseSpec>().units};
      case LayerKind::compose: {
        if (ins.size() < 2) throw DimensionError("compose layer '" + layer.name + "' needs two or more inputs");
        if (layer.as<ComposeSpec>().op == ComposeOp::add) {
          for (const auto& s : ins) {
            if (s != in) {
              throw DimensionError("add layer '" + layer.name + "': " + shape_string(s) + " vs " + shape_string(in));
            }
          }
          return in;
        }
        Index channels = 0;
        for (const auto& s : ins) {
          if (s.size() != 3 || s[1] != in[1] || s[2] != in[2]) {
            throw DimensionError("concat layer '" + layer.name + "': spatial axes of " + shape_string(s) +
                                 " differ from " + shape_string(in));
          }
          channels += s[0];
        }
        return {channels, in[1], in[2]};
      }
      case LayerKind::inception:
      case LayerKind::residual:
        return scope(layer.as<ModuleSpec>().body, in, depth + 1);
    }
    throw DimensionError("unknown layer kind");
  }

  std::vector<LayerShape>& out_;
  std::set<std::string> seen_;
};

void collect_edges(const std::vector<LayerSpec>& layers, const std::string& scope_input, std::vector<Edge>& out) {
  std::string prev = scope_input;
  for (const auto& layer : layers) {
    if (layer.inputs.empty()) {
      out.push_back({prev, layer.name});
    } else {
      for (const auto& src : layer.inputs) out.push_back({src == kScopeInput ? scope_input : src, layer.name});
    }
    if (layer.kind == LayerKind::inception || layer.kind == LayerKind::residual) {
      const auto& body = layer.as<ModuleSpec>().body;
      const std::string module_in = layer.inputs.empty() ? prev : layer.inputs.front();
      collect_edges(body, module_in, out);
      out.push_back({body.back().name, layer.name});
    }
    prev = layer.name;
  }
}

std::size_t count_kind(const std::vector<LayerSpec>& layers, LayerKind kind) {
  std::size_t n = 0;
  for (const auto& layer : layers) {
    if (layer.kind == kind) ++n;
    if (layer.kind == LayerKind::inception || layer.kind == LayerKind::residual) {
      n += count_kind(layer.as<ModuleSpec>().body, kind);
    }
  }
  return n;
}

nlohmann::json layer_to_json(const LayerSpec& layer) {
  nlohmann::json j;
  j["kind"] = std::string(to_string(layer.kind));
  j["name"] = layer.name;
  if (!layer.inputs.empty()) j["inputs"] = layer.inputs;
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ConvSpec>) {
          j["filters"] = p.filters;
          j["kernel"] = p.kernel;
          j["stride"] = p.stride;
          j["padding"] = p.padding;
        } else if constexpr (std::is_same_v<P, ActivationSpec>) {
          j["fn"] = p.fn == ActivationFn::relu ? "relu" : "softmax";
        } else if constexpr (std::is_same_v<P, ModuleSpec>) {
          auto body = nlohmann::json::array();
          for (const auto& child : p.body) body.push_back(layer_to_json(child));
          j["body"] = std::move(body);
        } else if constexpr (std::is_same_v<P, PoolSpec>) {
          j["window"] = p.window;
          j["stride"] = p.stride;
          j["global"] = p.global;
        } else if constexpr (std::is_same_v<P, PadSpec>) {
          j["padding"] = p.padding;
        } else if constexpr (std::is_same_v<P, DropoutSpec>) {
          j["rate"] = p.rate;
        } else if constexpr (std::is_same_v<P, ComposeSpec>) {
          j["op"] = p.op == ComposeOp::add ? "add" : "concat";
        } else if constexpr (std::is_same_v<P, DenseSpec>) {
          j["units"] = p.units;
        }
      },
      layer.params);
  return j;
}

LayerSpec layer_from_json(const nlohmann::json& j) {
  LayerSpec layer;
  layer.kind = layer_kind_from_string(j.at("kind").get<std::string>());
  layer.name = j.at("name").get<std::string>();
  if (j.contains("inputs")) layer.inputs = j.at("inputs").get<std::vector<std::string>>();
  switch (layer.kind) {
    case LayerKind::conv:
      layer.params = ConvSpec{j.at("filters"), j.at("kernel"), j.at("stride"), j.at("padding")};
      break;
    case LayerKind::activation:
      layer.params = ActivationSpec{j.at("fn") == "relu" ? ActivationFn::relu : ActivationFn::softmax};
      break;
    case LayerKind::inception:
    case LayerKind::residual: {
      ModuleSpec m;
      for (const auto& child : j.at("body")) m.body.push_back(layer_from_json(child));
      layer.params = std::move(m);
      break;
    }
    case LayerKind::avg_pool:
    case LayerKind::max_pool:
      layer.params = PoolSpec{j.at("window"), j.at("stride"), j.at("global")};
      break;
    case LayerKind::batch_norm:
      layer.params = BatchNormSpec{};
      break;
    case LayerKind::zero_pad:
      layer.params = PadSpec{j.at("padding")};
      break;
    case LayerKind::dropout:
      layer.params = DropoutSpec{j.at("rate")};
      break;
    case LayerKind::compose:
      layer.params = ComposeSpec{j.at("op") == "add" ? ComposeOp::add : ComposeOp::concat};
      break;
    case LayerKind::dense:
      layer.params = DenseSpec{j.at("units")};
      break;
  }
  return layer;
}

void collect_names(const std::vector<LayerSpec>& layers, std::vector<std::string>& out) {
  for (const auto& layer : layers) {
    if (layer.kind == LayerKind::inception || layer.kind == LayerKind::residual) {
      collect_names(layer.as<ModuleSpec>().body, out);
    }
    out.push_back(layer.name);
  }
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

LayerKind layer_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw DataError("unknown layer kind '" + std::string(name) + "'");
}

LayerSpec conv_layer(std::string name, Index filters, Index kernel, Index stride, Index padding,
                     std::vector<std::string> inputs) {
  return make(LayerKind::conv, std::move(name), ConvSpec{filters, kernel, stride, padding}, std::move(inputs));
}
LayerSpec relu_layer(std::string name, std::vector<std::string> inputs) {
  return make(LayerKind::activation, std::move(name), ActivationSpec{ActivationFn::relu}, std::move(inputs));
}
LayerSpec softmax_layer(std::string name) {
  return make(LayerKind::activation, std::move(name), ActivationSpec{ActivationFn::softmax});
}
LayerSpec max_pool_layer(std::string name, Index window, Index stride, std::vector<std::string> inputs) {
  return make(LayerKind::max_pool, std::move(name), PoolSpec{window, stride, false}, std::move(inputs));
}
LayerSpec avg_pool_layer(std::string name, Index window, Index stride) {
  return make(LayerKind::avg_pool, std::move(name), PoolSpec{window, stride, false});
}
LayerSpec global_avg_pool_layer(std::string name) {
  return make(LayerKind::avg_pool, std::move(name), PoolSpec{1, 1, true});
}
LayerSpec batch_norm_layer(std::string name, std::vector<std::string> inputs) {
  return make(LayerKind::batch_norm, std::move(name), BatchNormSpec{}, std::move(inputs));
}
LayerSpec zero_pad_layer(std::string name, Index padding, std::vector<std::string> inputs) {
  return make(LayerKind::zero_pad, std::move(name), PadSpec{padding}, std::move(inputs));
}
LayerSpec dropout_layer(std::string name, double rate) {
  return make(LayerKind::dropout, std::move(name), DropoutSpec{rate});
}
LayerSpec dense_layer(std::string name, Index units) {
  return make(LayerKind::dense, std::move(name), DenseSpec{units});
}
LayerSpec compose_layer(std::string name, ComposeOp op, std::vector<std::string> inputs) {
  return make(LayerKind::compose, std::move(name), ComposeSpec{op}, std::move(inputs));
}

std::vector<Edge> NetworkGraph::edges() const {
  std::vector<Edge> out;
  collect_edges(layers, std::string(kScopeInput), out);
  return out;
}

std::vector<LayerShape> NetworkGraph::infer_shapes() const {
  if (input_shape.size() != 3) throw DimensionError("graph input must be [C,H,W], got " + shape_string(input_shape));
  std::vector<LayerShape> out;
  ShapeWalker walker(out);
  walker.scope(layers, input_shape, 0);
  return out;
}

Shape NetworkGraph::output_shape() const { return infer_shapes().back().shape; }

void NetworkGraph::validate() const { (void)infer_shapes(); }

void NetworkGraph::validate_classifier() const {
  const auto shapes = infer_shapes();
  if (layers.size() < 2) throw DimensionError("classifier needs at least dense + softmax layers");
  const auto& last = layers.back();
  const auto& prev = layers[layers.size() - 2];
  if (last.kind != LayerKind::activation || last.as<ActivationSpec>().fn != ActivationFn::softmax) {
    throw DimensionError("classifier must end with a softmax activation");
  }
  if (prev.kind != LayerKind::dense || prev.as<DenseSpec>().units != classes) {
    throw DimensionError("classifier must end with dense(" + std::to_string(classes) + ") before softmax");
  }
}

std::size_t NetworkGraph::count(LayerKind kind) const { return count_kind(layers, kind); }

std::vector<std::string> NetworkGraph::layer_names() const {
  std::vector<std::string> out;
  collect_names(layers, out);
  return out;
}

nlohmann::json to_json(const NetworkGraph& graph) {
  nlohmann::json j;
  j["architecture"] = graph.architecture;
  j["variant"] = graph.variant;
  j["width"] = graph.width;
  j["input_shape"] = graph.input_shape;
  j["classes"] = graph.classes;
  auto layers = nlohmann::json::array();
  for (const auto& layer : graph.layers) layers.push_back(layer_to_json(layer));
  j["layers"] = std::move(layers);
  return j;
}

NetworkGraph graph_from_json(const nlohmann::json& doc) {
  NetworkGraph g;
  g.architecture = doc.at("architecture").get<std::string>();
  g.variant = doc.at("variant").get<std::string>();
  g.width = doc.at("width").get<double>();
  g.input_shape = doc.at("input_shape").get<Shape>();
  g.classes = doc.at("classes").get<Index>();
  for (const auto& layer : doc.at("layers")) g.layers.push_back(layer_from_json(layer));
  g.validate();
  return g;
}

}  // namespace lithocnn
