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

#include "lithocnn/network.hpp"

#include <set>

namespace lithocnn {
namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool is_softmax(const LayerSpec& layer) {
  return layer.kind == LayerKind::activation && layer.as<ActivationSpec>().fn == ActivationFn::softmax;
}

}  // namespace

template <typename Scalar>
Network<Scalar>::Network(NetworkGraph graph, std::uint64_t init_seed) : graph_(std::move(graph)) {
  std::map<std::string, Shape> shapes;
  for (auto& s : graph_.infer_shapes()) shapes[s.name] = s.shape;
  declare(graph_.layers, shapes, graph_.input_shape, init_seed, true);

  std::string classifier;
  const auto& top = graph_.layers;
  if (top.size() >= 2 && is_softmax(top.back()) && top[top.size() - 2].kind == LayerKind::dense) {
    classifier = top[top.size() - 2].name + "/weight";
  }
  for (auto& p : params_) {
    auto& v = p.value.vector();
    if (ends_with(p.name, "/kernel") || ends_with(p.name, "/weight")) {
      const double fan_in = static_cast<double>(p.value.size() / p.value.dim(0));
      const double stddev = std::sqrt((p.name == classifier ? 1.0 : 2.0) / fan_in);
      RngHandle rng(init_seed, fnv1a(p.name));
      for (Index i = 0; i < v.size(); ++i) v[i] = static_cast<Scalar>(rng.normal() * stddev);
    } else if (ends_with(p.name, "/gamma") || ends_with(p.name, "/running_var")) {
      v.setOnes();
    } else {
      v.setZero();
    }
  }
}

template <typename Scalar>
void Network<Scalar>::add_param(const std::string& name, Shape shape, bool trainable) {
  index_[name] = params_.size();
  params_.push_back(Parameter<Scalar>{name, T(std::move(shape)), trainable});
}

template <typename Scalar>
void Network<Scalar>::declare(const std::vector<LayerSpec>& layers, const std::map<std::string, Shape>& shapes,
                              const Shape& scope_in, std::uint64_t seed, bool top) {
  Shape prev = scope_in;
  for (const auto& layer : layers) {
    const Shape resolved = layer.inputs.empty()                  ? prev
                           : layer.inputs.front() == kScopeInput ? scope_in
                                                                 : shapes.at(layer.inputs.front());
    switch (layer.kind) {
      case LayerKind::conv: {
        const auto& c = layer.as<ConvSpec>();
        add_param(layer.name + "/kernel", {c.filters, resolved[0], c.kernel, c.kernel}, true);
        add_param(layer.name + "/bias", {c.filters}, true);
        break;
      }
      case LayerKind::dense: {
        const auto& d = layer.as<DenseSpec>();
        add_param(layer.name + "/weight", {d.units, numel(resolved)}, true);
        add_param(layer.name + "/bias", {d.units}, true);
        break;
      }
      case LayerKind::batch_norm: {
        const Index c = resolved[0];
        add_param(layer.name + "/gamma", {c}, true);
        add_param(layer.name + "/beta", {c}, true);
        add_param(layer.name + "/running_mean", {c}, false);
        add_param(layer.name + "/running_var", {c}, false);
        break;
      }
      case LayerKind::inception:
      case LayerKind::residual:
        declare(layer.as<ModuleSpec>().body, shapes, resolved, seed, false);
        break;
      default:
        break;
    }
    prev = shapes.at(layer.name);
  }
  (void)top;
}

template <typename Scalar>
auto Network<Scalar>::parameter(const std::string& name) -> T& {
  auto it = index_.find(name);
  if (it == index_.end()) throw DataError("unknown parameter '" + name + "'");
  return params_[it->second].value;
}

template <typename Scalar>
auto Network<Scalar>::parameter(const std::string& name) const -> const T& {
  auto it = index_.find(name);
  if (it == index_.end()) throw DataError("unknown parameter '" + name + "'");
  return params_[it->second].value;
}

template <typename Scalar>
std::size_t Network<Scalar>::trainable_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.trainable ? static_cast<std::size_t>(p.value.size()) : 0;
  return n;
}

template <typename Scalar>
void Network<Scalar>::zero_weights() {
  for (auto& p : params_) {
    if (ends_with(p.name, "/kernel") || ends_with(p.name, "/weight") || ends_with(p.name, "/bias")) {
      p.value.vector().setZero();
    }
  }
}

template <typename Scalar>
auto Network<Scalar>::prepare_batch(const T& batch) const -> T {
  T b = batch.rank() == 3 ? batch.reshaped({1, batch.dim(0), batch.dim(1), batch.dim(2)}) : batch;
  if (b.rank() != 4) throw DimensionError("network input must be [B,C,H,W], got " + shape_string(batch.shape()));
  const Shape sample(b.shape().begin() + 1, b.shape().end());
  if (sample != graph_.input_shape) {
    throw DimensionError("network input sample shape " + shape_string(sample) + " != graph input " +
                         shape_string(graph_.input_shape));
  }
  return b;
}

template <typename Scalar>
Var Network<Scalar>::run_scope(Context& ctx, const std::vector<LayerSpec>& layers, Var scope_in, bool top) const {
  std::map<std::string, Var> local;
  Var prev = scope_in;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    if (top && ctx.stop_before_softmax && i + 1 == layers.size() && is_softmax(layer)) return prev;
    std::vector<Var> ins;
    if (layer.inputs.empty()) {
      ins.push_back(prev);
    } else {
      for (const auto& src : layer.inputs) ins.push_back(src == kScopeInput ? scope_in : local.at(src));
    }
    const Var out = run_layer(ctx, layer, ins);
    local[layer.name] = out;
    if (ctx.captured) (*ctx.captured)[layer.name] = out;
    prev = out;
  }
  return prev;
}

template <typename Scalar>
Var Network<Scalar>::run_layer(Context& ctx, const LayerSpec& layer, const std::vector<Var>& ins) const {
  auto& tape = ctx.tape;
  const Var x = ins.front();
  const bool training = ctx.mode == Mode::train;
  switch (layer.kind) {
    case LayerKind::conv: {
      const auto& c = layer.as<ConvSpec>();
      const ConvParams p{c.kernel, c.stride, c.padding, tape.value(x).dim(1), c.filters};
      return tape.conv2d(x, param(ctx, layer.name + "/kernel"), param(ctx, layer.name + "/bias"), p);
    }
    case LayerKind::activation:
      return layer.as<ActivationSpec>().fn == ActivationFn::relu ? tape.relu(x) : tape.softmax(x);
    case LayerKind::max_pool:
    case LayerKind::avg_pool: {
      const auto& p = layer.as<PoolSpec>();
      const Index window = p.global ? tape.value(x).dim(-1) : p.window;
      const Index stride = p.global ? 1 : p.stride;
      if (p.global && tape.value(x).dim(-2) != window) {
        throw DimensionError("global pooling in '" + layer.name + "' needs square maps");
      }
      return layer.kind == LayerKind::max_pool ? tape.max_pool(x, window, stride) : tape.avg_pool(x, window, stride);
    }
    case LayerKind::batch_norm: {
      const std::size_t im = index_.at(layer.name + "/running_mean");
      const std::size_t iv = index_.at(layer.name + "/running_var");
      const Var gamma = param(ctx, layer.name + "/gamma"), beta = param(ctx, layer.name + "/beta");
      if (training && ctx.mutable_params) {
        return tape.batch_norm(x, gamma, beta, (*ctx.mutable_params)[im].value, (*ctx.mutable_params)[iv].value,
                               true);
      }
      T mean = params_[im].value, var = params_[iv].value;
      return tape.batch_norm(x, gamma, beta, mean, var, training);
    }
    case LayerKind::zero_pad:
      return tape.zero_pad(x, layer.as<PadSpec>().padding);
    case LayerKind::dropout:
      return tape.dropout(x, layer.as<DropoutSpec>().rate, ctx.rng.split(fnv1a(layer.name)), training);
    case LayerKind::compose: {
      if (layer.as<ComposeSpec>().op == ComposeOp::concat) return tape.concat(ins);
      Var acc = ins[0];
      for (std::size_t i = 1; i < ins.size(); ++i) acc = tape.add(acc, ins[i]);
      return acc;
    }
    case LayerKind::dense:
      return tape.dense(x, param(ctx, layer.name + "/weight"), param(ctx, layer.name + "/bias"));
    case LayerKind::inception:
    case LayerKind::residual:
      return run_scope(ctx, layer.as<ModuleSpec>().body, x, false);
  }
  throw StateError("unhandled layer kind");
}

template <typename Scalar>
auto Network<Scalar>::forward(const T& batch, Mode mode, RngHandle rng) -> T {
  const T input = prepare_batch(batch);
  Tape<Scalar> tape(false);
  Context ctx{tape, mode, rng, {}, mode == Mode::train ? &params_ : nullptr};
  for (const auto& p : params_) ctx.param_vars.push_back(tape.input(p.value));
  const Var out = run_scope(ctx, graph_.layers, tape.input(input), true);
  return tape.value(out);
}

template <typename Scalar>
auto Network<Scalar>::predict(const T& batch) const -> T {
  const T input = prepare_batch(batch);
  Tape<Scalar> tape(false);
  Context ctx{tape, Mode::infer, RngHandle{}, {}, nullptr};
  for (const auto& p : params_) ctx.param_vars.push_back(tape.input(p.value));
  const Var out = run_scope(ctx, graph_.layers, tape.input(input), true);
  return tape.value(out);
}

template <typename Scalar>
auto Network<Scalar>::capture(const T& batch, std::span<const std::string> layers, T* output) const
    -> std::map<std::string, T> {
  const auto names = graph_.layer_names();
  const std::set<std::string> known(names.begin(), names.end());
  for (const auto& l : layers) {
    if (!known.count(l)) throw DataError("unknown layer '" + l + "'");
  }
  const T input = prepare_batch(batch);
  Tape<Scalar> tape(false);
  std::map<std::string, Var> captured;
  Context ctx{tape, Mode::infer, RngHandle{}, {}, nullptr, &captured};
  for (const auto& p : params_) ctx.param_vars.push_back(tape.input(p.value));
  const Var out = run_scope(ctx, graph_.layers, tape.input(input), true);
  std::map<std::string, T> result;
  for (const auto& l : layers) result[l] = tape.value(captured.at(l));
  if (output) *output = tape.value(out);
  return result;
}

template <typename Scalar>
auto Network<Scalar>::loss_and_gradients(const T& batch, std::span<const Index> labels, RngHandle rng, Mode mode)
    -> Gradients {
  if (graph_.layers.empty() || !is_softmax(graph_.layers.back())) {
    throw StateError("loss_and_gradients requires a graph ending in softmax");
  }
  const T input = prepare_batch(batch);
  if (static_cast<Index>(labels.size()) != input.dim(0)) {
    throw DimensionError("label count " + std::to_string(labels.size()) + " != batch " +
                         std::to_string(input.dim(0)));
  }
  Tape<Scalar> tape(true);
  Context ctx{tape, mode, rng, {}, mode == Mode::train ? &params_ : nullptr};
  ctx.stop_before_softmax = true;
  for (const auto& p : params_) ctx.param_vars.push_back(p.trainable ? tape.parameter(p.value) : tape.input(p.value));
  const Var logits = run_scope(ctx, graph_.layers, tape.input(input), true);
  Gradients g;
  const Var loss = tape.softmax_cross_entropy(logits, std::vector<Index>(labels.begin(), labels.end()), &g.probs);
  g.loss = static_cast<double>(tape.value(loss)[0]);
  tape.backward(loss);
  g.grads.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].trainable) g.grads[i] = tape.grad(ctx.param_vars[i]);
  }
  return g;
}

template class Network<float>;
template class Network<double>;

}  // namespace lithocnn
