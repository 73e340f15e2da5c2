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

// Executes a NetworkGraph over a Tape: parameters, forward passes in train or
// inference mode, loss gradients and activation capture.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lithocnn/graph.hpp"
#include "lithocnn/rng.hpp"
#include "lithocnn/tape.hpp"
#include "lithocnn/tensor.hpp"

namespace lithocnn {

enum class Mode { train, infer };

template <typename Scalar>
struct Parameter {
  std::string name;
  Tensor<Scalar> value;
  bool trainable = true;
};

template <typename Scalar>
class Network {
 public:
  using T = Tensor<Scalar>;

  struct Gradients {
    double loss = 0;
    T probs;                 // [B, classes]
    std::vector<T> grads;    // aligned with parameters(); empty tensors for non-trainable entries
  };

  /// Declares every parameter and initializes it: He-normal for conv/dense
  /// weights (LeCun-normal for the classifier), zero biases, BN gamma=1, beta=0.
  explicit Network(NetworkGraph graph, std::uint64_t init_seed = 0);

  const NetworkGraph& graph() const noexcept { return graph_; }
  std::vector<Parameter<Scalar>>& parameters() noexcept { return params_; }
  const std::vector<Parameter<Scalar>>& parameters() const noexcept { return params_; }
  T& parameter(const std::string& name);
  const T& parameter(const std::string& name) const;
  bool has_parameter(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t trainable_count() const;

  /// Sets all weights and biases of conv and dense layers to zero.
  void zero_weights();

  /// Output of the final layer (softmax rows for classifiers). Train mode uses
  /// batch statistics, updates BN running statistics and applies dropout.
  T forward(const T& batch, Mode mode = Mode::infer, RngHandle rng = {});

  /// Inference-mode forward; never mutates the network.
  T predict(const T& batch) const;

  /// Inference forward capturing the named layers' activations ([B,...]).
  std::map<std::string, T> capture(const T& batch, std::span<const std::string> layers, T* output = nullptr) const;

  /// Mean softmax cross-entropy of the batch and its parameter gradients.
  /// The graph must end in a softmax layer; the loss is fused with it.
  Gradients loss_and_gradients(const T& batch, std::span<const Index> labels, RngHandle rng = {},
                               Mode mode = Mode::train);

 private:
  struct Context {
    Tape<Scalar>& tape;
    Mode mode;
    RngHandle rng;
    std::vector<Var> param_vars;
    std::vector<Parameter<Scalar>>* mutable_params = nullptr;  // set when BN running stats may update
    std::map<std::string, Var>* captured = nullptr;
    bool stop_before_softmax = false;
  };

  void declare(const std::vector<LayerSpec>& layers, const std::map<std::string, Shape>& shapes,
               const Shape& scope_in, std::uint64_t seed, bool top);
  void add_param(const std::string& name, Shape shape, bool trainable);
  T prepare_batch(const T& batch) const;
  Var run_scope(Context& ctx, const std::vector<LayerSpec>& layers, Var scope_in, bool top) const;
  Var run_layer(Context& ctx, const LayerSpec& layer, const std::vector<Var>& ins) const;
  Var param(Context& ctx, const std::string& name) const { return ctx.param_vars[index_.at(name)]; }

  NetworkGraph graph_;
  std::vector<Parameter<Scalar>> params_;
  std::map<std::string, std::size_t> index_;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace lithocnn
