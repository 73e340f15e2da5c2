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

#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "lithocnn/conv.hpp"
#include "lithocnn/layers.hpp"
#include "lithocnn/tensor.hpp"

namespace lithocnn {

/// Handle to a value recorded on a Tape.
struct Var {
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::size_t id = npos;
  bool valid() const noexcept { return id != npos; }
  friend bool operator==(Var, Var) = default;
};

/// Reverse-mode computation tape. Every op appends a node holding its value
/// and, when recording, a closure that pushes the node's gradient to its parents.
/// Leaves created with parameter()/input() may alias external tensors, which
/// must outlive the tape.
template <typename Scalar>
class Tape {
 public:
  using T = Tensor<Scalar>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var input(const T& value, bool requires_grad = false) { return leaf(&value, std::nullopt, requires_grad); }
  Var input(T&& value, bool requires_grad = false) { return leaf(nullptr, std::move(value), requires_grad); }
  Var parameter(const T& value) { return leaf(&value, std::nullopt, true); }

  const T& value(Var v) const { return node(v).get(); }

  bool has_grad(Var v) const { return node(v).has_grad; }

  /// Gradient of the backward root w.r.t. v; zeros if v did not influence it.
  const T& grad(Var v) {
    if (!consumed_) throw StateError("gradient requested before backward()");
    Node& n = nodes_.at(v.id);
    if (!n.has_grad) {
      n.grad = T(n.get().shape());
      n.has_grad = true;
    }
    return n.grad;
  }

  Var conv2d(Var x, Var k, Var b, const ConvParams& p) {
    T out = lithocnn::conv2d(value(x), value(k), value(b), p);
    return push(std::move(out), {x, k, b}, [x, k, b, p](Tape& t, const T& gy) {
      auto g = conv2d_backward(t.value(x), t.value(k), gy, p, t.needs_grad(x));
      t.accumulate(x, std::move(g.input));
      t.accumulate(k, std::move(g.kernels));
      t.accumulate(b, std::move(g.bias));
    });
  }

  Var relu(Var x) {
    return push(lithocnn::relu(value(x)), {x},
                [x](Tape& t, const T& gy) { t.accumulate(x, relu_backward(t.value(x), gy)); });
  }

  Var max_pool(Var x, Index window, Index stride) {
    return push(lithocnn::max_pool(value(x), window, stride), {x}, [=](Tape& t, const T& gy) {
      t.accumulate(x, max_pool_backward(t.value(x), gy, window, stride));
    });
  }

  Var avg_pool(Var x, Index window, Index stride) {
    return push(lithocnn::avg_pool(value(x), window, stride), {x}, [=](Tape& t, const T& gy) {
      t.accumulate(x, avg_pool_backward(t.value(x), gy, window, stride));
    });
  }

  Var zero_pad(Var x, Index padding) {
    return push(lithocnn::pad(value(x), padding), {x},
                [=](Tape& t, const T& gy) { t.accumulate(x, crop(gy, padding)); });
  }

  Var dropout(Var x, double rate, RngHandle rng, bool training) {
    if (!training || rate == 0.0) {
      (void)lithocnn::dropout(value(x), rate, rng, false);  // validates rate
      return alias(x);
    }
    T mask = dropout_mask<Scalar>(value(x).shape(), rate, rng);
    T out = mask;
    out.vector().array() *= value(x).vector().array();
    return push(std::move(out), {x}, [x, mask = std::move(mask)](Tape& t, const T& gy) {
      T g = gy;
      g.vector().array() *= mask.vector().array();
      t.accumulate(x, std::move(g));
    });
  }

  Var dense(Var x, Var w, Var b) {
    return push(lithocnn::dense(value(x), value(w), value(b)), {x, w, b}, [=](Tape& t, const T& gy) {
      auto g = dense_backward(t.value(x), t.value(w), gy);
      t.accumulate(x, std::move(g.input));
      t.accumulate(w, std::move(g.weights));
      t.accumulate(b, std::move(g.bias));
    });
  }

  /// running_mean/running_var are updated in place in training mode.
  Var batch_norm(Var x, Var gamma, Var beta, T& running_mean, T& running_var, bool training,
                 const BatchNormConfig& cfg = {}) {
    BatchNormCache<Scalar> cache;
    T out = lithocnn::batch_norm(value(x), value(gamma), value(beta), running_mean, running_var, training, &cache,
                                 cfg);
    return push(std::move(out), {x, gamma, beta},
                [x, gamma, beta, cache = std::move(cache)](Tape& t, const T& gy) {
                  auto g = batch_norm_backward(t.value(x), t.value(gamma), cache, gy);
                  t.accumulate(x, std::move(g.input));
                  t.accumulate(gamma, std::move(g.gamma));
                  t.accumulate(beta, std::move(g.beta));
                });
  }

  Var softmax(Var x) {
    Var y = push(lithocnn::softmax(value(x)), {x}, nullptr);
    if (record_ && needs_grad(x)) {
      nodes_[y.id].back = [x, y](Tape& t, const T& gy) { t.accumulate(x, softmax_backward(t.value(y), gy)); };
    }
    return y;
  }

  Var concat(std::span<const Var> parts) {
    std::vector<const T*> values;
    std::vector<Shape> shapes;
    for (Var v : parts) {
      values.push_back(&value(v));
      shapes.push_back(value(v).shape());
    }
    T out = concat_channels<Scalar>(values);
    std::vector<Var> ids(parts.begin(), parts.end());
    return push(std::move(out), ids, [ids, shapes](Tape& t, const T& gy) {
      auto grads = concat_channels_backward<Scalar>(shapes, gy);
      for (std::size_t i = 0; i < ids.size(); ++i) t.accumulate(ids[i], std::move(grads[i]));
    });
  }

  Var add(Var a, Var b) {
    return push(lithocnn::add(value(a), value(b)), {a, b}, [=](Tape& t, const T& gy) {
      t.accumulate(a, T(gy));
      t.accumulate(b, T(gy));
    });
  }

  /// Scalar mean cross-entropy of softmax(logits) against labels; the softmax
  /// probabilities are written to `probs` when non-null.
  Var softmax_cross_entropy(Var logits, std::vector<Index> labels, T* probs = nullptr) {
    T p;
    const double loss = lithocnn::softmax_cross_entropy(value(logits), labels, &p);
    if (probs) *probs = p;
    T out(Shape{1}, static_cast<Scalar>(loss));
    return push(std::move(out), {logits},
                [logits, labels = std::move(labels), p = std::move(p)](Tape& t, const T& gy) {
                  t.accumulate(logits, softmax_cross_entropy_backward(p, labels, static_cast<double>(gy[0])));
                });
  }

  /// sum_i w_i x_i; used to project tensor outputs onto a scalar root.
  Var weighted_sum(Var x, T weights) {
    if (weights.shape() != value(x).shape()) throw DimensionError("weighted_sum weight shape mismatch");
    T out(Shape{1}, static_cast<Scalar>(value(x).vector().dot(weights.vector())));
    return push(std::move(out), {x}, [x, w = std::move(weights)](Tape& t, const T& gy) {
      T g = w;
      g.vector() *= gy[0];
      t.accumulate(x, std::move(g));
    });
  }

  /// Propagates d(root)/d(.) to every recorded node. The root must be scalar.
  void backward(Var root) {
    if (!record_) throw StateError("backward() on a tape created without recording");
    if (nodes_.empty() || !root.valid() || root.id >= nodes_.size()) {
      throw StateError("backward() without a recorded forward pass");
    }
    if (consumed_) throw StateError("backward() called twice on the same tape");
    if (value(root).size() != 1) {
      throw StateError("backward root must be a scalar, got " + shape_string(value(root).shape()));
    }
    consumed_ = true;
    nodes_[root.id].grad = T(value(root).shape(), Scalar(1));
    nodes_[root.id].has_grad = true;
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.has_grad || !n.back) continue;
      auto back = std::move(n.back);
      back(*this, n.grad);
    }
  }

 private:
  using Backward = std::function<void(Tape&, const T&)>;

  struct Node {
    const T* ref = nullptr;
    std::optional<T> owned;
    T grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::size_t alias_of = Var::npos;
    Backward back;

    const T& get() const { return ref ? *ref : *owned; }
  };

  const Node& node(Var v) const {
    if (!v.valid() || v.id >= nodes_.size()) throw StateError("variable is not on this tape");
    return nodes_[v.id];
  }

  bool needs_grad(Var v) const { return node(v).requires_grad; }

  Var leaf(const T* ref, std::optional<T> owned, bool requires_grad) {
    Node n;
    n.ref = ref;
    n.owned = std::move(owned);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  Var alias(Var x) {
    Node n;
    n.ref = &value(x);
    if (nodes_[x.id].owned) {
      // Aliasing an owned value would dangle on reallocation; copy instead.
      n.ref = nullptr;
      n.owned = *nodes_[x.id].owned;
    }
    n.requires_grad = needs_grad(x);
    nodes_.push_back(std::move(n));
    const Var y{nodes_.size() - 1};
    if (record_ && needs_grad(x)) {
      nodes_[y.id].back = [x](Tape& t, const T& gy) { t.accumulate(x, T(gy)); };
    }
    return y;
  }

  Var push(T value, std::initializer_list<Var> parents, Backward back) {
    return push(std::move(value), std::vector<Var>(parents), std::move(back));
  }

  Var push(T value, const std::vector<Var>& parents, Backward back) {
    Node n;
    n.owned = std::move(value);
    for (Var p : parents) n.requires_grad = n.requires_grad || needs_grad(p);
    if (record_ && n.requires_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  void accumulate(Var v, T&& g) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return;
    if (!n.has_grad) {
      n.grad = std::move(g);
      n.has_grad = true;
    } else {
      n.grad.vector() += g.vector();
    }
  }

  std::vector<Node> nodes_;
  bool record_;
  bool consumed_ = false;
};

}  // namespace lithocnn
