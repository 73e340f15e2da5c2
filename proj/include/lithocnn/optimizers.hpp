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

// Adam, SGD and RMSprop updates over lists of tensors, plus learning-rate
// schedules (polynomial decay and epoch step decay).

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lithocnn/network.hpp"
#include "lithocnn/tensor.hpp"

namespace lithocnn {

enum class OptimizerKind { adam, sgd, rmsprop };

std::string_view to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double beta1 = 0.9;      // Adam
  double beta2 = 0.999;    // Adam
  double epsilon = 1e-8;   // Adam, RMSprop
  double decay = 0.9;      // RMSprop
  double momentum = 0.0;   // SGD
};

template <typename Scalar>
struct OptimizerState {
  OptimizerConfig config;
  // first: Adam first moment or SGD momentum buffer.
  // second: Adam second moment or RMSprop squared-gradient average.
  std::vector<Tensor<Scalar>> first;
  std::vector<Tensor<Scalar>> second;
  std::int64_t t = 0;
};

template <typename Scalar>
OptimizerState<Scalar> make_optimizer_state(const OptimizerConfig& config, std::span<const Shape> shapes) {
  OptimizerState<Scalar> s;
  s.config = config;
  for (const auto& shape : shapes) {
    s.first.emplace_back(shape);
    s.second.emplace_back(shape);
  }
  return s;
}

namespace detail {

template <typename Scalar>
void check_step(std::span<Tensor<Scalar>* const> params, std::span<const Tensor<Scalar>* const> grads,
                const OptimizerState<Scalar>& s) {
  if (params.size() != grads.size() || params.size() != s.first.size()) {
    throw DimensionError("optimizer: " + std::to_string(params.size()) + " parameters, " +
                         std::to_string(grads.size()) + " gradients, " + std::to_string(s.first.size()) + " slots");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i]->shape() || params[i]->shape() != s.first[i].shape()) {
      throw DimensionError("optimizer: shape mismatch at parameter " + std::to_string(i) + ": " +
                           shape_string(params[i]->shape()) + " vs grad " + shape_string(grads[i]->shape()) +
                           " vs slot " + shape_string(s.first[i].shape()));
    }
    if (!grads[i]->all_finite()) throw NumericError("optimizer: non-finite gradient at parameter " + std::to_string(i));
  }
}

}  // namespace detail

/// m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;
/// theta <- theta - alpha * m_hat / (sqrt(v_hat) + eps), with bias-corrected m_hat, v_hat.
template <typename Scalar>
void adam_step(std::span<Tensor<Scalar>* const> params, std::span<const Tensor<Scalar>* const> grads,
               OptimizerState<Scalar>& s, double alpha) {
  detail::check_step(params, grads, s);
  ++s.t;
  const auto& c = s.config;
  const Scalar b1 = static_cast<Scalar>(c.beta1), b2 = static_cast<Scalar>(c.beta2);
  const Scalar bc1 = static_cast<Scalar>(1.0 - std::pow(c.beta1, static_cast<double>(s.t)));
  const Scalar bc2 = static_cast<Scalar>(1.0 - std::pow(c.beta2, static_cast<double>(s.t)));
  const Scalar a = static_cast<Scalar>(alpha), eps = static_cast<Scalar>(c.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto g = grads[i]->vector().array();
    auto m = s.first[i].vector().array();
    auto v = s.second[i].vector().array();
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.square();
    params[i]->vector().array() -= a * (m / bc1) / ((v / bc2).sqrt() + eps);
  }
}

/// theta <- theta - alpha * g, or with momentum mu: buf <- mu buf + g, theta <- theta - alpha buf.
template <typename Scalar>
void sgd_step(std::span<Tensor<Scalar>* const> params, std::span<const Tensor<Scalar>* const> grads,
              OptimizerState<Scalar>& s, double alpha) {
  detail::check_step(params, grads, s);
  ++s.t;
  const Scalar a = static_cast<Scalar>(alpha), mu = static_cast<Scalar>(s.config.momentum);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (s.config.momentum == 0.0) {
      params[i]->vector() -= a * grads[i]->vector();
    } else {
      auto& buf = s.first[i].vector();
      buf = mu * buf + grads[i]->vector();
      params[i]->vector() -= a * buf;
    }
  }
}

/// acc <- d acc + (1-d) g^2;  theta <- theta - alpha * g / (sqrt(acc) + eps).
template <typename Scalar>
void rmsprop_step(std::span<Tensor<Scalar>* const> params, std::span<const Tensor<Scalar>* const> grads,
                  OptimizerState<Scalar>& s, double alpha) {
  detail::check_step(params, grads, s);
  ++s.t;
  const Scalar d = static_cast<Scalar>(s.config.decay), a = static_cast<Scalar>(alpha);
  const Scalar eps = static_cast<Scalar>(s.config.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto g = grads[i]->vector().array();
    auto acc = s.second[i].vector().array();
    acc = d * acc + (Scalar(1) - d) * g.square();
    params[i]->vector().array() -= a * g / (acc.sqrt() + eps);
  }
}

template <typename Scalar>
void optimizer_step(std::span<Tensor<Scalar>* const> params, std::span<const Tensor<Scalar>* const> grads,
                    OptimizerState<Scalar>& s, double alpha) {
  switch (s.config.kind) {
    case OptimizerKind::adam:
      return adam_step(params, grads, s, alpha);
    case OptimizerKind::sgd:
      return sgd_step(params, grads, s, alpha);
    case OptimizerKind::rmsprop:
      return rmsprop_step(params, grads, s, alpha);
  }
}

/// Convenience overload over plain tensor lists.
template <typename Scalar>
void optimizer_step(std::vector<Tensor<Scalar>>& params, const std::vector<Tensor<Scalar>>& grads,
                    OptimizerState<Scalar>& s, double alpha) {
  std::vector<Tensor<Scalar>*> p;
  std::vector<const Tensor<Scalar>*> g;
  for (auto& t : params) p.push_back(&t);
  for (auto& t : grads) g.push_back(&t);
  optimizer_step<Scalar>(p, g, s, alpha);
}

/// Trainable network parameters only; `grads` is aligned with parameters().
template <typename Scalar>
void optimizer_step(std::vector<Parameter<Scalar>>& params, const std::vector<Tensor<Scalar>>& grads,
                    OptimizerState<Scalar>& s, double alpha) {
  if (grads.size() != params.size()) throw DimensionError("optimizer: gradient list does not match parameters");
  std::vector<Tensor<Scalar>*> p;
  std::vector<const Tensor<Scalar>*> g;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable) continue;
    p.push_back(&params[i].value);
    g.push_back(&grads[i]);
  }
  optimizer_step<Scalar>(p, g, s, alpha);
}

template <typename Scalar>
OptimizerState<Scalar> make_optimizer_state(const OptimizerConfig& config,
                                            const std::vector<Parameter<Scalar>>& params) {
  std::vector<Shape> shapes;
  for (const auto& p : params) {
    if (p.trainable) shapes.push_back(p.value.shape());
  }
  return make_optimizer_state<Scalar>(config, std::span<const Shape>(shapes));
}

/// alpha0 * (1 - ep/ep_max)^p.
double poly_decay(double alpha0, double ep, double ep_max, double power = 1.0);

/// alpha0 * factor^(number of boundaries <= ep).
double step_decay(double alpha0, int ep, std::span<const int> boundaries, double factor = 0.1);

struct LRSchedule {
  enum class Kind { polynomial, step, constant };
  Kind kind = Kind::step;
  double alpha0 = 1e-3;
  double power = 1.0;
  int ep_max = 20;
  std::vector<int> boundaries{10, 15};
  double factor = 0.1;

  void validate() const;
  double at(int epoch) const;
};

std::string_view to_string(LRSchedule::Kind kind);
LRSchedule::Kind schedule_kind_from_string(std::string_view name);

}  // namespace lithocnn
