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

// Independent reference implementations shared by the unit and acceptance
// tests. Nothing here calls into the library's numeric kernels.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "lithocnn/graph.hpp"
#include "lithocnn/tape.hpp"
#include "lithocnn/tensor.hpp"

namespace oracle {

using lithocnn::Index;
using lithocnn::Shape;
using TensorD = lithocnn::Tensor<double>;

inline TensorD random_tensor(Shape shape, std::mt19937_64& gen, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  TensorD t(std::move(shape));
  for (auto& v : t.values()) v = u(gen);
  return t;
}

/// Plain 7-loop cross-correlation with explicit zero padding.
inline TensorD conv2d(const TensorD& x, const TensorD& k, const TensorD& b, Index stride, Index pad) {
  const Index N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const Index F = k.dim(0), K = k.dim(2);
  const Index Ho = (H - K + 2 * pad) / stride + 1, Wo = (W - K + 2 * pad) / stride + 1;
  TensorD y(Shape{N, F, Ho, Wo});
  for (Index n = 0; n < N; ++n)
    for (Index f = 0; f < F; ++f)
      for (Index i = 0; i < Ho; ++i)
        for (Index j = 0; j < Wo; ++j) {
          double s = b[f];
          for (Index c = 0; c < C; ++c)
            for (Index u = 0; u < K; ++u)
              for (Index v = 0; v < K; ++v) {
                const Index yy = i * stride + u - pad, xx = j * stride + v - pad;
                if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
                s += x(n, c, yy, xx) * k(f, c, u, v);
              }
          y(n, f, i, j) = s;
        }
  return y;
}

/// Scalar loss of the inputs; gradients are compared against central differences.
using LossFn = std::function<double(const std::vector<TensorD>&)>;

/// Max over entries of |a - n| / max(1, |a|, |n|) between an analytic gradient
/// and central differences with step h.
inline double fd_max_rel_error(const LossFn& loss, std::vector<TensorD> inputs, std::size_t which,
                               const TensorD& analytic, double h = 1e-5) {
  double worst = 0;
  TensorD& x = inputs[which];
  for (Index i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = loss(inputs);
    x[i] = keep - h;
    const double down = loss(inputs);
    x[i] = keep;
    const double numeric = (up - down) / (2 * h);
    const double a = analytic[i];
    worst = std::max(worst, std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)}));
  }
  return worst;
}

/// Shape law for one layer given its inputs' per-sample shapes.
inline Shape expected_shape(const lithocnn::LayerSpec& l, const std::vector<Shape>& ins) {
  using lithocnn::LayerKind;
  const Shape& x = ins.at(0);
  const auto sp = [](Index w, Index f, Index p, Index s) { return (w - f + 2 * p) / s + 1; };
  switch (l.kind) {
    case LayerKind::conv: {
      const auto& c = l.as<lithocnn::ConvSpec>();
      return {c.filters, sp(x[1], c.kernel, c.padding, c.stride), sp(x[2], c.kernel, c.padding, c.stride)};
    }
    case LayerKind::max_pool:
    case LayerKind::avg_pool: {
      const auto& p = l.as<lithocnn::PoolSpec>();
      if (p.global) return {x[0], 1, 1};
      return {x[0], sp(x[1], p.window, 0, p.stride), sp(x[2], p.window, 0, p.stride)};
    }
    case LayerKind::zero_pad: {
      const Index p = l.as<lithocnn::PadSpec>().padding;
      return {x[0], x[1] + 2 * p, x[2] + 2 * p};
    }
    case LayerKind::dense:
      return {l.as<lithocnn::DenseSpec>().units};
    case LayerKind::compose: {
      if (l.as<lithocnn::ComposeSpec>().op == lithocnn::ComposeOp::add) return x;
      Shape s = x;
      s[0] = 0;
      for (const auto& i : ins) s[0] += i[0];
      return s;
    }
    default:
      return x;
  }
}

/// Walks a graph with the shape law alone; returns name -> per-sample shape
/// for every layer (module members included).
inline std::map<std::string, Shape> walk_shapes(const std::vector<lithocnn::LayerSpec>& layers, const Shape& in,
                                                std::map<std::string, Shape>& all) {
  std::map<std::string, Shape> scope;
  Shape prev = in;
  for (const auto& l : layers) {
    std::vector<Shape> ins;
    if (l.inputs.empty()) {
      ins.push_back(prev);
    } else {
      for (const auto& name : l.inputs) ins.push_back(name == lithocnn::kScopeInput ? in : scope.at(name));
    }
    Shape out;
    if (l.kind == lithocnn::LayerKind::inception || l.kind == lithocnn::LayerKind::residual) {
      std::map<std::string, Shape> inner_all;
      walk_shapes(l.as<lithocnn::ModuleSpec>().body, ins[0], all);
      out = all.at(l.as<lithocnn::ModuleSpec>().body.back().name);
    } else {
      out = expected_shape(l, ins);
    }
    scope[l.name] = out;
    all[l.name] = out;
    prev = out;
  }
  return scope;
}

// Metric oracles by direct counting over the label lists.
struct Counts {
  double tp = 0, fp = 0, fn = 0;
};

inline Counts count_class(const std::vector<Index>& truth, const std::vector<Index>& pred, Index c) {
  Counts k;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (pred[i] == c && truth[i] == c) k.tp += 1;
    if (pred[i] == c && truth[i] != c) k.fp += 1;
    if (pred[i] != c && truth[i] == c) k.fn += 1;
  }
  return k;
}

inline double fbeta(double p, double r, double beta) {
  const double b2 = beta * beta;
  const double den = b2 * p + r;
  return den == 0 ? 0 : (1 + b2) * p * r / den;
}

// Optimizer recurrences on one scalar, written straight from the update rules.
inline std::vector<double> adam_trajectory(double w, const std::function<double(double)>& grad, double alpha,
                                           double b1, double b2, double eps, int steps) {
  std::vector<double> out;
  double m = 0, v = 0;
  for (int t = 1; t <= steps; ++t) {
    const double g = grad(w);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    w -= alpha * mh / (std::sqrt(vh) + eps);
    out.push_back(w);
  }
  return out;
}

inline std::vector<double> sgd_trajectory(double w, const std::function<double(double)>& grad, double alpha,
                                          double momentum, int steps) {
  std::vector<double> out;
  double vel = 0;
  for (int t = 1; t <= steps; ++t) {
    const double g = grad(w);
    vel = momentum * vel + g;
    w -= alpha * vel;
    out.push_back(w);
  }
  return out;
}

inline std::vector<double> rmsprop_trajectory(double w, const std::function<double(double)>& grad, double alpha,
                                              double decay, double eps, int steps) {
  std::vector<double> out;
  double s = 0;
  for (int t = 1; t <= steps; ++t) {
    const double g = grad(w);
    s = decay * s + (1 - decay) * g * g;
    w -= alpha * g / (std::sqrt(s) + eps);
    out.push_back(w);
  }
  return out;
}

}  // namespace oracle
