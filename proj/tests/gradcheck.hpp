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

// Tape gradients of each differentiable op against central differences.

#pragma once

#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"

namespace gradcheck {

using oracle::TensorD;
using lithocnn::Index;
using lithocnn::Shape;
using lithocnn::Tape;
using lithocnn::Var;

/// Builds the op on `tape` from leaf vars and returns its output var.
using OpFn = std::function<Var(Tape<double>&, const std::vector<Var>&)>;

/// Reduces the op output with fixed random weights to a scalar, then compares
/// the tape gradient of every input against central differences.
inline double check(const OpFn& op, const std::vector<TensorD>& inputs, std::mt19937_64& gen, bool scalar_out = false) {
  // Probe the output shape.
  TensorD probe;
  {
    Tape<double> t(false);
    std::vector<Var> leaves;
    for (const auto& x : inputs) leaves.push_back(t.input(x));
    probe = t.value(op(t, leaves));
  }
  const TensorD w = scalar_out ? TensorD(probe.shape(), 1.0) : oracle::random_tensor(probe.shape(), gen);

  const oracle::LossFn loss = [&](const std::vector<TensorD>& xs) {
    Tape<double> t(false);
    std::vector<Var> leaves;
    for (const auto& x : xs) leaves.push_back(t.input(x));
    const TensorD& y = t.value(op(t, leaves));
    return y.vector().dot(w.vector());
  };

  Tape<double> t(true);
  std::vector<Var> leaves;
  for (const auto& x : inputs) leaves.push_back(t.input(x, true));
  Var root = t.weighted_sum(op(t, leaves), w);
  t.backward(root);
  double worst = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const TensorD g = t.grad(leaves[i]);
    worst = std::max(worst, oracle::fd_max_rel_error(loss, inputs, i, g));
  }
  return worst;
}

struct OpCase {
  std::string name;
  std::function<double(std::mt19937_64&)> run;  // one random instance -> max relative error
};

/// One entry per differentiable op; each run draws a fresh random geometry.
inline std::vector<OpCase> op_cases() {
  std::vector<OpCase> cases;
  cases.push_back({"conv2d", [](std::mt19937_64& g) {
                     std::uniform_int_distribution<Index> pick(0, 2);
                     const Index k = 1 + 2 * pick(g), s = 1 + pick(g) % 2, p = pick(g) % 2;
                     const Index c = 1 + pick(g), f = 1 + pick(g), h = k + 2 + pick(g);
                     lithocnn::ConvParams cp{k, s, p, c, f};
                     // Input extent chosen so the stride divides evenly.
                     const Index hw = ((h - k + 2 * p) / s) * s + k - 2 * p;
                     return check([cp](Tape<double>& t, const std::vector<Var>& v) { return t.conv2d(v[0], v[1], v[2], cp); },
                                  {oracle::random_tensor({2, c, hw, hw}, g), oracle::random_tensor({f, c, k, k}, g),
                                   oracle::random_tensor({f}, g)},
                                  g);
                   }});
  cases.push_back({"dense", [](std::mt19937_64& g) {
                     std::uniform_int_distribution<Index> pick(1, 6);
                     const Index b = pick(g), n = pick(g), m = pick(g);
                     return check([](Tape<double>& t, const std::vector<Var>& v) { return t.dense(v[0], v[1], v[2]); },
                                  {oracle::random_tensor({b, n}, g), oracle::random_tensor({m, n}, g),
                                   oracle::random_tensor({m}, g)},
                                  g);
                   }});
  cases.push_back({"relu", [](std::mt19937_64& g) {
                     // Keep inputs away from the kink at 0.
                     TensorD x = oracle::random_tensor({2, 3, 4, 4}, g);
                     for (auto& v : x.values()) v += v >= 0 ? 0.05 : -0.05;
                     return check([](Tape<double>& t, const std::vector<Var>& v) { return t.relu(v[0]); }, {x}, g);
                   }});
  cases.push_back({"max_pool", [](std::mt19937_64& g) {
                     std::uniform_int_distribution<Index> pick(2, 3);
                     const Index w = pick(g), s = pick(g) - 1;
                     const Index h = w + 2 * s;
                     return check([w, s](Tape<double>& t, const std::vector<Var>& v) { return t.max_pool(v[0], w, s); },
                                  {oracle::random_tensor({2, 2, h, h}, g)}, g);
                   }});
  cases.push_back({"avg_pool", [](std::mt19937_64& g) {
                     std::uniform_int_distribution<Index> pick(2, 3);
                     const Index w = pick(g), s = pick(g) - 1;
                     const Index h = w + 2 * s;
                     return check([w, s](Tape<double>& t, const std::vector<Var>& v) { return t.avg_pool(v[0], w, s); },
                                  {oracle::random_tensor({2, 2, h, h}, g)}, g);
                   }});
  cases.push_back({"batch_norm", [](std::mt19937_64& g) {
                     std::uniform_int_distribution<Index> pick(2, 4);
                     const Index b = pick(g), c = pick(g), h = pick(g);
                     return check(
                         [c](Tape<double>& t, const std::vector<Var>& v) {
                           // Running statistics are scratch here; each call starts fresh.
                           static thread_local TensorD rm, rv;
                           rm = TensorD({c}, 0.0);
                           rv = TensorD({c}, 1.0);
                           return t.batch_norm(v[0], v[1], v[2], rm, rv, true);
                         },
                         {oracle::random_tensor({b, c, h, h}, g), oracle::random_tensor({c}, g, 0.5, 1.5),
                          oracle::random_tensor({c}, g)},
                         g);
                   }});
  cases.push_back({"softmax_cross_entropy", [](std::mt19937_64& g) {
                     std::uniform_int_distribution<Index> pick(2, 6);
                     const Index b = pick(g), k = pick(g);
                     std::vector<Index> labels;
                     for (Index i = 0; i < b; ++i) labels.push_back(std::uniform_int_distribution<Index>(0, k - 1)(g));
                     return check(
                         [labels](Tape<double>& t, const std::vector<Var>& v) {
                           return t.softmax_cross_entropy(v[0], labels);
                         },
                         {oracle::random_tensor({b, k}, g, -3, 3)}, g, true);
                   }});
  return cases;
}

}  // namespace gradcheck
