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

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "lithocnn/optimizers.hpp"
#include "oracles.hpp"

using namespace lithocnn;

namespace {

// Gradient of a non-quadratic scalar objective, so trajectories do not collapse early.
double grad_fn(double w) { return 2 * (w - 3) + std::cos(w); }

std::vector<double> run(OptimizerConfig cfg, double w0, double alpha, int steps) {
  std::vector<Tensor<double>> w{Tensor<double>(Shape{1}, w0)};
  auto state = make_optimizer_state<double>(cfg, std::vector<Shape>{Shape{1}});
  std::vector<double> out;
  for (int i = 0; i < steps; ++i) {
    std::vector<Tensor<double>> g{Tensor<double>(Shape{1}, grad_fn(w[0][0]))};
    optimizer_step(w, g, state, alpha);
    out.push_back(w[0][0]);
  }
  return out;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST(Optimizers, AdamMatchesRecurrence) {
  OptimizerConfig c;
  c.kind = OptimizerKind::adam;
  EXPECT_LE(max_diff(run(c, -2.0, 0.05, 100), oracle::adam_trajectory(-2.0, grad_fn, 0.05, 0.9, 0.999, 1e-8, 100)),
            1e-12);
}

TEST(Optimizers, SgdMatchesRecurrence) {
  OptimizerConfig c;
  c.kind = OptimizerKind::sgd;
  EXPECT_LE(max_diff(run(c, 5.0, 0.1, 100), oracle::sgd_trajectory(5.0, grad_fn, 0.1, 0.0, 100)), 1e-12);
  c.momentum = 0.8;
  EXPECT_LE(max_diff(run(c, 5.0, 0.05, 100), oracle::sgd_trajectory(5.0, grad_fn, 0.05, 0.8, 100)), 1e-12);
}

TEST(Optimizers, RmspropMatchesRecurrence) {
  OptimizerConfig c;
  c.kind = OptimizerKind::rmsprop;
  EXPECT_LE(max_diff(run(c, 0.5, 0.01, 100), oracle::rmsprop_trajectory(0.5, grad_fn, 0.01, 0.9, 1e-8, 100)), 1e-12);
}

TEST(Optimizers, FirstAdamStepIsAlphaTimesSign) {
  // Bias correction makes the first step alpha * g / (|g| + eps).
  OptimizerConfig c;
  const auto w = run(c, 0.0, 0.001, 1);
  EXPECT_NEAR(w[0], 0.001, 1e-10);  // grad_fn(0) = -5
}

TEST(Optimizers, NonFiniteGradientAborts) {
  OptimizerConfig c;
  std::vector<Tensor<double>> w{Tensor<double>(Shape{2}, 1.0)};
  auto s = make_optimizer_state<double>(c, std::vector<Shape>{Shape{2}});
  std::vector<Tensor<double>> g{Tensor<double>(Shape{2}, {1.0, std::nan("")})};
  EXPECT_THROW(optimizer_step(w, g, s, 0.1), NumericError);
  std::vector<Tensor<double>> bad{Tensor<double>(Shape{3}, 1.0)};
  EXPECT_THROW(optimizer_step(w, bad, s, 0.1), DimensionError);
}

TEST(Schedules, PolyDecayEndpointsExact) {
  for (double a0 : {1e-3, 0.1, 0.37}) {
    for (double p : {0.5, 1.0, 2.0}) {
      EXPECT_EQ(poly_decay(a0, 0, 20, p), a0);
      EXPECT_EQ(poly_decay(a0, 20, 20, p), 0.0);
    }
  }
  EXPECT_DOUBLE_EQ(poly_decay(1.0, 5, 10, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(poly_decay(1.0, 5, 10, 2.0), 0.25);
  EXPECT_THROW(poly_decay(1.0, 21, 20), ParameterError);
  EXPECT_THROW(poly_decay(1.0, -1, 20), ParameterError);
}

TEST(Schedules, StepDecay) {
  const std::vector<int> b{10, 15};
  EXPECT_EQ(step_decay(1e-2, 0, b), 1e-2);
  EXPECT_EQ(step_decay(1e-2, 9, b), 1e-2);
  EXPECT_EQ(step_decay(1e-2, 10, b), 1e-3);
  EXPECT_EQ(step_decay(1e-2, 15, b), 1e-4);
  EXPECT_DOUBLE_EQ(step_decay(1.0, 12, b, 0.5), 0.5);
  LRSchedule s;
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.at(0), s.alpha0);
  s.boundaries = {15, 10};
  EXPECT_THROW(s.validate(), ParameterError);
}

TEST(Optimizers, QuadraticConvergence) {
  // f = theta^2 / 2 from theta0 = 1, alpha = 1e-3: |theta| must fall
  // monotonically until it first drops below 1e-3, within 10 000 steps.
  for (OptimizerKind kind : {OptimizerKind::adam, OptimizerKind::sgd, OptimizerKind::rmsprop}) {
    OptimizerConfig c;
    c.kind = kind;
    if (kind == OptimizerKind::sgd) c.momentum = 0.9;
    std::vector<Tensor<double>> w{Tensor<double>(Shape{1}, 1.0)};
    auto s = make_optimizer_state<double>(c, std::vector<Shape>{Shape{1}});
    double prev = 1.0;
    int reached = -1;
    for (int i = 0; i < 10000 && reached < 0; ++i) {
      std::vector<Tensor<double>> g{w[0]};
      optimizer_step(w, g, s, 1e-3);
      const double a = std::abs(w[0][0]);
      EXPECT_LE(a, prev) << to_string(kind) << " step " << i;
      prev = a;
      if (a < 1e-3) reached = i;
    }
    EXPECT_GE(reached, 0) << to_string(kind);
  }
}

TEST(Schedules, PureAndMonotone) {
  for (double p : {0.5, 1.0, 3.0}) {
    double prev = INFINITY;
    for (int ep = 0; ep <= 50; ++ep) {
      const double a = poly_decay(0.01, ep, 50, p);
      EXPECT_EQ(a, poly_decay(0.01, ep, 50, p));
      EXPECT_LE(a, prev);
      prev = a;
    }
  }
}

TEST(Schedules, DefaultStepRunUsesThreeRates) {
  const LRSchedule s;
  std::set<double> seen;
  for (int ep = 0; ep < 20; ++ep) seen.insert(s.at(ep));
  EXPECT_EQ(seen, (std::set<double>{s.alpha0, s.alpha0 / 10, s.alpha0 / 100}));
}
