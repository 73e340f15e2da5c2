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

#include "lithocnn/optimizers.hpp"

#include <algorithm>

namespace lithocnn {

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::adam:
      return "adam";
    case OptimizerKind::sgd:
      return "sgd";
    case OptimizerKind::rmsprop:
      return "rmsprop";
  }
  return "?";
}

OptimizerKind optimizer_kind_from_string(std::string_view name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "rmsprop") return OptimizerKind::rmsprop;
  throw ParameterError("unknown optimizer '" + std::string(name) + "'");
}

double poly_decay(double alpha0, double ep, double ep_max, double power) {
  if (ep_max <= 0) throw ParameterError("poly_decay: ep_max must be positive");
  if (ep < 0 || ep > ep_max) {
    throw ParameterError("poly_decay: epoch " + std::to_string(ep) + " outside [0, " + std::to_string(ep_max) + "]");
  }
  if (ep == ep_max) return 0.0;
  return alpha0 * std::pow(1.0 - ep / ep_max, power);
}

double step_decay(double alpha0, int ep, std::span<const int> boundaries, double factor) {
  const auto n = std::count_if(boundaries.begin(), boundaries.end(), [ep](int b) { return b <= ep; });
  if (n == 0) return alpha0;
  // Dividing by an integral reciprocal keeps 0.1-style factors exact (1e-3 -> 1e-4, not 1.0000000000000002e-4).
  const double inv = 1.0 / factor;
  if (std::abs(inv - std::round(inv)) < 1e-12) return alpha0 / std::pow(std::round(inv), static_cast<double>(n));
  return alpha0 * std::pow(factor, static_cast<double>(n));
}

void LRSchedule::validate() const {
  if (!(alpha0 > 0)) throw ParameterError("learning rate must be positive");
  if (ep_max < 1) throw ParameterError("ep_max must be >= 1");
  if (!(factor > 0)) throw ParameterError("step factor must be positive");
  for (std::size_t i = 1; i < boundaries.size(); ++i) {
    if (boundaries[i] <= boundaries[i - 1]) throw ParameterError("step boundaries must be strictly increasing");
  }
}

double LRSchedule::at(int epoch) const {
  switch (kind) {
    case Kind::polynomial:
      return poly_decay(alpha0, std::min(epoch, ep_max), ep_max, power);
    case Kind::step:
      return step_decay(alpha0, epoch, boundaries, factor);
    case Kind::constant:
      return alpha0;
  }
  return alpha0;
}

std::string_view to_string(LRSchedule::Kind kind) {
  switch (kind) {
    case LRSchedule::Kind::polynomial:
      return "polynomial";
    case LRSchedule::Kind::step:
      return "step";
    case LRSchedule::Kind::constant:
      return "constant";
  }
  return "?";
}

LRSchedule::Kind schedule_kind_from_string(std::string_view name) {
  if (name == "polynomial") return LRSchedule::Kind::polynomial;
  if (name == "step") return LRSchedule::Kind::step;
  if (name == "constant") return LRSchedule::Kind::constant;
  throw ParameterError("unknown learning-rate schedule '" + std::string(name) + "'");
}

}  // namespace lithocnn
