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

// Confusion matrices (rows = true class, columns = predicted class) and the
// metrics derived from them. Zero denominators give 0 with an "undefined" flag.

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "lithocnn/tensor.hpp"

namespace lithocnn {

struct UndefinedMetricError : std::domain_error {
  using std::domain_error::domain_error;
};

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

struct ConfusionMatrix {
  CountMatrix counts;
  std::vector<std::string> labels;

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(Index k, std::vector<std::string> names = {});

  Index classes() const noexcept { return counts.rows(); }
  std::int64_t total() const { return counts.sum(); }
  void add(Index truth, Index predicted);
  /// Elementwise sum; both matrices must have the same class count.
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
};

ConfusionMatrix confusion_matrix(std::span<const Index> truth, std::span<const Index> predicted, Index k,
                                 std::vector<std::string> labels = {});

struct Metric {
  double value = 0;
  bool undefined = false;
};

/// correct / total; throws UndefinedMetricError on an empty matrix.
double accuracy(const ConfusionMatrix& cm);
/// cm[c][c] / column sum.
Metric precision(const ConfusionMatrix& cm, Index c);
/// cm[c][c] / row sum.
Metric recall(const ConfusionMatrix& cm, Index c);
/// (1 + b^2) p r / (b^2 p + r); 0 when p = r = 0.
double f_beta(double precision, double recall, double beta = 1.0);

struct ClassMetrics {
  std::string label;
  double precision = 0;
  double recall = 0;
  double f_beta = 0;
  std::int64_t support = 0;
  bool precision_undefined = false;
  bool recall_undefined = false;
};

struct EvalReport {
  std::vector<ClassMetrics> classes;
  double accuracy = 0;
  bool accuracy_undefined = false;
  double macro_precision = 0;
  double macro_recall = 0;
  double macro_f_beta = 0;
  double beta = 1.0;
  std::int64_t total = 0;
};

EvalReport classification_report(const ConfusionMatrix& cm, double beta = 1.0);

nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(const ConfusionMatrix& cm);
std::string report_text(const EvalReport& report);
std::string confusion_csv(const ConfusionMatrix& cm);

/// Unordered class pair {i, j}, i < j, with the largest cm[i][j] + cm[j][i].
/// Ties resolve to the lexicographically first pair.
std::pair<Index, Index> most_confused_pair(const ConfusionMatrix& cm);

}  // namespace lithocnn
