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

#include "lithocnn/evaluation.hpp"

#include <algorithm>
#include <cstdio>

namespace lithocnn {

ConfusionMatrix::ConfusionMatrix(Index k, std::vector<std::string> names)
    : counts(CountMatrix::Zero(k, k)), labels(std::move(names)) {
  if (k < 1) throw ParameterError("confusion matrix needs at least one class");
  if (labels.empty()) {
    for (Index i = 0; i < k; ++i) labels.push_back(std::to_string(i));
  }
  if (static_cast<Index>(labels.size()) != k) throw ParameterError("label count does not match class count");
}

void ConfusionMatrix::add(Index truth, Index predicted) {
  const Index k = classes();
  if (truth < 0 || truth >= k || predicted < 0 || predicted >= k) {
    throw DataError("label out of range [0," + std::to_string(k) + "): true=" + std::to_string(truth) +
                    " predicted=" + std::to_string(predicted));
  }
  ++counts(truth, predicted);
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.classes() != classes()) throw DimensionError("cannot merge confusion matrices of different sizes");
  counts += other.counts;
  return *this;
}

ConfusionMatrix confusion_matrix(std::span<const Index> truth, std::span<const Index> predicted, Index k,
                                 std::vector<std::string> labels) {
  if (truth.size() != predicted.size()) {
    throw DimensionError("label lists differ in length: " + std::to_string(truth.size()) + " vs " +
                         std::to_string(predicted.size()));
  }
  ConfusionMatrix cm(k, std::move(labels));
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total == 0) throw UndefinedMetricError("accuracy of an empty confusion matrix");
  return static_cast<double>(cm.counts.trace()) / static_cast<double>(total);
}

Metric precision(const ConfusionMatrix& cm, Index c) {
  const std::int64_t col = cm.counts.col(c).sum();
  if (col == 0) return {0.0, true};
  return {static_cast<double>(cm.counts(c, c)) / static_cast<double>(col), false};
}

Metric recall(const ConfusionMatrix& cm, Index c) {
  const std::int64_t row = cm.counts.row(c).sum();
  if (row == 0) return {0.0, true};
  return {static_cast<double>(cm.counts(c, c)) / static_cast<double>(row), false};
}

double f_beta(double p, double r, double beta) {
  if (!(beta > 0)) throw ParameterError("beta must be positive");
  if (p == 0 && r == 0) return 0.0;
  // With p = r the expression is p algebraically; return it without rounding noise.
  if (p == r) return p;
  const double b2 = beta * beta;
  return (1 + b2) * p * r / (b2 * p + r);
}

EvalReport classification_report(const ConfusionMatrix& cm, double beta) {
  EvalReport rep;
  rep.beta = beta;
  rep.total = cm.total();
  if (rep.total == 0) {
    rep.accuracy_undefined = true;
  } else {
    rep.accuracy = accuracy(cm);
  }
  const Index k = cm.classes();
  for (Index c = 0; c < k; ++c) {
    ClassMetrics m;
    m.label = cm.labels[static_cast<std::size_t>(c)];
    const Metric p = precision(cm, c), r = recall(cm, c);
    m.precision = p.value;
    m.recall = r.value;
    m.precision_undefined = p.undefined;
    m.recall_undefined = r.undefined;
    m.f_beta = f_beta(p.value, r.value, beta);
    m.support = cm.counts.row(c).sum();
    rep.macro_precision += m.precision;
    rep.macro_recall += m.recall;
    rep.macro_f_beta += m.f_beta;
    rep.classes.push_back(std::move(m));
  }
  rep.macro_precision /= static_cast<double>(k);
  rep.macro_recall /= static_cast<double>(k);
  rep.macro_f_beta /= static_cast<double>(k);
  return rep;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : r.classes) {
    classes.push_back({{"label", c.label},
                       {"precision", c.precision},
                       {"recall", c.recall},
                       {"f_beta", c.f_beta},
                       {"support", c.support},
                       {"precision_undefined", c.precision_undefined},
                       {"recall_undefined", c.recall_undefined}});
  }
  return {{"accuracy", r.accuracy},
          {"accuracy_undefined", r.accuracy_undefined},
          {"beta", r.beta},
          {"total", r.total},
          {"macro_precision", r.macro_precision},
          {"macro_recall", r.macro_recall},
          {"macro_f_beta", r.macro_f_beta},
          {"classes", classes}};
}

nlohmann::json to_json(const ConfusionMatrix& cm) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < cm.classes(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < cm.classes(); ++j) row.push_back(cm.counts(i, j));
    rows.push_back(row);
  }
  return {{"labels", cm.labels}, {"counts", rows}, {"orientation", "rows=true,cols=predicted"}};
}

std::string report_text(const EvalReport& r) {
  std::size_t width = 9;
  for (const auto& c : r.classes) width = std::max(width, c.label.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s %9s %9s %9s %9s\n", static_cast<int>(width), "class", "precision", "recall",
                "f_beta", "support");
  out += buf;
  for (const auto& c : r.classes) {
    std::snprintf(buf, sizeof buf, "%-*s %8.4f%s %8.4f%s %9.4f %9lld\n", static_cast<int>(width), c.label.c_str(),
                  c.precision, c.precision_undefined ? "*" : " ", c.recall, c.recall_undefined ? "*" : " ", c.f_beta,
                  static_cast<long long>(c.support));
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%-*s %9.4f %9.4f %9.4f %9lld\n", static_cast<int>(width), "macro avg",
                r.macro_precision, r.macro_recall, r.macro_f_beta, static_cast<long long>(r.total));
  out += buf;
  std::snprintf(buf, sizeof buf, "accuracy %.4f%s   beta %g\n", r.accuracy, r.accuracy_undefined ? " (undefined)" : "",
                r.beta);
  out += buf;
  bool flagged = false;
  for (const auto& c : r.classes) flagged = flagged || c.precision_undefined || c.recall_undefined;
  if (flagged) out += "* undefined (zero denominator), reported as 0\n";
  return out;
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::string out = "true\\predicted";
  for (const auto& l : cm.labels) out += "," + l;
  out += '\n';
  for (Index i = 0; i < cm.classes(); ++i) {
    out += cm.labels[static_cast<std::size_t>(i)];
    for (Index j = 0; j < cm.classes(); ++j) out += "," + std::to_string(cm.counts(i, j));
    out += '\n';
  }
  return out;
}

std::pair<Index, Index> most_confused_pair(const ConfusionMatrix& cm) {
  if (cm.classes() < 2) throw DimensionError("most_confused_pair needs at least two classes");
  std::pair<Index, Index> best{0, 1};
  std::int64_t best_count = -1;
  for (Index i = 0; i < cm.classes(); ++i) {
    for (Index j = i + 1; j < cm.classes(); ++j) {
      const std::int64_t n = cm.counts(i, j) + cm.counts(j, i);
      if (n > best_count) {
        best_count = n;
        best = {i, j};
      }
    }
  }
  return best;
}

}  // namespace lithocnn
