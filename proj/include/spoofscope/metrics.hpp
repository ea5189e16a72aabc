/* Copyright 2026 The SpoofScope Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace spoofscope::metrics {

// Positive class is spoof (label 1).
struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  std::string model_id;
  std::string dataset_id;
  std::string augmentation_id;
  Confusion counts;
  ClassMetrics spoof;
  ClassMetrics bonafide;
  ClassMetrics macro;
  double accuracy = 0.0;
  std::optional<double> roc_auc;  // absent when only one class is present
  std::optional<double> eer;
  std::optional<double> eer_threshold;

  // Derives every count-based metric; undefined ratios (0/0) are 0.
  static EvalReport from_counts(const Confusion& c);
};

Confusion confusion(std::span<const int> predicted, std::span<const int> labels);

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

// One point per distinct score (descending), preceded by (0, 0).
// Throws MetricError when either class is absent.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);

// Trapezoidal area under roc_curve.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
  double fpr = 0.0;
  double fnr = 0.0;
};

// Operating point on the ROC that minimises |FPR - FNR|; eer is their mean.
EerResult equal_error_rate(std::span<const double> scores, std::span<const int> labels);

double accuracy(std::span<const int> predicted, std::span<const int> labels);

// Thresholds probabilities at `threshold` (p >= threshold -> spoof).
EvalReport evaluate(std::span<const double> probs, std::span<const int> labels,
                    double threshold = 0.5);

nlohmann::json to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& doc);

}  // namespace spoofscope::metrics
