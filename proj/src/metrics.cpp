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

#include "spoofscope/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "spoofscope/errors.hpp"

namespace spoofscope::metrics {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

ClassMetrics class_metrics(std::size_t tp, std::size_t fp, std::size_t fn) {
  ClassMetrics m;
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  m.f1 = ratio(2 * tp, 2 * tp + fp + fn);
  return m;
}

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw InputError("predictions and labels differ in length");
  if (a == 0) throw MetricError("cannot evaluate an empty prediction set");
}

}  // namespace

EvalReport EvalReport::from_counts(const Confusion& c) {
  EvalReport r;
  r.counts = c;
  r.spoof = class_metrics(c.tp, c.fp, c.fn);
  r.bonafide = class_metrics(c.tn, c.fn, c.fp);
  r.macro.precision = (r.spoof.precision + r.bonafide.precision) / 2.0;
  r.macro.recall = (r.spoof.recall + r.bonafide.recall) / 2.0;
  r.macro.f1 = (r.spoof.f1 + r.bonafide.f1) / 2.0;
  r.accuracy = ratio(c.tp + c.tn, c.total());
  return r;
}

Confusion confusion(std::span<const int> predicted, std::span<const int> labels) {
  check_lengths(predicted.size(), labels.size());
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predicted[i] == 1;
    const bool y = labels[i] == 1;
    if (p && y) ++c.tp;
    else if (p && !y) ++c.fp;
    else if (!p && y) ++c.fn;
    else ++c.tn;
  }
  return c;
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores.size(), labels.size());
  const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw MetricError("ROC is undefined with a single class");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<RocPoint> curve;
  curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double s = scores[order[k]];
    for (; k < order.size() && scores[order[k]] == s; ++k) {
      (labels[order[k]] == 1 ? tp : fp) += 1;
    }
    curve.push_back({s, ratio(fp, n_neg), ratio(tp, n_pos)});
  }
  return curve;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  const auto curve = roc_curve(scores, labels);
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) / 2.0;
  }
  return area;
}

EerResult equal_error_rate(std::span<const double> scores, std::span<const int> labels) {
  const auto curve = roc_curve(scores, labels);
  EerResult best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (const auto& p : curve) {
    const double fnr = 1.0 - p.tpr;
    const double gap = std::abs(p.fpr - fnr);
    if (gap < best_gap) {
      best_gap = gap;
      best = {(p.fpr + fnr) / 2.0, p.threshold, p.fpr, fnr};
    }
  }
  return best;
}

double accuracy(std::span<const int> predicted, std::span<const int> labels) {
  check_lengths(predicted.size(), labels.size());
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += (predicted[i] == labels[i]);
  return ratio(hit, labels.size());
}

EvalReport evaluate(std::span<const double> probs, std::span<const int> labels, double threshold) {
  check_lengths(probs.size(), labels.size());
  std::vector<int> predicted(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) predicted[i] = probs[i] >= threshold ? 1 : 0;
  EvalReport r = EvalReport::from_counts(confusion(predicted, labels));
  const auto n_pos = std::count(labels.begin(), labels.end(), 1);
  if (n_pos > 0 && static_cast<std::size_t>(n_pos) < labels.size()) {
    r.roc_auc = roc_auc(probs, labels);
    const auto e = equal_error_rate(probs, labels);
    r.eer = e.eer;
    r.eer_threshold = e.threshold;
  }
  return r;
}

nlohmann::json to_json(const EvalReport& r) {
  const auto cls = [](const ClassMetrics& m) {
    return nlohmann::json{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
  };
  const auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"model", r.model_id},
          {"dataset", r.dataset_id},
          {"augmentation", r.augmentation_id},
          {"counts", {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"fn", r.counts.fn}, {"tn", r.counts.tn}}},
          {"spoof", cls(r.spoof)},
          {"bonafide", cls(r.bonafide)},
          {"macro", cls(r.macro)},
          {"accuracy", r.accuracy},
          {"roc_auc", opt(r.roc_auc)},
          {"eer", opt(r.eer)},
          {"eer_threshold", std::isfinite(r.eer_threshold.value_or(0.0)) ? opt(r.eer_threshold)
                                                                          : nlohmann::json(nullptr)}};
}

EvalReport report_from_json(const nlohmann::json& doc) {
  const auto& c = doc.at("counts");
  EvalReport r = EvalReport::from_counts({c.at("tp").get<std::size_t>(), c.at("fp").get<std::size_t>(),
                                          c.at("fn").get<std::size_t>(), c.at("tn").get<std::size_t>()});
  r.model_id = doc.value("model", "");
  r.dataset_id = doc.value("dataset", "");
  r.augmentation_id = doc.value("augmentation", "");
  const auto opt = [&](const char* key) -> std::optional<double> {
    if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
    return doc.at(key).get<double>();
  };
  r.roc_auc = opt("roc_auc");
  r.eer = opt("eer");
  r.eer_threshold = opt("eer_threshold");
  return r;
}

}  // namespace spoofscope::metrics
