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

#include "spoofscope/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "spoofscope/errors.hpp"

namespace spoofscope::gbdt {

namespace {

constexpr double kLeafClamp = 4.0;
constexpr double kMinGain = 1e-12;
constexpr int kFormatVersion = 1;

double leaf_value(std::span<const std::uint32_t> rows, std::span<const double> residuals,
                  std::span<const double> probs) {
  double num = 0.0, den = 0.0;
  for (auto i : rows) {
    num += residuals[i];
    den += probs[i] * (1.0 - probs[i]);
  }
  if (den <= 0.0) return 0.0;
  return std::clamp(num / den, -kLeafClamp, kLeafClamp);
}

// Best split on one feature; `order` holds the node's rows sorted by it.
Split scan_feature(const Matrix& x, std::size_t feature, std::span<const std::uint32_t> order,
                   std::span<const double> residuals, int min_leaf) {
  Split best;
  const std::size_t n = order.size();
  if (n < 2) return best;
  double total = 0.0;
  for (auto i : order) total += residuals[i];
  const double base = total * total / static_cast<double>(n);
  const auto min_n = static_cast<std::size_t>(min_leaf);

  double left = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    left += residuals[order[k]];
    const std::size_t n_left = k + 1;
    const std::size_t n_right = n - n_left;
    if (n_left < min_n) continue;
    if (n_right < min_n) break;
    const double lo = x(order[k], feature);
    const double hi = x(order[k + 1], feature);
    if (!(lo < hi)) continue;
    const double right = total - left;
    const double gain = left * left / static_cast<double>(n_left) +
                        right * right / static_cast<double>(n_right) - base;
    if (gain > best.gain) {
      double thr = lo + (hi - lo) / 2.0;
      if (!(thr < hi)) thr = lo;
      best.feature = static_cast<int>(feature);
      best.threshold = thr;
      best.gain = gain;
    }
  }
  return best;
}

Split reduce(std::span<const Split> per_feature) {
  Split best;
  for (const Split& s : per_feature) {
    if (s.feature >= 0 && s.gain > best.gain) best = s;
  }
  return best;
}

struct Builder {
  const Matrix& x;
  std::span<const double> residuals;
  std::span<const double> probs;
  const Config& cfg;
  RegressionTree tree;

  int grow(SortedColumns sorted, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const auto& rows = sorted.front();
    const auto n = rows.size();

    Split split;
    if (depth < cfg.max_depth && n >= 2 * static_cast<std::size_t>(cfg.min_samples_leaf)) {
      split = best_split(x, sorted, residuals, cfg.min_samples_leaf);
    }
    if (split.feature < 0 || split.gain <= kMinGain) {
      tree.nodes[id].value = leaf_value(rows, residuals, probs);
      return id;
    }

    const auto f = static_cast<std::size_t>(split.feature);
    SortedColumns left(sorted.size()), right(sorted.size());
    for (std::size_t j = 0; j < sorted.size(); ++j) {
      left[j].reserve(n);
      right[j].reserve(n);
      for (auto i : sorted[j]) {
        (x(i, f) <= split.threshold ? left[j] : right[j]).push_back(i);
      }
    }
    sorted.clear();
    sorted.shrink_to_fit();

    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    Node& node = tree.nodes[id];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }
};

void check_features(const Matrix& x) {
  for (double v : x.values()) {
    if (!std::isfinite(v)) throw InputError("feature matrix contains NaN or infinite values");
  }
}

}  // namespace

void validate(const Config& cfg) {
  if (cfg.n_estimators < 1) throw InputError("n_estimators must be at least 1");
  if (cfg.max_depth < 1) throw InputError("max_depth must be at least 1");
  if (!(cfg.learning_rate > 0.0)) throw InputError("learning_rate must be positive");
  if (cfg.min_samples_leaf < 1) throw InputError("min_samples_leaf must be at least 1");
}

double RegressionTree::predict(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const Node& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                       : n.right);
  }
  return nodes[i].value;
}

int RegressionTree::depth() const {
  // Iterative walk so deep trees cannot blow the stack.
  int best = 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    const Node& n = nodes[static_cast<std::size_t>(i)];
    if (!n.is_leaf()) {
      stack.emplace_back(n.left, d + 1);
      stack.emplace_back(n.right, d + 1);
    }
  }
  return best;
}

bool RegressionTree::uses_feature(std::size_t j) const {
  return std::any_of(nodes.begin(), nodes.end(),
                     [j](const Node& n) { return n.feature == static_cast<int>(j); });
}

double Model::score(std::span<const double> x) const {
  if (x.size() != n_features) throw InputError("feature dimension does not match the model");
  double f = f0;
  for (const auto& t : trees) f += learning_rate * t.predict(x);
  return f;
}

double Model::predict_proba(std::span<const double> x) const { return sigmoid(score(x)); }

std::vector<double> Model::predict_proba(const Matrix& x) const {
  std::vector<double> p(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) p[i] = predict_proba(x.row(i));
  return p;
}

std::vector<int> Model::predict(const Matrix& x) const {
  std::vector<int> y(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) y[i] = predict(x.row(i));
  return y;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double init_log_odds(std::span<const int> labels) {
  std::size_t pos = 0;
  for (int y : labels) pos += (y == 1);
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw DegenerateLabels("both classes must be present");
  return std::log(static_cast<double>(pos) / static_cast<double>(neg));
}

std::vector<double> pseudo_residuals(std::span<const int> labels, std::span<const double> probs) {
  if (labels.size() != probs.size()) throw InputError("labels and probabilities differ in length");
  std::vector<double> r(labels.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = static_cast<double>(labels[i]) - probs[i];
  return r;
}

double logistic_loss(std::span<const int> labels, std::span<const double> scores) {
  // log(1 + e^F) - y F, evaluated without overflow.
  double acc = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double f = scores[i];
    const double softplus = f > 0.0 ? f + std::log1p(std::exp(-f)) : std::log1p(std::exp(f));
    acc += softplus - static_cast<double>(labels[i]) * f;
  }
  return acc / static_cast<double>(labels.size());
}

Split best_split(const Matrix& x, const SortedColumns& sorted, std::span<const double> residuals,
                 int min_samples_leaf) {
  std::vector<Split> per_feature(sorted.size());
  const auto d = static_cast<long>(sorted.size());
  const bool parallel = sorted.front().size() * sorted.size() > 4096;
#pragma omp parallel for schedule(static) if (parallel)
  for (long j = 0; j < d; ++j) {
    const auto f = static_cast<std::size_t>(j);
    per_feature[f] = scan_feature(x, f, sorted[f], residuals, min_samples_leaf);
  }
  return reduce(per_feature);
}

namespace serial {

Split best_split(const Matrix& x, const SortedColumns& sorted, std::span<const double> residuals,
                 int min_samples_leaf) {
  std::vector<Split> per_feature(sorted.size());
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    per_feature[j] = scan_feature(x, j, sorted[j], residuals, min_samples_leaf);
  }
  return reduce(per_feature);
}

}  // namespace serial

RegressionTree fit_tree(const Matrix& x, std::span<const double> residuals,
                        std::span<const double> probs, const Config& cfg) {
  validate(cfg);
  if (x.rows() != residuals.size() || x.rows() != probs.size()) {
    throw InputError("fit_tree: inputs differ in length");
  }
  if (x.rows() == 0 || x.cols() == 0) throw InputError("fit_tree: empty feature matrix");

  SortedColumns sorted(x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    auto& order = sorted[j];
    order.resize(x.rows());
    std::iota(order.begin(), order.end(), std::uint32_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return x(a, j) < x(b, j); });
  }
  Builder b{x, residuals, probs, cfg, {}};
  b.grow(std::move(sorted), 0);
  return std::move(b.tree);
}

Model train(const Matrix& x, std::span<const int> labels, const Config& cfg, TrainLog* log) {
  validate(cfg);
  if (x.rows() != labels.size()) throw InputError("feature rows and labels differ in length");
  for (int y : labels) {
    if (y != 0 && y != 1) throw InputError("labels must be 0 or 1");
  }
  check_features(x);

  Model model;
  model.f0 = init_log_odds(labels);
  model.learning_rate = cfg.learning_rate;
  model.n_features = x.cols();

  std::vector<double> scores(x.rows(), model.f0);
  std::vector<double> probs(x.rows());
  if (log) log->loss.assign(1, logistic_loss(labels, scores));

  for (int m = 0; m < cfg.n_estimators; ++m) {
    for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = sigmoid(scores[i]);
    const auto residuals = pseudo_residuals(labels, probs);
    RegressionTree tree = fit_tree(x, residuals, probs, cfg);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      scores[i] += model.learning_rate * tree.predict(x.row(i));
    }
    model.trees.push_back(std::move(tree));
    if (log) log->loss.push_back(logistic_loss(labels, scores));
  }
  return model;
}

nlohmann::json to_json(const Model& model) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : model.trees) {
    nlohmann::json feature = nlohmann::json::array(), threshold = nlohmann::json::array(),
                   left = nlohmann::json::array(), right = nlohmann::json::array(),
                   value = nlohmann::json::array();
    for (const auto& n : t.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(n.value);
    }
    trees.push_back({{"feature", feature},
                     {"threshold", threshold},
                     {"left", left},
                     {"right", right},
                     {"value", value}});
  }
  return {{"format", "spoofscope.gbdt"},
          {"version", kFormatVersion},
          {"f0", model.f0},
          {"learning_rate", model.learning_rate},
          {"n_features", model.n_features},
          {"feature_names", model.feature_names},
          {"trees", trees}};
}

Model from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format") != "spoofscope.gbdt") throw InputError("not a GBDT model document");
    if (doc.at("version").get<int>() != kFormatVersion) {
      throw InputError("unsupported GBDT model version");
    }
    Model model;
    model.f0 = doc.at("f0").get<double>();
    model.learning_rate = doc.at("learning_rate").get<double>();
    model.n_features = doc.at("n_features").get<std::size_t>();
    model.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    for (const auto& t : doc.at("trees")) {
      const auto feature = t.at("feature").get<std::vector<int>>();
      const auto threshold = t.at("threshold").get<std::vector<double>>();
      const auto left = t.at("left").get<std::vector<int>>();
      const auto right = t.at("right").get<std::vector<int>>();
      const auto value = t.at("value").get<std::vector<double>>();
      const std::size_t n = feature.size();
      if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n ||
          n == 0) {
        throw InputError("malformed tree arrays");
      }
      RegressionTree tree;
      tree.nodes.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        tree.nodes[i] = {feature[i], threshold[i], left[i], right[i], value[i]};
        if (feature[i] >= 0) {
          const auto bad = [n](int c) { return c <= 0 || static_cast<std::size_t>(c) >= n; };
          if (bad(left[i]) || bad(right[i]) ||
              static_cast<std::size_t>(feature[i]) >= model.n_features) {
            throw InputError("tree node references are out of range");
          }
        }
      }
      model.trees.push_back(std::move(tree));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed GBDT model: ") + e.what());
  }
}

void save(const Model& model, const std::filesystem::path& path, const nlohmann::json& meta) {
  nlohmann::json doc = to_json(model);
  if (!meta.empty()) doc["meta"] = meta;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write model: " + path.string());
  out << doc.dump(1) << '\n';
}

Model load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PathError("cannot open model: " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("cannot parse model " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

}  // namespace spoofscope::gbdt
