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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "spoofscope/matrix.hpp"

namespace spoofscope::gbdt {

// Labels are 1 for the positive class (spoof) and 0 otherwise.
struct Config {
  int n_estimators = 400;
  int max_depth = 8;
  double learning_rate = 0.1;
  int min_samples_leaf = 1;
  std::uint64_t seed = 0;
};

void validate(const Config& cfg);

struct Node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
};

// Node 0 is the root. Samples with x[feature] <= threshold go left.
struct RegressionTree {
  std::vector<Node> nodes;

  double predict(std::span<const double> x) const;
  int depth() const;
  bool uses_feature(std::size_t j) const;
};

struct Model {
  double f0 = 0.0;
  double learning_rate = 0.1;
  std::size_t n_features = 0;
  std::vector<RegressionTree> trees;
  std::vector<std::string> feature_names;

  // f0 + lr*h_1(x) + lr*h_2(x) + ..., accumulated tree by tree exactly as
  // during training.
  double score(std::span<const double> x) const;
  double predict_proba(std::span<const double> x) const;
  int predict(std::span<const double> x) const { return predict_proba(x) >= 0.5 ? 1 : 0; }
  std::vector<double> predict_proba(const Matrix& x) const;
  std::vector<int> predict(const Matrix& x) const;
};

double sigmoid(double z);

// ln(n_pos / n_neg). Throws DegenerateLabels if either class is missing.
double init_log_odds(std::span<const int> labels);

// y - p, elementwise.
std::vector<double> pseudo_residuals(std::span<const int> labels, std::span<const double> probs);

double logistic_loss(std::span<const int> labels, std::span<const double> scores);

// Per-feature row orderings of the samples that reach one tree node.
using SortedColumns = std::vector<std::vector<std::uint32_t>>;

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Best variance-reduction split of the node described by `sorted`. Ties are
// broken toward the lowest feature index, then the lowest threshold. The
// parallel version searches features concurrently and reduces in feature
// order, so it always agrees with the serial reference.
Split best_split(const Matrix& x, const SortedColumns& sorted, std::span<const double> residuals,
                 int min_samples_leaf);

namespace serial {
Split best_split(const Matrix& x, const SortedColumns& sorted, std::span<const double> residuals,
                 int min_samples_leaf);
}  // namespace serial

// Greedy regression tree on the residuals. Leaves hold the Newton step
// sum(r) / sum(p(1-p)) clamped to [-4, 4].
RegressionTree fit_tree(const Matrix& x, std::span<const double> residuals,
                        std::span<const double> probs, const Config& cfg);

struct TrainLog {
  std::vector<double> loss;  // mean logistic loss before round 1, then after each round
};

Model train(const Matrix& x, std::span<const int> labels, const Config& cfg,
            TrainLog* log = nullptr);

nlohmann::json to_json(const Model& model);
Model from_json(const nlohmann::json& doc);

void save(const Model& model, const std::filesystem::path& path,
          const nlohmann::json& meta = nlohmann::json::object());
Model load(const std::filesystem::path& path);

}  // namespace spoofscope::gbdt

namespace spoofscope::gbdt {

// Feature rows with 0/1 labels.
struct Dataset {
  Matrix x;
  std::vector<int> y;
};

}  // namespace spoofscope::gbdt
