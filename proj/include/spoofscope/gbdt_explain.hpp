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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "spoofscope/gbdt.hpp"
#include "spoofscope/matrix.hpp"
#include "spoofscope/metrics.hpp"

namespace spoofscope::gbdt_explain {

enum class Metric { accuracy, roc_auc };

Metric parse_metric(const std::string& name);
std::string to_string(Metric m);

// Throws MetricError when the metric is undefined on the data.
double score(const gbdt::Model& model, const Matrix& x, std::span<const int> y, Metric metric);

// Row permutation applied to column `feature` in repeat `repeat`.
using PermutationSource =
    std::function<std::vector<std::size_t>(std::size_t feature, std::size_t repeat)>;

// Seeded source: each (feature, repeat) pair draws from its own derived seed,
// so the result does not depend on evaluation order.
PermutationSource seeded_permutations(std::size_t n_rows, std::uint64_t seed);

// scores(j, r) is the metric after shuffling column j with permutation r.
Matrix permutation_scores(const gbdt::Model& model, const Matrix& x, std::span<const int> y,
                          Metric metric, int repeats, const PermutationSource& perms);

namespace serial {
Matrix permutation_scores(const gbdt::Model& model, const Matrix& x, std::span<const int> y,
                          Metric metric, int repeats, const PermutationSource& perms);
}  // namespace serial

struct FeatureImportance {
  std::string name;
  double mean = 0.0;  // baseline - mean shuffled score
  double std = 0.0;   // population std of the shuffled scores
  int repeats = 0;
};

struct ImportanceReport {
  Metric metric = Metric::accuracy;
  double baseline = 0.0;
  std::vector<FeatureImportance> features;
};

ImportanceReport permutation_importance(const gbdt::Model& model, const Matrix& x,
                                        std::span<const int> y, Metric metric, int repeats,
                                        const PermutationSource& perms,
                                        std::span<const std::string> names = {});

ImportanceReport permutation_importance(const gbdt::Model& model, const Matrix& x,
                                        std::span<const int> y, Metric metric, int repeats,
                                        std::uint64_t seed,
                                        std::span<const std::string> names = {});

// Ranks starting at 1; ties share their average rank.
std::vector<double> average_ranks(std::span<const double> v);

struct SpearmanResult {
  Matrix rho;
  std::vector<bool> constant;  // columns whose correlations were set to 0
};

SpearmanResult spearman_matrix(const Matrix& x);

struct Merge {
  std::size_t a = 0;  // cluster ids: 0..n-1 are features, n+k is merge k
  std::size_t b = 0;
  double height = 0.0;
  std::size_t size = 0;
};

struct FeatureClustering {
  std::vector<Merge> merges;
  double distance_threshold = 0.0;
  std::vector<std::vector<std::size_t>> clusters;  // ordered by smallest member
  std::vector<std::size_t> representatives;        // filled by select_representatives
};

// Default flat-cut height; gives a handful of clusters on 37-feature data.
inline constexpr double kDefaultCut = 1.0;

// Ward agglomeration on d = 1 - rho, cut where merge height <= threshold.
FeatureClustering ward_cluster(const Matrix& corr, double threshold);

// Most important member of each cluster (ties -> lowest index).
std::vector<std::size_t> select_representatives(const FeatureClustering& clustering,
                                                const ImportanceReport& importance);

Matrix project_columns(const Matrix& x, std::span<const std::size_t> columns);

struct SubsetResult {
  gbdt::Model model;
  metrics::EvalReport report;
};

SubsetResult retrain_subset(const gbdt::Dataset& train, const gbdt::Dataset& test,
                            std::span<const std::size_t> subset, const gbdt::Config& cfg);

nlohmann::json to_json(const ImportanceReport& r);
nlohmann::json to_json(const FeatureClustering& c, std::span<const std::string> names);
std::string importance_csv(const ImportanceReport& r);
std::string importance_text(const ImportanceReport& r, std::size_t top_k);
std::string dendrogram_text(const FeatureClustering& c, std::span<const std::string> names);

}  // namespace spoofscope::gbdt_explain
