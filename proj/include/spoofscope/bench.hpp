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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "spoofscope/audio.hpp"
#include "spoofscope/augment.hpp"
#include "spoofscope/dsp.hpp"
#include "spoofscope/gbdt.hpp"
#include "spoofscope/manifest.hpp"
#include "spoofscope/metrics.hpp"
#include "spoofscope/transformer.hpp"

namespace spoofscope::bench {

// Decoded clips of one dataset, index-aligned.
struct Corpus {
  std::string name;
  std::vector<AudioBuffer> audio;
  std::vector<int> labels;
  std::vector<Split> splits;

  std::size_t size() const { return audio.size(); }
  std::vector<std::size_t> indices(Split s) const;
};

// Reads every entry, resampling to sample_rate when needed.
Corpus load_corpus(const DatasetManifest& m, int sample_rate = 16000);

enum class ModelKind { gbdt, transformer };

ModelKind parse_model_kind(const std::string& s);
std::string to_string(ModelKind k);

struct BenchConfig {
  double duration_s = 6.0;
  // Per-class evaluation size; unset means the smaller class count.
  std::optional<std::size_t> balance_n;
  gbdt::Config gbdt;
  transformer::TrainConfig transformer;
  dsp::MelConfig mel;
  dsp::FeatureConfig features;
  augment::CodecConfig codec;
  augment::RerecordConfig room;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

// Seeded uniform downsampling of the pool to n_per_class indices of each
// class, returned in ascending order. Throws BalanceError listing the
// available counts when a class is short, InputError when n_per_class is 0.
std::vector<std::size_t> balanced_indices(std::span<const int> labels, std::span<const std::size_t> pool,
                                          std::size_t n_per_class, std::uint64_t seed);

// A model fitted on one training set, able to score clips.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::string id() const = 0;
  virtual std::vector<double> predict_proba(std::span<const AudioBuffer> clips) const = 0;
};

std::unique_ptr<Detector> fit_detector(ModelKind kind, std::span<const AudioBuffer> clips,
                                       std::span<const int> labels, const BenchConfig& cfg);

// Clips fitted to cfg.duration_s.
std::vector<AudioBuffer> prepare(const Corpus& c, std::span<const std::size_t> idx, const BenchConfig& cfg);

// Trains each model on the class-balanced train split of a and evaluates it
// on the balanced eval split of b. With include_in_domain, every model is
// also evaluated on a's eval split (reported first).
std::vector<metrics::EvalReport> run_generalization(const Corpus& a, const Corpus& b,
                                                    std::span<const ModelKind> models, const BenchConfig& cfg,
                                                    bool include_in_domain = false);

// Applies each augmentation to every clip, then trains and evaluates per
// model within the augmented corpus.
std::vector<metrics::EvalReport> run_augmentation_study(const Corpus& c,
                                                        std::span<const augment::Augmentation> augmentations,
                                                        std::span<const ModelKind> models,
                                                        const BenchConfig& cfg);

// | Model | Precision | Recall | F1 | for spoof-class metrics.
std::string generalization_markdown(std::span<const metrics::EvalReport> reports);
// | Augmentation | Model | Precision | Accuracy | Recall | F1 |
std::string augmentation_markdown(std::span<const metrics::EvalReport> reports);

std::string reports_csv(std::span<const metrics::EvalReport> reports);
nlohmann::json reports_json(std::span<const metrics::EvalReport> reports);

}  // namespace spoofscope::bench
