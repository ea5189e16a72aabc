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

#include "spoofscope/bench.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <sstream>

#include "spoofscope/errors.hpp"
#include "spoofscope/rng.hpp"

namespace spoofscope::bench {

namespace {

template <typename Fn>
void parallel_each(std::size_t n, Fn&& fn) {
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (long ii = 0; ii < static_cast<long>(n); ++ii) {
    try {
      fn(static_cast<std::size_t>(ii));
    } catch (...) {
#pragma omp critical(spoofscope_bench_each)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

void require_both_classes(std::span<const int> labels, const std::string& what) {
  const bool pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
  const bool neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
  if (!pos || !neg) throw DegenerateLabels(what + " must contain both bonafide and spoof clips");
}

std::vector<dsp::MelSpectrogram> mel_batch(std::span<const AudioBuffer> clips, const dsp::MelConfig& cfg) {
  std::vector<dsp::MelSpectrogram> out(clips.size());
  parallel_each(clips.size(), [&](std::size_t i) { out[i] = dsp::mel_spectrogram(clips[i], cfg); });
  return out;
}

class GbdtDetector final : public Detector {
 public:
  GbdtDetector(gbdt::Model model, dsp::FeatureConfig features)
      : model_(std::move(model)), features_(features) {}

  std::string id() const override { return "gbdt"; }

  std::vector<double> predict_proba(std::span<const AudioBuffer> clips) const override {
    return model_.predict_proba(dsp::batch_features(clips, features_));
  }

 private:
  gbdt::Model model_;
  dsp::FeatureConfig features_;
};

class TransformerDetector final : public Detector {
 public:
  TransformerDetector(transformer::EncoderParams params, dsp::MelConfig mel)
      : params_(std::move(params)), mel_(mel) {}

  std::string id() const override { return "transformer"; }

  std::vector<double> predict_proba(std::span<const AudioBuffer> clips) const override {
    const auto specs = mel_batch(clips, mel_);
    std::vector<double> probs(specs.size());
    parallel_each(specs.size(), [&](std::size_t i) { probs[i] = transformer::forward(specs[i], params_).prob_spoof; });
    return probs;
  }

 private:
  transformer::EncoderParams params_;
  dsp::MelConfig mel_;
};

std::vector<int> pick(std::span<const int> v, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

std::size_t smaller_class(std::span<const int> labels, std::span<const std::size_t> pool) {
  std::size_t pos = 0;
  for (auto i : pool) pos += labels[i] == 1 ? 1 : 0;
  return std::min(pos, pool.size() - pos);
}

std::vector<std::size_t> training_indices(const Corpus& c, std::uint64_t seed) {
  const auto pool = c.indices(Split::train);
  const std::size_t n = smaller_class(c.labels, pool);
  if (n == 0) throw DegenerateLabels(c.name + " train split must contain both classes");
  return balanced_indices(c.labels, pool, n, derive_seed(seed, 0x7261696e));
}

std::vector<std::size_t> evaluation_indices(const Corpus& c, const BenchConfig& cfg) {
  const auto pool = c.indices(Split::eval);
  const std::size_t n = cfg.balance_n ? *cfg.balance_n : smaller_class(c.labels, pool);
  if (!cfg.balance_n && n == 0) throw DegenerateLabels(c.name + " eval split must contain both classes");
  return balanced_indices(c.labels, pool, n, derive_seed(cfg.seed, 0x6576616c));
}

metrics::EvalReport score(const Detector& d, std::span<const AudioBuffer> clips, std::span<const int> labels,
                          const std::string& dataset, const std::string& augmentation) {
  const auto probs = d.predict_proba(clips);
  auto report = metrics::evaluate(probs, labels);
  report.model_id = d.id();
  report.dataset_id = dataset;
  report.augmentation_id = augmentation;
  return report;
}

std::string display_name(const std::string& model_id) {
  if (model_id == "gbdt") return "GBDT";
  if (model_id == "transformer") return "Transformer";
  return model_id;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::size_t> Corpus::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i)
    if (splits[i] == s) out.push_back(i);
  return out;
}

Corpus load_corpus(const DatasetManifest& m, int sample_rate) {
  Corpus c;
  c.name = m.dataset_name;
  c.audio.resize(m.entries.size());
  parallel_each(m.entries.size(), [&](std::size_t i) {
    AudioBuffer a = read_wav(m.entries[i].path);
    c.audio[i] = a.sample_rate == sample_rate ? std::move(a) : resample_linear(a, sample_rate);
  });
  for (const auto& e : m.entries) {
    c.labels.push_back(e.label);
    c.splits.push_back(e.split);
  }
  return c;
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "gbdt") return ModelKind::gbdt;
  if (s == "transformer") return ModelKind::transformer;
  throw UsageError("unknown model: " + s + " (expected gbdt or transformer)");
}

std::string to_string(ModelKind k) { return k == ModelKind::gbdt ? "gbdt" : "transformer"; }

nlohmann::json BenchConfig::to_json() const {
  const auto& t = transformer;
  return {{"duration_s", duration_s},
          {"balance_n", balance_n ? nlohmann::json(*balance_n) : nlohmann::json(nullptr)},
          {"gbdt",
           {{"n_estimators", gbdt.n_estimators},
            {"max_depth", gbdt.max_depth},
            {"learning_rate", gbdt.learning_rate},
            {"min_samples_leaf", gbdt.min_samples_leaf}}},
          {"transformer",
           {{"steps", t.steps},
            {"learning_rate", t.learning_rate},
            {"weight_decay", t.weight_decay},
            {"warmup_ratio", t.warmup_ratio},
            {"d_model", t.shape.d_model},
            {"n_heads", t.shape.n_heads},
            {"n_layers", t.shape.n_layers},
            {"d_ff", t.shape.d_ff},
            {"patch", {t.shape.geometry.patch_h, t.shape.geometry.patch_w}},
            {"stride", {t.shape.geometry.stride_h, t.shape.geometry.stride_w}},
            {"pos_mode", transformer::to_string(t.shape.pos_mode)}}},
          {"mel", {{"n_mels", mel.n_mels}, {"hop_ms", mel.hop_ms}, {"win_ms", mel.win_ms}, {"n_fft", mel.n_fft}}},
          {"codec", {{"cutoff_ratio", codec.cutoff_ratio}, {"frame", codec.frame}, {"step_db", codec.step_db},
                     {"external", codec.external_command}}},
          {"room", {{"rt60_s", room.rt60_s}, {"tail_gain", room.tail_gain}, {"snr_db", room.snr_db}}},
          {"seed", seed}};
}

std::vector<std::size_t> balanced_indices(std::span<const int> labels, std::span<const std::size_t> pool,
                                          std::size_t n_per_class, std::uint64_t seed) {
  if (n_per_class == 0) throw InputError("balance_n must be positive");
  std::vector<std::size_t> by_class[2];
  for (auto i : pool) {
    if (i >= labels.size() || (labels[i] != 0 && labels[i] != 1)) throw InputError("balanced_indices: bad index");
    by_class[labels[i]].push_back(i);
  }
  for (auto& v : by_class) std::sort(v.begin(), v.end());
  if (by_class[0].size() < n_per_class || by_class[1].size() < n_per_class) {
    throw BalanceError("cannot draw " + std::to_string(n_per_class) + " clips per class; available: bonafide " +
                       std::to_string(by_class[0].size()) + ", spoof " + std::to_string(by_class[1].size()));
  }
  std::vector<std::size_t> out;
  for (int c = 0; c < 2; ++c) {
    const auto perm = random_permutation(by_class[c].size(), derive_seed(seed, static_cast<std::uint64_t>(c)));
    for (std::size_t k = 0; k < n_per_class; ++k) out.push_back(by_class[c][perm[k]]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::unique_ptr<Detector> fit_detector(ModelKind kind, std::span<const AudioBuffer> clips,
                                       std::span<const int> labels, const BenchConfig& cfg) {
  require_both_classes(labels, "training data");
  if (kind == ModelKind::gbdt) {
    const Matrix x = dsp::batch_features(clips, cfg.features);
    gbdt::Config gc = cfg.gbdt;
    gc.seed = derive_seed(cfg.seed, 0x67626474);
    auto model = gbdt::train(x, labels, gc);
    const auto& names = dsp::feature_names();
    model.feature_names.assign(names.begin(), names.end());
    return std::make_unique<GbdtDetector>(std::move(model), cfg.features);
  }
  const auto specs = mel_batch(clips, cfg.mel);
  std::vector<transformer::Example> examples;
  examples.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) examples.push_back({specs[i].values, labels[i]});
  transformer::TrainConfig tc = cfg.transformer;
  tc.shape.bands = specs.front().bands();
  tc.shape.steps = specs.front().steps();
  tc.seed = derive_seed(cfg.seed, 0x74726166);
  auto result = transformer::train_toy(examples, tc);
  result.params.frontend = {{"n_mels", cfg.mel.n_mels}, {"hop_ms", cfg.mel.hop_ms}, {"win_ms", cfg.mel.win_ms},
                            {"n_fft", cfg.mel.n_fft}, {"duration_s", cfg.duration_s}};
  return std::make_unique<TransformerDetector>(std::move(result.params), cfg.mel);
}

std::vector<AudioBuffer> prepare(const Corpus& c, std::span<const std::size_t> idx, const BenchConfig& cfg) {
  std::vector<AudioBuffer> out(idx.size());
  parallel_each(idx.size(), [&](std::size_t k) { out[k] = fit_duration(c.audio[idx[k]], cfg.duration_s); });
  return out;
}

std::vector<metrics::EvalReport> run_generalization(const Corpus& a, const Corpus& b,
                                                    std::span<const ModelKind> models, const BenchConfig& cfg,
                                                    bool include_in_domain) {
  if (cfg.balance_n && *cfg.balance_n == 0) throw InputError("balance_n must be positive");
  const auto train_idx = training_indices(a, cfg.seed);
  const auto train_clips = prepare(a, train_idx, cfg);
  const auto train_labels = pick(a.labels, train_idx);

  const auto eval_idx = evaluation_indices(b, cfg);
  const auto eval_clips = prepare(b, eval_idx, cfg);
  const auto eval_labels = pick(b.labels, eval_idx);

  std::vector<AudioBuffer> home_clips;
  std::vector<int> home_labels;
  if (include_in_domain) {
    const auto home_idx = evaluation_indices(a, cfg);
    home_clips = prepare(a, home_idx, cfg);
    home_labels = pick(a.labels, home_idx);
  }

  std::vector<metrics::EvalReport> reports;
  for (const auto kind : models) {
    const auto detector = fit_detector(kind, train_clips, train_labels, cfg);
    if (include_in_domain) reports.push_back(score(*detector, home_clips, home_labels, a.name, "identity"));
    reports.push_back(score(*detector, eval_clips, eval_labels, b.name, "identity"));
  }
  return reports;
}

std::vector<metrics::EvalReport> run_augmentation_study(const Corpus& c,
                                                        std::span<const augment::Augmentation> augmentations,
                                                        std::span<const ModelKind> models,
                                                        const BenchConfig& cfg) {
  if (cfg.balance_n && *cfg.balance_n == 0) throw InputError("balance_n must be positive");
  const auto train_idx = training_indices(c, cfg.seed);
  const auto eval_idx = evaluation_indices(c, cfg);
  const auto train_base = prepare(c, train_idx, cfg);
  const auto eval_base = prepare(c, eval_idx, cfg);
  const auto train_labels = pick(c.labels, train_idx);
  const auto eval_labels = pick(c.labels, eval_idx);

  std::vector<metrics::EvalReport> reports;
  for (const auto aug : augmentations) {
    const auto code = static_cast<std::uint64_t>(aug) + 1;
    const auto augment_all = [&](const std::vector<AudioBuffer>& clips, std::span<const std::size_t> idx) {
      std::vector<AudioBuffer> out(clips.size());
      parallel_each(clips.size(), [&](std::size_t k) {
        out[k] = augment::apply(aug, clips[k], derive_seed(cfg.seed, idx[k], code), cfg.codec, cfg.room);
      });
      return out;
    };
    const auto train_clips = augment_all(train_base, train_idx);
    const auto eval_clips = augment_all(eval_base, eval_idx);
    for (const auto kind : models) {
      const auto detector = fit_detector(kind, train_clips, train_labels, cfg);
      reports.push_back(score(*detector, eval_clips, eval_labels, c.name, augment::to_string(aug)));
    }
  }
  return reports;
}

std::string generalization_markdown(std::span<const metrics::EvalReport> reports) {
  std::ostringstream out;
  std::string dataset;
  for (const auto& r : reports) {
    if (dataset != r.dataset_id || out.tellp() == 0) {
      if (out.tellp() != 0) out << '\n';
      dataset = r.dataset_id;
      out << "Evaluated on " << dataset << "\n\n| Model | Precision | Recall | F1 |\n|---|---|---|---|\n";
    }
    out << "| " << display_name(r.model_id) << " | " << fmt(r.spoof.precision) << " | " << fmt(r.spoof.recall)
        << " | " << fmt(r.spoof.f1) << " |\n";
  }
  return out.str();
}

std::string augmentation_markdown(std::span<const metrics::EvalReport> reports) {
  std::ostringstream out;
  out << "| Augmentation | Model | Precision | Accuracy | Recall | F1 |\n|---|---|---|---|---|---|\n";
  for (const auto& r : reports) {
    out << "| " << r.augmentation_id << " | " << display_name(r.model_id) << " | " << fmt(r.spoof.precision)
        << " | " << fmt(r.accuracy) << " | " << fmt(r.spoof.recall) << " | " << fmt(r.spoof.f1) << " |\n";
  }
  return out.str();
}

std::string reports_csv(std::span<const metrics::EvalReport> reports) {
  std::ostringstream out;
  out << "model,dataset,augmentation,tp,fp,fn,tn,precision,recall,f1,accuracy,roc_auc,eer\n";
  for (const auto& r : reports) {
    out << r.model_id << ',' << r.dataset_id << ',' << r.augmentation_id << ',' << r.counts.tp << ','
        << r.counts.fp << ',' << r.counts.fn << ',' << r.counts.tn << ',' << fmt17(r.spoof.precision) << ','
        << fmt17(r.spoof.recall) << ',' << fmt17(r.spoof.f1) << ',' << fmt17(r.accuracy) << ','
        << (r.roc_auc ? fmt17(*r.roc_auc) : "") << ',' << (r.eer ? fmt17(*r.eer) : "") << '\n';
  }
  return out.str();
}

nlohmann::json reports_json(std::span<const metrics::EvalReport> reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) arr.push_back(metrics::to_json(r));
  return {{"reports", arr}};
}

}  // namespace spoofscope::bench
