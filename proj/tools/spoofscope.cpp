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

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spoofscope/artifact.hpp"
#include "spoofscope/attn_explain.hpp"
#include "spoofscope/audio.hpp"
#include "spoofscope/bench.hpp"
#include "spoofscope/dsp.hpp"
#include "spoofscope/errors.hpp"
#include "spoofscope/gbdt.hpp"
#include "spoofscope/gbdt_explain.hpp"
#include "spoofscope/manifest.hpp"
#include "spoofscope/metrics.hpp"
#include "spoofscope/synth.hpp"
#include "spoofscope/transformer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spoofscope;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  int jobs = 0;
  std::string out = "out";
};

struct FrontEnd {
  double duration_s = 6.0;
  std::size_t n_mels = dsp::kMelBands;
  double hop_ms = 100.0;
  double win_ms = 100.0;
  std::size_t n_fft = 2048;

  dsp::MelConfig mel() const {
    dsp::MelConfig m;
    m.n_mels = n_mels;
    m.hop_ms = hop_ms;
    m.win_ms = win_ms;
    m.n_fft = n_fft;
    return m;
  }

  json to_json() const {
    return {{"duration_s", duration_s}, {"n_mels", n_mels}, {"hop_ms", hop_ms}, {"win_ms", win_ms}, {"n_fft", n_fft}};
  }

  static FrontEnd from_json(const json& j) {
    FrontEnd f;
    f.duration_s = j.value("duration_s", f.duration_s);
    f.n_mels = j.value("n_mels", f.n_mels);
    f.hop_ms = j.value("hop_ms", f.hop_ms);
    f.win_ms = j.value("win_ms", f.win_ms);
    f.n_fft = j.value("n_fft", f.n_fft);
    return f;
  }
};

void require_file(const std::string& p, const std::string& what) {
  if (p.empty()) throw UsageError(what + " is required");
  if (!fs::exists(p)) throw PathError(what + " not found: " + p);
}

std::string fmt(double v, const char* spec = "%.17g") {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

struct FeatureTable {
  Matrix x;
  std::vector<int> y;
};

std::string features_csv(const Matrix& x, std::span<const int> y, const artifact::Meta& meta) {
  std::string out = artifact::csv_comment(meta);
  for (const auto& n : dsp::feature_names()) out += n + ",";
  out += "label\n";
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (double v : x.row(i)) out += fmt(v) + ",";
    out += std::to_string(y[i]) + "\n";
  }
  return out;
}

FeatureTable read_features(const std::string& path) {
  require_file(path, "feature CSV");
  std::ifstream in(path);
  std::string line;
  FeatureTable t;
  std::vector<double> values;
  bool header = false;
  std::size_t line_no = 0, rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw ManifestError("non-numeric cell '" + cell + "' in " + path, line_no);
      }
    }
    if (row.size() != dsp::kNumFeatures + 1) {
      throw ManifestError("expected " + std::to_string(dsp::kNumFeatures + 1) + " columns in " + path, line_no);
    }
    t.y.push_back(static_cast<int>(row.back()));
    values.insert(values.end(), row.begin(), row.end() - 1);
    ++rows;
  }
  if (rows == 0) throw InputError("no data rows in " + path);
  t.x = Matrix(rows, dsp::kNumFeatures, std::move(values));
  return t;
}

FeatureTable features_from_manifest(const std::string& path, std::optional<bench::Split> split, double duration,
                                    std::optional<double> trim_db = std::nullopt) {
  require_file(path, "manifest");
  const auto m = bench::load_manifest(path);
  const auto corpus = bench::load_corpus(m);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (!split || corpus.splits[i] == *split) idx.push_back(i);
  std::vector<AudioBuffer> clips;
  FeatureTable t;
  for (auto i : idx) {
    AudioBuffer clip = trim_db ? trim_silence(corpus.audio[i], *trim_db) : corpus.audio[i];
    clips.push_back(duration > 0.0 ? fit_duration(clip, duration) : std::move(clip));
    t.y.push_back(corpus.labels[i]);
  }
  t.x = dsp::batch_features(clips);
  return t;
}

std::vector<std::string> names37() {
  const auto& n = dsp::feature_names();
  return {n.begin(), n.end()};
}

bool is_encoder_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::string first;
  std::getline(in, first);
  return first.rfind("SPOOFSCOPE-ENC", 0) == 0;
}

// ---------------------------------------------------------------- extract

struct ExtractArgs {
  std::string manifest;
  std::string csv = "features.csv";
  double duration = 0.0;
  std::optional<double> trim_db;
};

int cmd_extract(const Globals& g, const ExtractArgs& a) {
  const auto t = features_from_manifest(a.manifest, std::nullopt, a.duration, a.trim_db);
  json cfg = {{"command", "extract"}, {"manifest", fs::path(a.manifest).filename().string()},
              {"duration_s", a.duration}};
  if (a.trim_db) cfg["trim_db"] = *a.trim_db;
  const auto meta = artifact::make_meta(g.seed, cfg);
  const fs::path out = fs::path(g.out) / a.csv;
  artifact::write_text(out, features_csv(t.x, t.y, meta));
  std::cout << "wrote " << t.x.rows() << " rows to " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string kind;
  std::string data;
  std::string manifest;
  double duration = 6.0;
  gbdt::Config gbdt;
  transformer::TrainConfig tr;
  std::vector<std::size_t> patch{16, 16};
  std::vector<std::size_t> patch_stride{10, 10};
  std::string pos = "add";
  FrontEnd fe;
};

int train_gbdt(const Globals& g, const TrainArgs& a) {
  FeatureTable t;
  std::string source;
  if (!a.data.empty()) {
    t = read_features(a.data);
    source = fs::path(a.data).filename().string();
  } else if (!a.manifest.empty()) {
    t = features_from_manifest(a.manifest, bench::Split::train, a.duration);
    source = fs::path(a.manifest).filename().string();
  } else {
    throw UsageError("train gbdt needs --data or --manifest");
  }
  gbdt::Config cfg = a.gbdt;
  cfg.seed = g.seed;
  const json conf = {{"command", "train"}, {"kind", "gbdt"}, {"source", source},
                     {"n_estimators", cfg.n_estimators}, {"max_depth", cfg.max_depth},
                     {"learning_rate", cfg.learning_rate}, {"min_samples_leaf", cfg.min_samples_leaf}};
  std::cout << "gbdt: n_estimators=" << cfg.n_estimators << " max_depth=" << cfg.max_depth
            << " learning_rate=" << cfg.learning_rate << "\n";
  gbdt::TrainLog log;
  auto model = gbdt::train(t.x, t.y, cfg, &log);
  model.feature_names = names37();
  const auto meta = artifact::make_meta(g.seed, conf);
  const auto report = metrics::evaluate(model.predict_proba(t.x), t.y);
  const fs::path out(g.out);
  fs::create_directories(out);
  gbdt::save(model, out / "gbdt.json", meta.to_json());
  artifact::write_json(out / "gbdt_train_metrics.json", metrics::to_json(report), meta);
  std::cout << "train accuracy: " << fmt(report.accuracy, "%.4f") << "\n"
            << "final loss: " << fmt(log.loss.back(), "%.6f") << "\n"
            << "model: " << (out / "gbdt.json").string() << "\n";
  return 0;
}

int train_transformer(const Globals& g, const TrainArgs& a) {
  require_file(a.manifest, "manifest");
  const auto m = bench::load_manifest(a.manifest);
  const auto corpus = bench::load_corpus(m);
  const auto mel = a.fe.mel();
  std::vector<transformer::Example> examples;
  for (auto i : corpus.indices(bench::Split::train)) {
    const auto spec = dsp::mel_spectrogram(fit_duration(corpus.audio[i], a.fe.duration_s), mel);
    examples.push_back({spec.values, corpus.labels[i]});
  }
  if (examples.empty()) throw InputError("manifest has no train split");
  transformer::TrainConfig tc = a.tr;
  tc.seed = g.seed;
  tc.shape.bands = examples[0].spec.rows();
  tc.shape.steps = examples[0].spec.cols();
  tc.shape.geometry = {a.patch[0], a.patch[1], a.patch_stride[0], a.patch_stride[1]};
  tc.shape.pos_mode = transformer::parse_pos_mode(a.pos);
  transformer::validate(tc.shape);
  const json conf = {{"command", "train"}, {"kind", "transformer"},
                     {"manifest", fs::path(a.manifest).filename().string()}, {"frontend", a.fe.to_json()},
                     {"steps", tc.steps}, {"lr", tc.learning_rate}, {"d_model", tc.shape.d_model},
                     {"n_heads", tc.shape.n_heads}, {"n_layers", tc.shape.n_layers}, {"d_ff", tc.shape.d_ff},
                     {"patch", a.patch}, {"stride", a.patch_stride}, {"pos", a.pos},
                     {"weight_decay", tc.weight_decay}, {"warmup_ratio", tc.warmup_ratio}};
  auto result = transformer::train_toy(examples, tc);
  result.params.frontend = a.fe.to_json();
  const auto meta = artifact::make_meta(g.seed, conf);
  const fs::path out(g.out);
  fs::create_directories(out);
  transformer::save(result.params, out / "encoder.bin", meta.to_json());
  artifact::write_text(out / "curve.csv", artifact::csv_comment(meta) + transformer::curve_csv(result.curve));
  const auto& last = result.curve.back();
  artifact::write_json(out / "transformer_train_metrics.json",
                       {{"loss", last.loss}, {"accuracy", last.accuracy}, {"steps", tc.steps}}, meta);
  std::cout << "train accuracy: " << fmt(last.accuracy, "%.4f") << "\nfinal loss: " << fmt(last.loss, "%.6f")
            << "\nmodel: " << (out / "encoder.bin").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- explain

struct ExplainArgs {
  std::string kind;
  std::string model;
  std::string data;
  std::string input;
  std::string metric = "accuracy";
  int repeats = 10;
  double cut = gbdt_explain::kDefaultCut;
  std::size_t top_k = 10;
  std::vector<std::size_t> box;
  std::vector<std::size_t> stride;
  std::string fill = "zero";
  std::string mean_manifest;
  std::string rollout = "plain";
  std::string fusion = "mean";
  bool last_layer = false;
};

int explain_importance(const Globals& g, const ExplainArgs& a) {
  require_file(a.model, "model");
  if (is_encoder_file(a.model)) throw UsageError("importance needs a gbdt model, got a transformer encoder");
  const auto model = gbdt::load(a.model);
  const auto t = read_features(a.data);
  const auto metric = gbdt_explain::parse_metric(a.metric);
  const auto names = names37();
  const auto report = gbdt_explain::permutation_importance(model, t.x, t.y, metric, a.repeats, g.seed, names);
  const auto sp = gbdt_explain::spearman_matrix(t.x);
  auto clustering = gbdt_explain::ward_cluster(sp.rho, a.cut);
  clustering.representatives = gbdt_explain::select_representatives(clustering, report);

  const json conf = {{"command", "explain"}, {"kind", "importance"}, {"model", fs::path(a.model).filename().string()},
                     {"data", fs::path(a.data).filename().string()}, {"metric", a.metric},
                     {"repeats", a.repeats}, {"cut", a.cut}};
  const auto meta = artifact::make_meta(g.seed, conf);
  const fs::path out(g.out);
  artifact::write_json(out / "importance.json", gbdt_explain::to_json(report), meta);
  artifact::write_text(out / "importance.csv", artifact::csv_comment(meta) + gbdt_explain::importance_csv(report));
  auto cj = gbdt_explain::to_json(clustering, names);
  json constant = json::array();
  for (std::size_t j = 0; j < sp.constant.size(); ++j)
    if (sp.constant[j]) constant.push_back(names[j]);
  cj["constant_features"] = constant;
  artifact::write_json(out / "clusters.json", cj, meta);
  artifact::write_text(out / "dendrogram.txt", gbdt_explain::dendrogram_text(clustering, names));
  std::cout << gbdt_explain::importance_text(report, a.top_k);
  std::cout << clustering.clusters.size() << " clusters, representatives:";
  for (auto r : clustering.representatives) std::cout << " " << names[r];
  std::cout << "\n";
  return 0;
}

struct LoadedEncoder {
  transformer::EncoderParams params;
  FrontEnd fe;
};

LoadedEncoder load_encoder(const std::string& path, const std::string& kind) {
  require_file(path, "model");
  if (!is_encoder_file(path)) throw UsageError(kind + " needs a transformer encoder, got a different model file");
  LoadedEncoder e{transformer::load(path), {}};
  e.fe = FrontEnd::from_json(e.params.frontend);
  return e;
}

dsp::MelSpectrogram input_spectrogram(const std::string& path, const FrontEnd& fe) {
  require_file(path, "input audio");
  auto audio = read_wav(path);
  if (audio.sample_rate != 16000) audio = resample_linear(audio, 16000);
  return dsp::mel_spectrogram(fit_duration(audio, fe.duration_s), fe.mel());
}

int explain_occlusion(const Globals& g, const ExplainArgs& a) {
  const auto enc = load_encoder(a.model, "occlusion");
  const auto spec = input_spectrogram(a.input, enc.fe);
  auto cfg = attn_explain::default_occlusion(spec.bands(), spec.steps());
  if (!a.box.empty()) {
    cfg.box_h = a.box[0];
    cfg.box_w = a.box[1];
    if (a.stride.empty()) {
      cfg.stride_h = std::max<std::size_t>(1, cfg.box_h / 2);
      cfg.stride_w = std::max<std::size_t>(1, cfg.box_w / 2);
    }
  }
  if (!a.stride.empty()) {
    cfg.stride_h = a.stride[0];
    cfg.stride_w = a.stride[1];
  }
  cfg.fill = attn_explain::parse_fill(a.fill);
  if (cfg.fill == attn_explain::Fill::dataset_mean) {
    require_file(a.mean_manifest, "--mean-manifest");
    const auto corpus = bench::load_corpus(bench::load_manifest(a.mean_manifest));
    std::vector<Matrix> specs;
    for (const auto& clip : corpus.audio)
      specs.push_back(dsp::mel_spectrogram(fit_duration(clip, enc.fe.duration_s), enc.fe.mel()).values);
    cfg.mean_values = attn_explain::dataset_mean(specs);
  }
  attn_explain::validate(cfg, spec.bands(), spec.steps());
  const auto& params = enc.params;
  const double hop = spec.hop_ms;
  const auto heat = attn_explain::occlusion_scan(
      [&](const Matrix& m) { return transformer::forward(m, hop, params).prob_spoof; }, spec.values, cfg);

  const json conf = {{"command", "explain"}, {"kind", "occlusion"}, {"model", fs::path(a.model).filename().string()},
                     {"input", fs::path(a.input).filename().string()},
                     {"box", {cfg.box_h, cfg.box_w}}, {"stride", {cfg.stride_h, cfg.stride_w}}, {"fill", a.fill}};
  const auto meta = artifact::make_meta(g.seed, conf);
  const fs::path out(g.out);
  fs::create_directories(out);
  attn_explain::render_heatmap(heat.importance, out / "occlusion.pgm", out / "occlusion.csv", {meta.line()});
  artifact::write_json(out / "occlusion.json", attn_explain::to_json(heat), meta);
  auto top = std::max_element(heat.boxes.begin(), heat.boxes.end(),
                              [](const auto& x, const auto& y) { return x.delta < y.delta; });
  std::cout << "base probability: " << fmt(heat.base_prob, "%.4f") << "\n"
            << heat.boxes.size() << " boxes; largest change " << fmt(top->delta, "%.4f") << " at bands "
            << top->row << "-" << top->row + top->height << ", steps " << top->col << "-" << top->col + top->width
            << "\n";
  return 0;
}

int explain_rollout(const Globals& g, const ExplainArgs& a) {
  const auto enc = load_encoder(a.model, "rollout");
  const auto spec = input_spectrogram(a.input, enc.fe);
  const auto seq = transformer::patchify(spec, enc.params);
  const auto fwd = transformer::forward_tokens(seq.tokens, enc.params);
  const auto fusion = attn_explain::parse_head_fusion(a.fusion);
  auto map = a.last_layer ? attn_explain::last_layer(fwd.attention, fusion)
                          : attn_explain::rollout(fwd.attention, attn_explain::parse_rollout_mode(a.rollout), fusion);
  map.token_time_spans = seq.token_time_spans;
  const auto timeline = attn_explain::cls_timeline(map);

  const json conf = {{"command", "explain"}, {"kind", "rollout"}, {"model", fs::path(a.model).filename().string()},
                     {"input", fs::path(a.input).filename().string()}, {"rollout", a.rollout},
                     {"fusion", a.fusion}, {"last_layer", a.last_layer}};
  const auto meta = artifact::make_meta(g.seed, conf);
  const fs::path out(g.out);
  fs::create_directories(out);
  attn_explain::render_heatmap(map.weights, out / "rollout.pgm", out / "rollout.csv", {meta.line()});
  json doc = attn_explain::to_json(timeline);
  doc["prob_spoof"] = fwd.prob_spoof;
  doc["cls_importance"] = map.cls_importance;
  doc["uniform_fallback"] = map.uniform_fallback;
  artifact::write_json(out / "timeline.json", doc, meta);
  std::cout << "prob_spoof: " << fmt(fwd.prob_spoof, "%.4f") << "\n";
  if (timeline.no_salient_region) std::cout << "no salient region\n";
  for (const auto& s : timeline.segments) {
    std::cout << fmt(s.start_ms, "%.0f") << "-" << fmt(s.end_ms, "%.0f") << " ms  importance "
              << fmt(s.importance, "%.4f") << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string mode;
  std::string train_manifest;
  std::string eval_manifest;
  std::string manifest;
  std::vector<std::string> models{"gbdt", "transformer"};
  std::vector<std::string> augmentations{"identity", "codec", "rerecord"};
  long balance_n = -1;
  bool in_domain = false;
  FrontEnd fe;
  gbdt::Config gbdt;
  transformer::TrainConfig tr;
  std::vector<std::size_t> patch{16, 16};
  std::vector<std::size_t> patch_stride{10, 10};
};

bench::BenchConfig bench_config(const Globals& g, const BenchArgs& a) {
  bench::BenchConfig c;
  c.seed = g.seed;
  c.duration_s = a.fe.duration_s;
  if (a.balance_n >= 0) c.balance_n = static_cast<std::size_t>(a.balance_n);
  c.gbdt = a.gbdt;
  c.transformer = a.tr;
  c.transformer.shape.geometry = {a.patch[0], a.patch[1], a.patch_stride[0], a.patch_stride[1]};
  c.mel = a.fe.mel();
  c.codec = augment::codec_from_env();
  return c;
}

void write_reports(const Globals& g, const std::string& stem, const std::string& markdown,
                   std::span<const metrics::EvalReport> reports, const json& conf) {
  const auto meta = artifact::make_meta(g.seed, conf);
  const fs::path out(g.out);
  artifact::write_text(out / (stem + ".md"), artifact::markdown_comment(meta) + markdown);
  artifact::write_text(out / (stem + ".csv"), artifact::csv_comment(meta) + bench::reports_csv(reports));
  artifact::write_json(out / (stem + ".json"), bench::reports_json(reports), meta);
  std::cout << markdown;
}

int cmd_bench(const Globals& g, const BenchArgs& a) {
  if (a.balance_n == 0) throw UsageError("--balance-n must be positive");
  std::vector<bench::ModelKind> models;
  for (const auto& m : a.models) models.push_back(bench::parse_model_kind(m));
  const auto cfg = bench_config(g, a);
  json conf = cfg.to_json();
  conf["command"] = "bench";
  conf["mode"] = a.mode;
  conf["models"] = a.models;
  if (a.mode == "generalize") {
    require_file(a.train_manifest, "train manifest");
    require_file(a.eval_manifest, "eval manifest");
    const auto ma = bench::load_manifest(a.train_manifest);
    const auto mb = bench::load_manifest(a.eval_manifest);
    std::cout << ma.summary() << "\n" << mb.summary() << "\n";
    conf["train"] = ma.dataset_name;
    conf["eval"] = mb.dataset_name;
    conf["in_domain"] = a.in_domain;
    const auto ca = bench::load_corpus(ma);
    const auto cb = ma.dataset_name == mb.dataset_name ? ca : bench::load_corpus(mb);
    const auto reports = bench::run_generalization(ca, cb, models, cfg, a.in_domain);
    write_reports(g, "generalization", bench::generalization_markdown(reports), reports, conf);
    return 0;
  }
  require_file(a.manifest, "manifest");
  const auto m = bench::load_manifest(a.manifest);
  std::cout << m.summary() << "\n";
  std::vector<augment::Augmentation> augs;
  for (const auto& s : a.augmentations) augs.push_back(augment::parse_augmentation(s));
  conf["dataset"] = m.dataset_name;
  conf["augmentations"] = a.augmentations;
  const auto reports = bench::run_augmentation_study(bench::load_corpus(m), augs, models, cfg);
  write_reports(g, "augmentation", bench::augmentation_markdown(reports), reports, conf);
  return 0;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string kind = "shifted";
  std::size_t per_class = 40;
  double duration = 6.0;
};

int cmd_synth(const Globals& g, const SynthArgs& a) {
  std::vector<synth::CorpusSpec> specs;
  if (a.kind == "shifted") {
    specs = {synth::shifted_source(g.seed), synth::shifted_target(g.seed)};
  } else if (a.kind == "high-band") {
    specs = {synth::high_band_cue(g.seed)};
  } else {
    throw UsageError("unknown corpus kind: " + a.kind + " (expected shifted or high-band)");
  }
  for (auto& s : specs) {
    s.train_per_class = a.per_class;
    s.eval_per_class = a.per_class;
    s.duration_s = a.duration;
    std::cout << "wrote " << synth::write_corpus(s, g.out).string() << "\n";
  }
  return 0;
}

void add_frontend(CLI::App* app, FrontEnd& fe) {
  app->add_option("--duration", fe.duration_s, "clip length in seconds (pad or truncate)")->capture_default_str();
  app->add_option("--n-mels", fe.n_mels, "Mel bands")->capture_default_str();
  app->add_option("--mel-hop", fe.hop_ms, "spectrogram hop in ms")->capture_default_str();
  app->add_option("--mel-win", fe.win_ms, "spectrogram window in ms")->capture_default_str();
}

void add_gbdt(CLI::App* app, gbdt::Config& c) {
  app->add_option("--n-estimators", c.n_estimators, "boosting rounds")->capture_default_str();
  app->add_option("--max-depth", c.max_depth, "maximum tree depth")->capture_default_str();
  app->add_option("--learning-rate", c.learning_rate, "shrinkage")->capture_default_str();
  app->add_option("--min-samples-leaf", c.min_samples_leaf)->capture_default_str();
}

void add_transformer(CLI::App* app, transformer::TrainConfig& t, std::vector<std::size_t>& patch,
                     std::vector<std::size_t>& stride) {
  app->add_option("--steps", t.steps, "optimiser steps")->capture_default_str();
  app->add_option("--lr", t.learning_rate, "Adam step size")->capture_default_str();
  app->add_option("--weight-decay", t.weight_decay)->capture_default_str();
  app->add_option("--warmup", t.warmup_ratio, "warmup fraction of steps")->capture_default_str();
  app->add_option("--d-model", t.shape.d_model)->capture_default_str();
  app->add_option("--heads", t.shape.n_heads)->capture_default_str();
  app->add_option("--layers", t.shape.n_layers)->capture_default_str();
  app->add_option("--d-ff", t.shape.d_ff)->capture_default_str();
  app->add_option("--patch", patch, "patch height and width")->expected(2)->capture_default_str();
  app->add_option("--patch-stride", stride, "patch stride (height, width)")->expected(2)->capture_default_str();
}

int run(int argc, char** argv) {
  CLI::App app{"Audio deepfake detection with explainable classifiers"};
  app.set_version_flag("--version", artifact::tool_version());
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "random seed recorded in every artifact")->capture_default_str();
  app.add_option("--jobs", g.jobs, "worker threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
  app.add_option("--out", g.out, "output directory")->capture_default_str();

  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract", "37-feature table from a manifest");
  extract->add_option("--manifest", ex.manifest, "manifest CSV")->required();
  extract->add_option("--csv", ex.csv, "output file name inside --out")->capture_default_str();
  extract->add_option("--duration", ex.duration, "fit clips to this length first (0 = keep)")->capture_default_str();
  extract->add_option("--trim-db", ex.trim_db, "trim leading/trailing audio quieter than this (dB below peak)");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "fit a detector");
  train->add_option("kind", tr.kind, "gbdt or transformer")->required()->check(CLI::IsMember({"gbdt", "transformer"}));
  train->add_option("--data", tr.data, "feature CSV (gbdt)");
  train->add_option("--manifest", tr.manifest, "manifest CSV (train split is used)");
  add_gbdt(train, tr.gbdt);
  add_transformer(train, tr.tr, tr.patch, tr.patch_stride);
  train->add_option("--pos", tr.pos, "positional mode: add or append")->capture_default_str();
  add_frontend(train, tr.fe);

  ExplainArgs xa;
  auto* explain = app.add_subcommand("explain", "importance, occlusion or rollout");
  explain->add_option("kind", xa.kind, "importance, occlusion or rollout")
      ->required()
      ->check(CLI::IsMember({"importance", "occlusion", "rollout"}));
  explain->add_option("--model", xa.model, "model file")->required();
  explain->add_option("--data", xa.data, "feature CSV (importance)");
  explain->add_option("--input", xa.input, "WAV file (occlusion, rollout)");
  explain->add_option("--metric", xa.metric, "accuracy or roc_auc")->capture_default_str();
  explain->add_option("--repeats", xa.repeats, "shuffles per feature")->capture_default_str();
  explain->add_option("--cut", xa.cut, "Ward merge height cut")->capture_default_str();
  explain->add_option("--top", xa.top_k, "features to print")->capture_default_str();
  explain->add_option("--box", xa.box, "occlusion box (bands, steps)")->expected(2);
  explain->add_option("--stride", xa.stride, "occlusion stride (bands, steps)")->expected(2);
  explain->add_option("--fill", xa.fill, "zero, one or mean")->capture_default_str();
  explain->add_option("--mean-manifest", xa.mean_manifest, "clips averaged for --fill mean");
  explain->add_option("--rollout", xa.rollout, "plain or residual")->capture_default_str();
  explain->add_option("--fusion", xa.fusion, "head fusion: mean or max")->capture_default_str();
  explain->add_flag("--last-layer", xa.last_layer, "use final-layer CLS attention instead of rollout");

  BenchArgs ba;
  auto* benchc = app.add_subcommand("bench", "cross-corpus or augmentation benchmark");
  benchc->add_option("mode", ba.mode, "generalize or augment")->required()->check(CLI::IsMember({"generalize", "augment"}));
  benchc->add_option("--train-manifest", ba.train_manifest);
  benchc->add_option("--eval-manifest", ba.eval_manifest);
  benchc->add_option("--manifest", ba.manifest, "corpus for augment mode");
  benchc->add_option("--models", ba.models, "gbdt, transformer")->delimiter(',')->capture_default_str();
  benchc->add_option("--augmentations", ba.augmentations, "identity, codec, rerecord")->delimiter(',')->capture_default_str();
  benchc->add_option("--balance-n", ba.balance_n, "evaluation clips per class (default: smaller class)");
  benchc->add_flag("--in-domain", ba.in_domain, "also evaluate on the training corpus's eval split");
  add_frontend(benchc, ba.fe);
  add_gbdt(benchc, ba.gbdt);
  add_transformer(benchc, ba.tr, ba.patch, ba.patch_stride);

  SynthArgs sa;
  auto* synthc = app.add_subcommand("synth", "write synthetic corpora and manifests");
  synthc->add_option("kind", sa.kind, "shifted or high-band")->capture_default_str();
  synthc->add_option("--per-class", sa.per_class, "clips per class and split")->capture_default_str();
  synthc->add_option("--duration", sa.duration, "clip length in seconds")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (g.jobs > 0) omp_set_num_threads(g.jobs);

  if (extract->parsed()) return cmd_extract(g, ex);
  if (train->parsed()) return tr.kind == "gbdt" ? train_gbdt(g, tr) : train_transformer(g, tr);
  if (explain->parsed()) {
    if (xa.kind == "importance") return explain_importance(g, xa);
    if (xa.kind == "occlusion") return explain_occlusion(g, xa);
    return explain_rollout(g, xa);
  }
  if (benchc->parsed()) return cmd_bench(g, ba);
  return cmd_synth(g, sa);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const PathError& e) {
    std::cerr << "path error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
