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

#include "spoofscope/synth.hpp"

#include <cmath>
#include <numbers>

#include "spoofscope/errors.hpp"
#include "spoofscope/rng.hpp"

namespace spoofscope::synth {

namespace {

double db_to_amp(double db) { return std::pow(10.0, db / 20.0); }

std::vector<double> voice(std::size_t n, int sr, SplitMix64& rng) {
  const double f0 = rng.uniform(110.0, 220.0);
  const double vib_rate = rng.uniform(4.0, 6.0);
  const double syl_rate = rng.uniform(3.0, 5.0);
  const double syl_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::vector<double> x(n, 0.0);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    const double f = f0 * (1.0 + 0.02 * std::sin(2.0 * std::numbers::pi * vib_rate * t));
    phase += 2.0 * std::numbers::pi * f / sr;
    // sin(k*phase) by the Chebyshev recurrence
    const double c2 = 2.0 * std::cos(phase);
    double prev = 0.0, cur = std::sin(phase), s = cur;
    for (int k = 2; k * f0 < 4000.0; ++k) {
      const double next = c2 * cur - prev;
      prev = cur;
      cur = next;
      s += cur / k;
    }
    const double env = 0.2 + 0.4 * (1.0 - std::cos(2.0 * std::numbers::pi * syl_rate * t + syl_phase));
    x[i] = s * env;
  }
  return x;
}

void scale_to_rms(std::vector<double>& x, double target) {
  double p = 0.0;
  for (double v : x) p += v * v;
  const double rms = std::sqrt(p / static_cast<double>(x.size()));
  if (rms > 0.0)
    for (double& v : x) v *= target / rms;
}

}  // namespace

CorpusSpec shifted_source(std::uint64_t seed) {
  CorpusSpec s;
  s.name = "synth-a";
  s.noise_floor_db = -60.0;
  s.artifact_gain_db = 6.0;
  s.seed = derive_seed(seed, 0xA);
  return s;
}

CorpusSpec shifted_target(std::uint64_t seed) {
  CorpusSpec s;
  s.name = "synth-b";
  s.noise_floor_db = -45.0;
  s.artifact_gain_db = -6.0;
  s.seed = derive_seed(seed, 0xB);
  return s;
}

CorpusSpec high_band_cue(std::uint64_t seed) {
  CorpusSpec s;
  s.name = "synth-hf";
  s.cue_hz = 7000.0;
  s.seed = derive_seed(seed, 0xC);
  return s;
}

AudioBuffer make_clip(const CorpusSpec& spec, int label, std::size_t index) {
  if (spec.sample_rate <= 0 || !(spec.duration_s > 0.0)) throw InputError("corpus needs a positive duration and rate");
  if (spec.cue_hz >= spec.sample_rate / 2.0) throw InputError("cue frequency must lie below Nyquist");
  const int sr = spec.sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * sr));
  const auto active = static_cast<std::size_t>(std::llround(static_cast<double>(n) * (1.0 - spec.trailing_silence)));
  SplitMix64 rng(derive_seed(spec.seed, static_cast<std::uint64_t>(label), index));

  auto x = voice(n, sr, rng);
  const double level = spec.voice_db + rng.uniform(-spec.voice_jitter_db, spec.voice_jitter_db);
  scale_to_rms(x, db_to_amp(level));

  const double noise = db_to_amp(spec.noise_floor_db);
  for (double& v : x) v += noise * rng.normal();

  if (label == 1 && spec.cue_count > 0) {
    const auto len = static_cast<std::size_t>(spec.cue_ms * sr / 1000.0);
    const auto ramp = std::max<std::size_t>(1, static_cast<std::size_t>(0.01 * sr));
    const double amp = std::sqrt(2.0) * db_to_amp(spec.cue_db);
    for (std::size_t b = 0; b < spec.cue_count; ++b) {
      const std::size_t room = active > len ? active - len : 0;
      const auto start = static_cast<std::size_t>(rng.uniform() * static_cast<double>(room));
      const double phase0 = rng.uniform(0.0, 2.0 * std::numbers::pi);
      for (std::size_t i = 0; i < len && start + i < n; ++i) {
        double g = 1.0;
        if (i < ramp) g = 0.5 * (1.0 - std::cos(std::numbers::pi * i / ramp));
        if (len - i <= ramp) g = std::min(g, 0.5 * (1.0 - std::cos(std::numbers::pi * (len - i) / ramp)));
        x[start + i] += amp * g * std::sin(2.0 * std::numbers::pi * spec.cue_hz * i / sr + phase0);
      }
    }
  }
  if (label == 1 && spec.artifact_gain_db != 0.0) {
    const double g = db_to_amp(spec.artifact_gain_db);
    for (double& v : x) v *= g;
  }
  for (std::size_t i = active; i < n; ++i) x[i] = 0.0;
  return {std::move(x), sr};
}

bench::Corpus generate(const CorpusSpec& spec) {
  bench::Corpus c;
  c.name = spec.name;
  const auto add = [&](bench::Split split, std::size_t count, std::size_t offset) {
    for (std::size_t i = 0; i < count; ++i) {
      for (int label = 0; label < 2; ++label) {
        c.audio.push_back(make_clip(spec, label, offset + i));
        c.labels.push_back(label);
        c.splits.push_back(split);
      }
    }
  };
  add(bench::Split::train, spec.train_per_class, 0);
  add(bench::Split::eval, spec.eval_per_class, spec.train_per_class);
  return c;
}

std::filesystem::path write_corpus(const CorpusSpec& spec, const std::filesystem::path& dir) {
  const auto corpus = generate(spec);
  const auto clip_dir = dir / spec.name;
  std::filesystem::create_directories(clip_dir);
  bench::DatasetManifest m;
  m.dataset_name = spec.name;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto file = clip_dir / (bench::to_string(corpus.splits[i]) + "_" + bench::label_name(corpus.labels[i]) +
                                  "_" + std::to_string(i) + ".wav");
    write_wav(file, corpus.audio[i]);
    m.entries.push_back({file, corpus.labels[i], corpus.labels[i] == 1 ? "tone-burst" : "", corpus.splits[i], 0});
  }
  const auto manifest = dir / (spec.name + ".csv");
  bench::write_manifest(m, manifest);
  return manifest;
}

}  // namespace spoofscope::synth
