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
#include <string>

#include "spoofscope/bench.hpp"
#include "spoofscope/manifest.hpp"

namespace spoofscope::synth {

// Voiced harmonic tones with a syllable-rate envelope over a white noise
// floor. Spoofed clips additionally carry the shared cue (short tone
// bursts) and a corpus-specific level artifact.
struct CorpusSpec {
  std::string name = "synthetic";
  std::size_t train_per_class = 40;
  std::size_t eval_per_class = 40;
  double duration_s = 6.0;
  int sample_rate = 16000;
  double voice_db = -26.0;        // rms of the voiced part
  double voice_jitter_db = 2.0;   // uniform level spread per clip
  double noise_floor_db = -60.0;
  // Shared spoof cue.
  double cue_hz = 3000.0;
  double cue_ms = 500.0;
  std::size_t cue_count = 3;
  double cue_db = -24.0;
  // Corpus-specific spoof artifact: overall gain of spoofed clips.
  double artifact_gain_db = 0.0;
  // Fraction of each clip (at the end) left silent; zero disables.
  double trailing_silence = 0.0;
  std::uint64_t seed = 0;
};

// Source and target corpora of the cross-corpus benchmark: different noise
// floors and different level artifacts, same tone-burst cue.
CorpusSpec shifted_source(std::uint64_t seed);
CorpusSpec shifted_target(std::uint64_t seed);

// Spoof cue placed above the codec cutoff.
CorpusSpec high_band_cue(std::uint64_t seed);

AudioBuffer make_clip(const CorpusSpec& spec, int label, std::size_t index);

bench::Corpus generate(const CorpusSpec& spec);

// Writes one WAV per clip under dir and dir/<name>.csv; returns the manifest path.
std::filesystem::path write_corpus(const CorpusSpec& spec, const std::filesystem::path& dir);

}  // namespace spoofscope::synth
