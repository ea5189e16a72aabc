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
#include <span>
#include <string>
#include <vector>

#include "spoofscope/audio.hpp"

namespace spoofscope::augment {

// Lossy codec simulation: STFT with a sqrt-Hann window at 50% overlap,
// removal of every bin above cutoff_ratio * Nyquist, per-frame log-magnitude
// quantisation relative to the frame peak, overlap-add resynthesis.
struct CodecConfig {
  double cutoff_ratio = 16000.0 / 22050.0;
  std::size_t frame = 1024;
  double step_db = 1.5;     // quantiser resolution
  double floor_db = -90.0;  // bins this far below the frame peak are dropped
  // When non-empty, audio is round-tripped through this shell command
  // instead. "{in}" and "{out}" are replaced by WAV paths.
  std::string external_command;
};

// Default configuration with external_command taken from
// SPOOFSCOPE_CODEC_CMD when set.
CodecConfig codec_from_env();

// Throws CodecError when the external command fails.
AudioBuffer augment_codec(const AudioBuffer& audio, const CodecConfig& cfg = {});

// Room simulation: convolution with h[0] = 1 followed by a decaying noise
// tail reaching -60 dB at rt60_s, then additive white noise at snr_db
// (infinity disables it).
struct RerecordConfig {
  double rt60_s = 0.4;
  double tail_gain = 0.2;
  double snr_db = 30.0;
};

std::vector<double> room_impulse(int sample_rate, double rt60_s, double tail_gain, std::uint64_t seed);

// Linear convolution truncated to x.size() samples, computed with the FFT.
std::vector<double> convolve_same(std::span<const double> x, std::span<const double> h);

AudioBuffer augment_rerecord(const AudioBuffer& audio, std::uint64_t seed, const RerecordConfig& cfg = {});

enum class Augmentation { identity, codec, rerecord };

Augmentation parse_augmentation(const std::string& s);
std::string to_string(Augmentation a);

AudioBuffer apply(Augmentation a, const AudioBuffer& audio, std::uint64_t seed,
                  const CodecConfig& codec = {}, const RerecordConfig& room = {});

}  // namespace spoofscope::augment
