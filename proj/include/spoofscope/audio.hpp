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

#include <filesystem>
#include <vector>

namespace spoofscope {

// Mono audio with amplitudes nominally in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 16000;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

// Throws InputError unless the buffer is non-empty, finite and has a
// positive sample rate.
void validate(const AudioBuffer& audio);

// Reads a 16-bit PCM WAV file; stereo (or wider) input is downmixed by
// averaging the channels.
AudioBuffer read_wav(const std::filesystem::path& path);

// Writes mono 16-bit PCM, clipping to [-1, 1].
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio);

// Linear-interpolation resampler.
AudioBuffer resample_linear(const AudioBuffer& audio, int target_rate);

// Zero-pads or truncates to exactly round(seconds * sample_rate) samples.
AudioBuffer fit_duration(const AudioBuffer& audio, double seconds);

// Drops leading and trailing samples whose magnitude stays below
// threshold_db relative to the clip peak. A silent clip is returned as is.
AudioBuffer trim_silence(const AudioBuffer& audio, double threshold_db = -40.0);

}  // namespace spoofscope
