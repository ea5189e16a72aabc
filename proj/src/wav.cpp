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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "spoofscope/audio.hpp"
#include "spoofscope/errors.hpp"

namespace spoofscope {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u16(std::ofstream& out, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

}  // namespace

void validate(const AudioBuffer& audio) {
  if (audio.samples.empty()) throw InputError("audio buffer is empty");
  if (audio.sample_rate <= 0) throw InputError("sample rate must be positive");
  for (double s : audio.samples) {
    if (!std::isfinite(s)) throw InputError("audio contains non-finite samples");
  }
}

AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PathError("cannot open WAV file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const auto fail = [&](const std::string& why) -> IoError {
    return IoError(path.string() + ": " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(len, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0 && avail >= 16) {
      format = read_u16(chunk + 8);
      channels = read_u16(chunk + 10);
      rate = read_u32(chunk + 12);
      bits = read_u16(chunk + 22);
      if (format == 0xFFFE && avail >= 26) format = read_u16(chunk + 8 + 24);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_len = avail;
    }
    pos = body + len + (len & 1u);
  }
  if (format != 1 || bits != 16) throw fail("only 16-bit PCM is supported");
  if (channels == 0 || rate == 0) throw fail("invalid fmt chunk");
  if (data == nullptr) throw fail("missing data chunk");

  const std::size_t frames = data_len / (2u * channels);
  AudioBuffer audio;
  audio.sample_rate = static_cast<int>(rate);
  audio.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const auto v = static_cast<std::int16_t>(read_u16(data + 2 * (i * channels + c)));
      acc += static_cast<double>(v) / 32768.0;
    }
    audio.samples[i] = acc / channels;
  }
  return audio;
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write WAV file: " + path.string());
  const auto n = static_cast<std::uint32_t>(audio.samples.size());
  out.write("RIFF", 4);
  put_u32(out, 36 + 2 * n);
  out.write("WAVEfmt ", 8);
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.write("data", 4);
  put_u32(out, 2 * n);
  for (double s : audio.samples) {
    const double c = std::clamp(s, -1.0, 1.0);
    const auto q = static_cast<std::int16_t>(std::lround(std::clamp(c * 32768.0, -32768.0, 32767.0)));
    put_u16(out, static_cast<std::uint16_t>(q));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

AudioBuffer resample_linear(const AudioBuffer& audio, int target_rate) {
  validate(audio);
  if (target_rate <= 0) throw InputError("target sample rate must be positive");
  if (audio.sample_rate == target_rate) return audio;
  const double ratio = static_cast<double>(audio.sample_rate) / target_rate;
  const auto n_out = static_cast<std::size_t>(
      std::max<double>(1.0, std::floor(static_cast<double>(audio.samples.size()) / ratio)));
  AudioBuffer out;
  out.sample_rate = target_rate;
  out.samples.resize(n_out);
  const std::size_t last = audio.samples.size() - 1;
  for (std::size_t i = 0; i < n_out; ++i) {
    const double t = static_cast<double>(i) * ratio;
    const auto i0 = std::min<std::size_t>(static_cast<std::size_t>(t), last);
    const std::size_t i1 = std::min(i0 + 1, last);
    const double frac = t - static_cast<double>(i0);
    out.samples[i] = audio.samples[i0] + frac * (audio.samples[i1] - audio.samples[i0]);
  }
  return out;
}

AudioBuffer fit_duration(const AudioBuffer& audio, double seconds) {
  if (!(seconds > 0.0)) throw InputError("duration must be positive");
  AudioBuffer out = audio;
  out.samples.resize(static_cast<std::size_t>(std::lround(seconds * audio.sample_rate)), 0.0);
  return out;
}

AudioBuffer trim_silence(const AudioBuffer& audio, double threshold_db) {
  validate(audio);
  double peak = 0.0;
  for (double x : audio.samples) peak = std::max(peak, std::abs(x));
  if (peak == 0.0) return audio;
  const double floor = peak * std::pow(10.0, threshold_db / 20.0);
  std::size_t begin = 0, end = audio.samples.size();
  while (begin < end && std::abs(audio.samples[begin]) < floor) ++begin;
  while (end > begin && std::abs(audio.samples[end - 1]) < floor) --end;
  AudioBuffer out{{audio.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                   audio.samples.begin() + static_cast<std::ptrdiff_t>(end)},
                  audio.sample_rate};
  return out;
}

}  // namespace spoofscope
