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

#include "spoofscope/augment.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

#include <unistd.h>

#include "spoofscope/dsp.hpp"
#include "spoofscope/errors.hpp"
#include "spoofscope/rng.hpp"

namespace spoofscope::augment {

namespace {

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void inverse_fft(std::vector<double>& re, std::vector<double>& im) {
  for (double& v : im) v = -v;
  dsp::fft(re, im);
  const double inv = 1.0 / static_cast<double>(re.size());
  for (std::size_t k = 0; k < re.size(); ++k) {
    re[k] *= inv;
    im[k] = -im[k] * inv;
  }
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

AudioBuffer external_codec(const AudioBuffer& audio, const std::string& command) {
  static std::atomic<unsigned> counter{0};
  const auto dir = std::filesystem::temp_directory_path();
  const std::string stem = "spoofscope-codec-" + std::to_string(::getpid()) + "-" + std::to_string(counter++);
  const auto in_path = dir / (stem + "-in.wav");
  const auto out_path = dir / (stem + "-out.wav");
  write_wav(in_path, audio);
  std::string cmd = command;
  replace_all(cmd, "{in}", "'" + in_path.string() + "'");
  replace_all(cmd, "{out}", "'" + out_path.string() + "'");
  const int rc = std::system(cmd.c_str());
  std::error_code ec;
  std::filesystem::remove(in_path, ec);
  if (rc != 0 || !std::filesystem::exists(out_path)) {
    std::filesystem::remove(out_path, ec);
    throw CodecError("external codec command failed (status " + std::to_string(rc) + "): " + command);
  }
  AudioBuffer decoded = read_wav(out_path);
  std::filesystem::remove(out_path, ec);
  if (decoded.sample_rate != audio.sample_rate) decoded = resample_linear(decoded, audio.sample_rate);
  decoded.samples.resize(audio.samples.size(), 0.0);
  return decoded;
}

}  // namespace

CodecConfig codec_from_env() {
  CodecConfig cfg;
  if (const char* cmd = std::getenv("SPOOFSCOPE_CODEC_CMD"); cmd && *cmd) cfg.external_command = cmd;
  return cfg;
}

AudioBuffer augment_codec(const AudioBuffer& audio, const CodecConfig& cfg) {
  validate(audio);
  if (!cfg.external_command.empty()) return external_codec(audio, cfg.external_command);
  const std::size_t n_fft = cfg.frame;
  if (n_fft < 4 || (n_fft & (n_fft - 1)) != 0) throw InputError("codec frame must be a power of two >= 4");
  if (!(cfg.step_db > 0.0)) throw InputError("codec quantiser step must be positive");

  const std::size_t hop = n_fft / 2;
  auto window = dsp::make_window(dsp::Window::hann, n_fft);
  for (double& w : window) w = std::sqrt(w);
  const double cutoff_hz = cfg.cutoff_ratio * audio.sample_rate / 2.0;
  std::size_t keep = 0;  // bins 0..keep-1 survive
  while (keep <= n_fft / 2 && static_cast<double>(keep) * audio.sample_rate / n_fft <= cutoff_hz) ++keep;

  const auto& x = audio.samples;
  const auto n = static_cast<long>(x.size());
  std::vector<double> out(x.size(), 0.0), re(n_fft), im(n_fft), mag(n_fft / 2 + 1);
  for (long start = -static_cast<long>(hop); start < n; start += static_cast<long>(hop)) {
    for (std::size_t i = 0; i < n_fft; ++i) {
      const long t = start + static_cast<long>(i);
      re[i] = (t >= 0 && t < n) ? x[static_cast<std::size_t>(t)] * window[i] : 0.0;
      im[i] = 0.0;
    }
    dsp::fft(re, im);
    double peak = 0.0;
    for (std::size_t k = 0; k <= n_fft / 2; ++k) {
      mag[k] = k < keep ? std::hypot(re[k], im[k]) : 0.0;
      peak = std::max(peak, mag[k]);
    }
    for (std::size_t k = 0; k <= n_fft / 2; ++k) {
      double scale = 0.0;
      if (peak > 0.0 && mag[k] > 0.0) {
        const double db = 20.0 * std::log10(mag[k] / peak);
        if (db >= cfg.floor_db) {
          const double q = cfg.step_db * std::round(db / cfg.step_db);
          scale = peak * std::pow(10.0, q / 20.0) / mag[k];
        }
      }
      re[k] *= scale;
      im[k] *= scale;
      if (k > 0 && k < n_fft / 2) {
        re[n_fft - k] = re[k];
        im[n_fft - k] = -im[k];
      }
    }
    im[0] = 0.0;
    im[n_fft / 2] = 0.0;
    inverse_fft(re, im);
    for (std::size_t i = 0; i < n_fft; ++i) {
      const long t = start + static_cast<long>(i);
      if (t >= 0 && t < n) out[static_cast<std::size_t>(t)] += re[i] * window[i];
    }
  }
  return {std::move(out), audio.sample_rate};
}

std::vector<double> room_impulse(int sample_rate, double rt60_s, double tail_gain, std::uint64_t seed) {
  if (sample_rate <= 0) throw InputError("sample rate must be positive");
  if (!(rt60_s >= 0.0) || !std::isfinite(rt60_s)) throw InputError("rt60 must be finite and non-negative");
  const double decay_samples = rt60_s * sample_rate;
  const auto len = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(decay_samples)));
  std::vector<double> h(len, 0.0);
  h[0] = 1.0;
  SplitMix64 rng(seed);
  constexpr double ln_1000 = 6.907755278982137;  // 60 dB in amplitude
  for (std::size_t k = 1; k < len; ++k) {
    h[k] = tail_gain * rng.normal() * std::exp(-ln_1000 * static_cast<double>(k) / decay_samples);
  }
  return h;
}

std::vector<double> convolve_same(std::span<const double> x, std::span<const double> h) {
  if (x.empty() || h.empty()) return std::vector<double>(x.size(), 0.0);
  const std::size_t n = next_pow2(x.size() + h.size() - 1);
  std::vector<double> xr(n, 0.0), xi(n, 0.0), hr(n, 0.0), hi(n, 0.0);
  std::copy(x.begin(), x.end(), xr.begin());
  std::copy(h.begin(), h.end(), hr.begin());
  dsp::fft(xr, xi);
  dsp::fft(hr, hi);
  for (std::size_t k = 0; k < n; ++k) {
    const double r = xr[k] * hr[k] - xi[k] * hi[k];
    const double i = xr[k] * hi[k] + xi[k] * hr[k];
    xr[k] = r;
    xi[k] = i;
  }
  inverse_fft(xr, xi);
  xr.resize(x.size());
  return xr;
}

AudioBuffer augment_rerecord(const AudioBuffer& audio, std::uint64_t seed, const RerecordConfig& cfg) {
  validate(audio);
  const auto h = room_impulse(audio.sample_rate, cfg.rt60_s, cfg.tail_gain, derive_seed(seed, 1));
  AudioBuffer out{h.size() == 1 && h[0] == 1.0 ? audio.samples : convolve_same(audio.samples, h),
                  audio.sample_rate};
  if (std::isfinite(cfg.snr_db)) {
    double power = 0.0;
    for (double v : out.samples) power += v * v;
    power /= static_cast<double>(out.samples.size());
    if (power > 0.0) {
      const double sigma = std::sqrt(power / std::pow(10.0, cfg.snr_db / 10.0));
      SplitMix64 rng(derive_seed(seed, 2));
      for (double& v : out.samples) v += sigma * rng.normal();
    }
  }
  return out;
}

Augmentation parse_augmentation(const std::string& s) {
  if (s == "identity" || s == "original") return Augmentation::identity;
  if (s == "codec" || s == "compressed") return Augmentation::codec;
  if (s == "rerecord" || s == "rerecorded") return Augmentation::rerecord;
  throw UsageError("unknown augmentation: " + s + " (expected identity, codec or rerecord)");
}

std::string to_string(Augmentation a) {
  switch (a) {
    case Augmentation::identity: return "identity";
    case Augmentation::codec: return "codec";
    case Augmentation::rerecord: return "rerecord";
  }
  return "identity";
}

AudioBuffer apply(Augmentation a, const AudioBuffer& audio, std::uint64_t seed, const CodecConfig& codec,
                  const RerecordConfig& room) {
  switch (a) {
    case Augmentation::identity: return audio;
    case Augmentation::codec: return augment_codec(audio, codec);
    case Augmentation::rerecord: return augment_rerecord(audio, seed, room);
  }
  return audio;
}

}  // namespace spoofscope::augment
