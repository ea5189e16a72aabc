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

#include "spoofscope/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>

#include "spoofscope/errors.hpp"

namespace spoofscope::dsp {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::size_t samples_for(double ms, int sample_rate) {
  return static_cast<std::size_t>(std::lround(ms * sample_rate / 1000.0));
}

}  // namespace

const std::array<std::string, kNumFeatures>& feature_names() {
  static const std::array<std::string, kNumFeatures> names = [] {
    std::array<std::string, kNumFeatures> n;
    std::size_t i = 0;
    for (std::size_t k = 1; k <= kNumMfcc; ++k) n[i++] = "mfcc" + std::to_string(k);
    for (std::size_t k = 1; k <= kNumChroma; ++k) n[i++] = "chroma" + std::to_string(k);
    n[i++] = "spectral_centroid";
    n[i++] = "spectral_bandwidth";
    n[i++] = "spectral_rolloff";
    n[i++] = "zcr";
    n[i++] = "rms";
    return n;
  }();
  return names;
}

FrameGrid frame(const AudioBuffer& audio, double frame_ms, double hop_ms) {
  if (audio.samples.empty()) throw InputError("cannot frame empty audio");
  if (!(frame_ms > 0.0) || !(hop_ms > 0.0)) throw InputError("frame and hop must be positive");
  if (audio.sample_rate <= 0) throw InputError("sample rate must be positive");

  const std::size_t frame_len = std::max<std::size_t>(1, samples_for(frame_ms, audio.sample_rate));
  const double hop = hop_ms * audio.sample_rate / 1000.0;
  const std::size_t n = audio.samples.size();

  std::vector<std::size_t> starts;
  for (std::size_t i = 0;; ++i) {
    const auto s = static_cast<std::size_t>(std::floor(static_cast<double>(i) * hop));
    if (s >= n) break;
    starts.push_back(s);
  }

  FrameGrid grid;
  grid.frame_len_ms = frame_ms;
  grid.hop_ms = hop_ms;
  grid.hop_samples = static_cast<std::size_t>(std::floor(hop));
  grid.frames = Matrix(starts.size(), frame_len);
  for (std::size_t f = 0; f < starts.size(); ++f) {
    const std::size_t take = std::min(frame_len, n - starts[f]);
    std::copy_n(audio.samples.begin() + static_cast<std::ptrdiff_t>(starts[f]), take,
                grid.frames.row(f).begin());
  }
  return grid;
}

std::vector<double> make_window(Window w, std::size_t n) {
  std::vector<double> win(n, 1.0);
  if (w == Window::hann) {
    for (std::size_t i = 0; i < n; ++i) {
      win[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
    }
  }
  return win;
}

void fft(std::span<double> re, std::span<double> im) {
  const std::size_t n = re.size();
  if (im.size() != n) throw InputError("fft: real and imaginary parts differ in length");
  if (!is_pow2(n)) throw InputError("fft: size must be a power of two");

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }

  // Twiddles are evaluated directly rather than by recurrence to keep the
  // error at the level of a single cos/sin call.
  thread_local std::vector<double> tw_re, tw_im;
  if (tw_re.size() != n / 2) {
    tw_re.resize(n / 2);
    tw_im.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double a = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
      tw_re[k] = std::cos(a);
      tw_im[k] = std::sin(a);
    }
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const double wr = tw_re[k * step];
        const double wi = tw_im[k * step];
        const std::size_t a = i + k;
        const std::size_t b = a + half;
        const double xr = re[b] * wr - im[b] * wi;
        const double xi = re[b] * wi + im[b] * wr;
        re[b] = re[a] - xr;
        im[b] = im[a] - xi;
        re[a] += xr;
        im[a] += xi;
      }
    }
  }
}

std::vector<double> power_spectrum(std::span<const double> frame, std::size_t n_fft,
                                   Window window) {
  if (frame.empty()) throw InputError("power_spectrum: empty frame");
  if (frame.size() > n_fft) throw InputError("power_spectrum: frame longer than n_fft");
  const std::vector<double> win = make_window(window, frame.size());
  std::vector<double> re(n_fft, 0.0), im(n_fft, 0.0);
  for (std::size_t i = 0; i < frame.size(); ++i) re[i] = frame[i] * win[i];
  fft(re, im);
  std::vector<double> power(n_fft / 2 + 1);
  for (std::size_t k = 0; k < power.size(); ++k) power[k] = re[k] * re[k] + im[k] * im[k];
  return power;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Matrix mel_filterbank(std::size_t n_mels, std::size_t n_fft, int sample_rate) {
  if (n_mels == 0) throw InputError("mel_filterbank: n_mels must be positive");
  const std::size_t n_bins = n_fft / 2 + 1;
  const double mel_max = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  }
  Matrix fb(n_mels, n_bins);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n_fft);
      double w = 0.0;
      if (f > lo && f <= mid) {
        w = (f - lo) / (mid - lo);
      } else if (f > mid && f < hi) {
        w = (hi - f) / (hi - mid);
      }
      fb(m, k) = w;
    }
  }
  return fb;
}

std::vector<double> dct2_ortho(std::span<const double> x, std::size_t n_out) {
  const std::size_t n = x.size();
  if (n_out > n) throw InputError("dct2_ortho: more outputs than inputs");
  std::vector<double> out(n_out);
  const double s0 = std::sqrt(1.0 / static_cast<double>(n));
  const double sk = std::sqrt(2.0 / static_cast<double>(n));
  for (std::size_t k = 0; k < n_out; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += x[i] * std::cos(kPi * static_cast<double>(k) * (2.0 * static_cast<double>(i) + 1.0) /
                             (2.0 * static_cast<double>(n)));
    }
    out[k] = (k == 0 ? s0 : sk) * acc;
  }
  return out;
}

std::vector<double> pre_emphasis(std::span<const double> x, double coeff) {
  std::vector<double> y(x.size());
  if (x.empty()) return y;
  y[0] = x[0];
  for (std::size_t i = 1; i < x.size(); ++i) y[i] = x[i] - coeff * x[i - 1];
  return y;
}

namespace {

std::size_t effective_nfft(std::size_t requested, std::size_t frame_len) {
  return std::max(requested, next_pow2(frame_len));
}

std::vector<double> mel_energies(std::span<const double> power, const Matrix& fb) {
  std::vector<double> e(fb.rows(), 0.0);
  for (std::size_t m = 0; m < fb.rows(); ++m) {
    const auto w = fb.row(m);
    double acc = 0.0;
    for (std::size_t k = 0; k < power.size(); ++k) acc += w[k] * power[k];
    e[m] = acc;
  }
  return e;
}

void check_min_length(const AudioBuffer& audio, double frame_ms) {
  validate(audio);
  if (audio.samples.size() < samples_for(frame_ms, audio.sample_rate)) {
    throw InputError("audio is shorter than one analysis frame");
  }
}

}  // namespace

Matrix mfcc(const AudioBuffer& audio, const FeatureConfig& cfg) {
  check_min_length(audio, cfg.frame_ms);
  if (cfg.n_mfcc < 1 || cfg.n_mfcc > cfg.n_mels) throw InputError("n_mfcc must be in [1, n_mels]");

  AudioBuffer emphasised{pre_emphasis(audio.samples, cfg.pre_emphasis), audio.sample_rate};
  const FrameGrid grid = frame(emphasised, cfg.frame_ms, cfg.hop_ms);
  const std::size_t n_fft = effective_nfft(cfg.n_fft, grid.frames.cols());
  const Matrix fb = mel_filterbank(cfg.n_mels, n_fft, audio.sample_rate);

  Matrix out(grid.frames.rows(), cfg.n_mfcc);
  std::vector<double> log_mel(cfg.n_mels);
  for (std::size_t f = 0; f < grid.frames.rows(); ++f) {
    const auto power = power_spectrum(grid.frames.row(f), n_fft, Window::hann);
    const auto e = mel_energies(power, fb);
    for (std::size_t m = 0; m < e.size(); ++m) log_mel[m] = std::log(std::max(e[m], cfg.log_floor));
    const auto c = dct2_ortho(log_mel, cfg.n_mfcc);
    std::copy(c.begin(), c.end(), out.row(f).begin());
  }
  return out;
}

SpectralScalars frame_scalars(std::span<const double> frame, int sample_rate,
                              const FeatureConfig& cfg) {
  SpectralScalars s;
  const std::size_t n = frame.size();
  if (n == 0) throw InputError("frame_scalars: empty frame");

  double sq = 0.0;
  for (double x : frame) sq += x * x;
  s.rms = std::sqrt(sq / static_cast<double>(n));

  if (n > 1) {
    std::size_t crossings = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if ((frame[i - 1] < 0.0) != (frame[i] < 0.0)) ++crossings;
    }
    s.zcr = static_cast<double>(crossings) / static_cast<double>(n - 1);
  }

  const std::size_t n_fft = effective_nfft(cfg.n_fft, n);
  const auto power = power_spectrum(frame, n_fft, Window::hann);
  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(n_fft);

  double mag_sum = 0.0, weighted = 0.0, energy = 0.0;
  for (std::size_t k = 0; k < power.size(); ++k) {
    const double m = std::sqrt(power[k]);
    mag_sum += m;
    weighted += m * static_cast<double>(k) * bin_hz;
    energy += power[k];
  }
  if (mag_sum <= 0.0) return s;  // silent frame: spectral scalars stay 0

  s.centroid = weighted / mag_sum;
  double spread = 0.0;
  for (std::size_t k = 0; k < power.size(); ++k) {
    const double d = static_cast<double>(k) * bin_hz - s.centroid;
    spread += d * d * std::sqrt(power[k]);
  }
  s.bandwidth = std::sqrt(spread / mag_sum);

  const double target = cfg.rolloff_percent * energy;
  double cum = 0.0;
  for (std::size_t k = 0; k < power.size(); ++k) {
    cum += power[k];
    if (cum >= target) {
      s.rolloff = static_cast<double>(k) * bin_hz;
      break;
    }
  }
  return s;
}

std::vector<SpectralScalars> spectral_scalars(const AudioBuffer& audio, const FeatureConfig& cfg) {
  validate(audio);
  const FrameGrid grid = frame(audio, cfg.frame_ms, cfg.hop_ms);
  std::vector<SpectralScalars> out(grid.frames.rows());
  for (std::size_t f = 0; f < out.size(); ++f) {
    out[f] = frame_scalars(grid.frames.row(f), audio.sample_rate, cfg);
  }
  return out;
}

int pitch_class(double hz) {
  const long semis = std::lround(12.0 * std::log2(hz / 440.0));
  return static_cast<int>(((semis + 9) % 12 + 12) % 12);
}

std::array<double, kNumChroma> chroma_from_spectrum(std::span<const double> power,
                                                    std::size_t n_fft, int sample_rate,
                                                    double fmin) {
  std::array<double, kNumChroma> c{};
  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(n_fft);
  for (std::size_t k = 1; k < power.size(); ++k) {
    const double f = static_cast<double>(k) * bin_hz;
    if (f < fmin) continue;
    c[static_cast<std::size_t>(pitch_class(f))] += std::sqrt(power[k]);
  }
  double norm = 0.0;
  for (double v : c) norm += v * v;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& v : c) v /= norm;
  }
  return c;
}

Matrix chroma(const AudioBuffer& audio, const FeatureConfig& cfg) {
  validate(audio);
  if (audio.sample_rate < 8000) throw InputError("chroma requires a sample rate of at least 8 kHz");
  const FrameGrid grid = frame(audio, cfg.chroma_window_ms, cfg.hop_ms);
  const std::size_t n_fft = effective_nfft(cfg.chroma_n_fft, grid.frames.cols());
  Matrix out(grid.frames.rows(), kNumChroma);
  for (std::size_t f = 0; f < grid.frames.rows(); ++f) {
    const auto power = power_spectrum(grid.frames.row(f), n_fft, Window::hann);
    const auto c = chroma_from_spectrum(power, n_fft, audio.sample_rate, cfg.chroma_fmin);
    std::copy(c.begin(), c.end(), out.row(f).begin());
  }
  return out;
}

Matrix frame_features(const AudioBuffer& audio, const FeatureConfig& cfg) {
  check_min_length(audio, cfg.frame_ms);
  if (cfg.n_mfcc != kNumMfcc) throw InputError("feature vectors use exactly 20 MFCCs");
  const Matrix m = mfcc(audio, cfg);
  const Matrix c = chroma(audio, cfg);
  const auto s = spectral_scalars(audio, cfg);
  // All three share the hop grid, so the frame counts agree.
  Matrix out(m.rows(), kNumFeatures);
  for (std::size_t f = 0; f < m.rows(); ++f) {
    auto row = out.row(f);
    std::copy_n(m.row(f).begin(), kNumMfcc, row.begin());
    std::copy_n(c.row(f).begin(), kNumChroma, row.begin() + kNumMfcc);
    const std::size_t b = kNumMfcc + kNumChroma;
    row[b + 0] = s[f].centroid;
    row[b + 1] = s[f].bandwidth;
    row[b + 2] = s[f].rolloff;
    row[b + 3] = s[f].zcr;
    row[b + 4] = s[f].rms;
  }
  return out;
}

FeatureVector extract_features(const AudioBuffer& audio, const FeatureConfig& cfg) {
  const Matrix per_frame = frame_features(audio, cfg);
  FeatureVector v{};
  for (std::size_t f = 0; f < per_frame.rows(); ++f) {
    for (std::size_t j = 0; j < kNumFeatures; ++j) v[j] += per_frame(f, j);
  }
  const auto n = static_cast<double>(per_frame.rows());
  for (double& x : v) x /= n;
  return v;
}

Matrix batch_features(std::span<const AudioBuffer> clips, const FeatureConfig& cfg) {
  Matrix out(clips.size(), kNumFeatures);
  const auto n = static_cast<long>(clips.size());
  // Exceptions must not escape an OpenMP region; keep the first one and
  // rethrow it afterwards.
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    try {
      const auto v = extract_features(clips[static_cast<std::size_t>(i)], cfg);
      std::copy(v.begin(), v.end(), out.row(static_cast<std::size_t>(i)).begin());
    } catch (...) {
#pragma omp critical(spoofscope_batch_features)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

namespace serial {

Matrix batch_features(std::span<const AudioBuffer> clips, const FeatureConfig& cfg) {
  Matrix out(clips.size(), kNumFeatures);
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const auto v = extract_features(clips[i], cfg);
    std::copy(v.begin(), v.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace serial

MelSpectrogram mel_spectrogram(const AudioBuffer& audio, const MelConfig& cfg) {
  validate(audio);
  const FrameGrid grid = frame(audio, cfg.win_ms, cfg.hop_ms);
  const std::size_t n_fft = effective_nfft(cfg.n_fft, grid.frames.cols());
  const Matrix fb = mel_filterbank(cfg.n_mels, n_fft, audio.sample_rate);

  MelSpectrogram spec;
  spec.hop_ms = cfg.hop_ms;
  spec.values = Matrix(cfg.n_mels, grid.frames.rows());
  for (std::size_t t = 0; t < grid.frames.rows(); ++t) {
    const auto power = power_spectrum(grid.frames.row(t), n_fft, Window::hann);
    const auto e = mel_energies(power, fb);
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
      spec.values(m, t) = std::log(std::max(e[m], cfg.log_floor));
    }
  }
  const double mel_max = hz_to_mel(audio.sample_rate / 2.0);
  spec.band_centers.resize(cfg.n_mels);
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    spec.band_centers[m] =
        mel_to_hz(mel_max * static_cast<double>(m + 1) / static_cast<double>(cfg.n_mels + 1));
  }
  return spec;
}

}  // namespace spoofscope::dsp
