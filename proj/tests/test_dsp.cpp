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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <cstring>

#include "spoofscope/audio.hpp"
#include "spoofscope/dsp.hpp"
#include "spoofscope/errors.hpp"
#include "spoofscope/rng.hpp"

using namespace spoofscope;
using namespace spoofscope::dsp;

namespace {

constexpr double kPi = std::numbers::pi;

AudioBuffer tone(double hz, double seconds, int sr = 16000, double amp = 1.0) {
  AudioBuffer a;
  a.sample_rate = sr;
  a.samples.resize(static_cast<std::size_t>(std::lround(seconds * sr)));
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    a.samples[i] = amp * std::sin(2.0 * kPi * hz * static_cast<double>(i) / sr);
  return a;
}

AudioBuffer noise(std::size_t n, std::uint64_t seed, double amp = 0.3) {
  SplitMix64 rng(seed);
  AudioBuffer a;
  a.samples.resize(n);
  for (double& x : a.samples) x = amp * rng.uniform(-1.0, 1.0);
  return a;
}

// |X_k|^2 by the O(n^2) definition, k = 0..n_fft/2.
std::vector<double> naive_power(std::span<const double> x, std::size_t n_fft) {
  std::vector<double> out(n_fft / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double a = -2.0 * kPi * static_cast<double>(k * i % n_fft) / static_cast<double>(n_fft);
      re += x[i] * std::cos(a);
      im += x[i] * std::sin(a);
    }
    out[k] = re * re + im * im;
  }
  return out;
}

std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n);
  return w;
}

// MFCCs built from hand-written stages: recurrence pre-emphasis, explicit
// frame starts, Hann, naive DFT, filterbank product, log, DCT-II by formula.
Matrix mfcc_oracle(const AudioBuffer& a, const FeatureConfig& cfg) {
  std::vector<double> y(a.samples.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] = a.samples[i] - (i ? cfg.pre_emphasis * a.samples[i - 1] : 0.0);
  const std::size_t len = static_cast<std::size_t>(std::lround(cfg.frame_ms * a.sample_rate / 1000.0));
  const double hop = cfg.hop_ms * a.sample_rate / 1000.0;
  std::vector<std::size_t> starts;
  for (std::size_t i = 0;; ++i) {
    const auto s = static_cast<std::size_t>(std::floor(static_cast<double>(i) * hop));
    if (s >= y.size()) break;
    starts.push_back(s);
  }
  const auto fb = mel_filterbank(cfg.n_mels, cfg.n_fft, a.sample_rate);
  const auto w = hann(len);
  Matrix out(starts.size(), cfg.n_mfcc);
  for (std::size_t f = 0; f < starts.size(); ++f) {
    std::vector<double> x(len, 0.0);
    for (std::size_t i = 0; i < len && starts[f] + i < y.size(); ++i) x[i] = y[starts[f] + i] * w[i];
    const auto p = naive_power(x, cfg.n_fft);
    std::vector<double> lm(cfg.n_mels);
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < p.size(); ++k) e += fb(m, k) * p[k];
      lm[m] = std::log(std::max(e, cfg.log_floor));
    }
    const double n = static_cast<double>(cfg.n_mels);
    for (std::size_t k = 0; k < cfg.n_mfcc; ++k) {
      double acc = 0.0;
      for (std::size_t i = 0; i < cfg.n_mels; ++i) acc += lm[i] * std::cos(kPi * k * (2.0 * i + 1.0) / (2.0 * n));
      out(f, k) = acc * std::sqrt((k == 0 ? 1.0 : 2.0) / n);
    }
  }
  return out;
}

}  // namespace

TEST(Frame, CountsFrameStartsInsideSignal) {
  AudioBuffer a = noise(400, 1);
  const auto g = frame(a, 20.0, 10.0);
  ASSERT_EQ(g.frames.rows(), 3u);
  ASSERT_EQ(g.frames.cols(), 320u);
  EXPECT_EQ(g.hop_samples, 160u);
  for (std::size_t i = 0; i < 80; ++i) EXPECT_EQ(g.frames(2, i), a.samples[320 + i]);
  for (std::size_t i = 80; i < 320; ++i) EXPECT_EQ(g.frames(2, i), 0.0);
}

TEST(Frame, ExactFitGivesOneFrame) {
  const auto g = frame(noise(320, 2), 20.0, 20.0);
  EXPECT_EQ(g.frames.rows(), 1u);
}

TEST(Frame, ZeroAudioGivesZeroFrames) {
  AudioBuffer a;
  a.samples.assign(1000, 0.0);
  const auto g = frame(a, 20.0, 10.0);
  for (double v : g.frames.values()) EXPECT_EQ(v, 0.0);
}

TEST(Frame, EmptyAudioThrows) {
  EXPECT_THROW(frame(AudioBuffer{}, 20.0, 10.0), InputError);
}

TEST(PowerSpectrum, ZeroFrameIsZero) {
  const std::vector<double> z(320, 0.0);
  for (double v : power_spectrum(z, 512)) EXPECT_EQ(v, 0.0);
}

TEST(PowerSpectrum, BinSinusoidConcentratesInItsBin) {
  const std::size_t n = 512, bin = 10;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::cos(2.0 * kPi * bin * i / n);
  const auto p = power_spectrum(x, n, Window::rectangular);
  EXPECT_NEAR(p[bin], std::pow(n / 2.0, 2), 1e-6);
  for (std::size_t k = 0; k < p.size(); ++k)
    if (k != bin) { EXPECT_LT(p[k], 1e-12 * p[bin]); }
}

TEST(PowerSpectrum, MatchesNaiveDft) {
  SplitMix64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t len = 1 + rng.next() % 512;
    std::vector<double> x(len);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    const auto w = hann(len);
    std::vector<double> xw(len);
    for (std::size_t i = 0; i < len; ++i) xw[i] = x[i] * w[i];
    const auto got = power_spectrum(x, 512);
    const auto ref = naive_power(xw, 512);
    const double scale = std::max(1e-300, *std::max_element(ref.begin(), ref.end()));
    for (std::size_t k = 0; k < ref.size(); ++k) ASSERT_LE(std::abs(got[k] - ref[k]) / scale, 1e-9);
  }
}

TEST(PowerSpectrum, Parseval) {
  SplitMix64 rng(8);
  for (std::size_t len : {64u, 320u, 512u}) {
    std::vector<double> x(len);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    const auto p = power_spectrum(x, 512);
    const auto w = hann(len);
    double energy = 0.0;
    for (std::size_t i = 0; i < len; ++i) energy += x[i] * w[i] * x[i] * w[i];
    double total = p.front() + p.back();
    for (std::size_t k = 1; k + 1 < p.size(); ++k) total += 2.0 * p[k];
    EXPECT_NEAR(total / 512.0, energy, 1e-6 * energy);
  }
}

TEST(PowerSpectrum, RejectsBadSizes) {
  EXPECT_THROW(power_spectrum(std::vector<double>{}, 512), InputError);
  EXPECT_THROW(power_spectrum(std::vector<double>(600, 1.0), 512), InputError);
  std::vector<double> re(12), im(12);
  EXPECT_THROW(fft(re, im), InputError);
}

TEST(MelFilterbank, TrianglesPeakAtOneAndStayInBand) {
  const auto fb = mel_filterbank(40, 512, 16000);
  ASSERT_EQ(fb.rows(), 40u);
  ASSERT_EQ(fb.cols(), 257u);
  for (std::size_t m = 0; m < fb.rows(); ++m) {
    double peak = 0.0;
    for (std::size_t k = 0; k < fb.cols(); ++k) {
      EXPECT_GE(fb(m, k), 0.0);
      peak = std::max(peak, fb(m, k));
    }
    EXPECT_LE(peak, 1.0);
  }
  EXPECT_NEAR(mel_to_hz(hz_to_mel(1234.5)), 1234.5, 1e-9);
  EXPECT_NEAR(hz_to_mel(700.0), 2595.0 * std::log10(2.0), 1e-12);
}

TEST(Dct, OrthonormalBasis) {
  // Orthonormal DCT-II preserves the energy of the full transform.
  SplitMix64 rng(9);
  std::vector<double> x(16);
  for (double& v : x) v = rng.uniform(-1.0, 1.0);
  const auto c = dct2_ortho(x, 16);
  double ex = 0.0, ec = 0.0;
  for (double v : x) ex += v * v;
  for (double v : c) ec += v * v;
  EXPECT_NEAR(ex, ec, 1e-12);
  EXPECT_THROW(dct2_ortho(x, 17), InputError);
}

TEST(Mfcc, MatchesStageOracleOnWhiteNoise) {
  const auto a = noise(4000, 10);
  const FeatureConfig cfg;
  const auto got = mfcc(a, cfg);
  const auto ref = mfcc_oracle(a, cfg);
  ASSERT_EQ(got.rows(), ref.rows());
  ASSERT_EQ(got.cols(), 20u);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.values()[i], ref.values()[i], 1e-6);
}

TEST(Mfcc, DcInputAfterPreEmphasis) {
  AudioBuffer a;
  a.samples.assign(1600, 0.5);
  const auto y = pre_emphasis(a.samples, 0.97);
  EXPECT_EQ(y[0], 0.5);
  for (std::size_t i = 1; i < y.size(); ++i) EXPECT_NEAR(y[i], 0.015, 1e-15);
  const FeatureConfig cfg;
  const auto got = mfcc(a, cfg);
  const auto ref = mfcc_oracle(a, cfg);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.values()[i], ref.values()[i], 1e-6);
}

TEST(Mfcc, ScalingShiftsOnlyTheEnergyTerm) {
  auto a = noise(8000, 11);
  auto b = a;
  for (double& x : b.samples) x *= 2.0;
  const auto ma = mfcc(a), mb = mfcc(b);
  const double shift = std::log(4.0) * std::sqrt(40.0);
  for (std::size_t f = 0; f < ma.rows(); ++f) {
    EXPECT_NEAR(mb(f, 0) - ma(f, 0), shift, 1e-6);
    for (std::size_t k = 1; k < ma.cols(); ++k) EXPECT_NEAR(mb(f, k), ma(f, k), 1e-6);
  }
}

TEST(Mfcc, RejectsShortAudioAndBadCount) {
  EXPECT_THROW(mfcc(noise(100, 1)), InputError);
  FeatureConfig cfg;
  cfg.n_mfcc = 41;
  EXPECT_THROW(mfcc(noise(1000, 1), cfg), InputError);
}

TEST(SpectralScalars, SineRms) {
  const auto s = spectral_scalars(tone(1000.0, 0.5));
  // Only frames fully inside the clip.
  for (std::size_t f = 0; f + 2 < s.size(); ++f) EXPECT_NEAR(s[f].rms, 1.0 / std::sqrt(2.0), 1e-3);
}

TEST(SpectralScalars, ConstantSignalHasNoCrossings) {
  AudioBuffer a;
  a.samples.assign(1000, 0.25);
  for (const auto& s : spectral_scalars(a)) EXPECT_EQ(s.zcr, 0.0);
}

TEST(SpectralScalars, ToneCentroidAndRolloff) {
  const double bin_hz = 16000.0 / 512.0;
  const auto s = spectral_scalars(tone(1000.0, 0.5));
  for (std::size_t f = 0; f + 2 < s.size(); ++f) {
    EXPECT_NEAR(s[f].centroid, 1000.0, bin_hz);
    EXPECT_NEAR(s[f].rolloff, 1000.0, bin_hz);
  }
}

TEST(SpectralScalars, SilentFrameIsZero) {
  const std::vector<double> z(320, 0.0);
  const auto s = frame_scalars(z, 16000);
  EXPECT_EQ(s.centroid, 0.0);
  EXPECT_EQ(s.bandwidth, 0.0);
  EXPECT_EQ(s.rolloff, 0.0);
  EXPECT_EQ(s.rms, 0.0);
}

TEST(SpectralScalars, RolloffMonotoneInPercentage) {
  const auto a = noise(320, 12);
  double prev = 0.0;
  for (double pct : {0.1, 0.3, 0.5, 0.7, 0.85, 0.95, 0.99}) {
    FeatureConfig cfg;
    cfg.rolloff_percent = pct;
    const double r = frame_scalars(a.samples, 16000, cfg).rolloff;
    EXPECT_GE(r, prev);
    prev = r;
  }
}

TEST(Chroma, PitchClassFormula) {
  EXPECT_EQ(pitch_class(440.0), 9);
  EXPECT_EQ(pitch_class(261.6256), 0);
  EXPECT_EQ(pitch_class(880.0), 9);
  EXPECT_EQ(pitch_class(466.1638), 10);
}

TEST(Chroma, A440ConcentratesInClassA) {
  const auto c = chroma(tone(440.0, 1.0));
  // Frames whose window lies inside the clip.
  for (std::size_t f = 0; f + 13 < c.rows(); ++f) {
    double l1 = 0.0;
    for (std::size_t k = 0; k < 12; ++k) l1 += c(f, k);
    EXPECT_GE(c(f, 9) / l1, 0.9);
  }
}

TEST(Chroma, OctaveInvariance) {
  for (double hz : {220.0, 440.0, 1000.0}) {
    const auto lo = chroma(tone(hz, 1.0)), hi = chroma(tone(2.0 * hz, 1.0));
    const auto row = 20;
    const auto argmax = [&](const Matrix& m) {
      auto r = m.row(row);
      return std::distance(r.begin(), std::max_element(r.begin(), r.end()));
    };
    EXPECT_EQ(argmax(lo), argmax(hi)) << hz;
  }
}

TEST(Chroma, SilenceIsZero) {
  AudioBuffer a;
  a.samples.assign(8000, 0.0);
  const auto c = chroma(a);
  for (double v : c.values()) EXPECT_EQ(v, 0.0);
}

TEST(Chroma, RejectsLowSampleRate) {
  auto a = noise(4000, 1);
  a.sample_rate = 4000;
  EXPECT_THROW(chroma(a), InputError);
}

TEST(Features, NamesAndOrder) {
  const auto& n = feature_names();
  EXPECT_EQ(n.size(), 37u);
  EXPECT_EQ(n[0], "mfcc1");
  EXPECT_EQ(n[19], "mfcc20");
  EXPECT_EQ(n[20], "chroma1");
  EXPECT_EQ(n[32], "spectral_centroid");
  EXPECT_EQ(n[36], "rms");
}

TEST(Features, VectorIsMeanOfFrameRows) {
  const auto a = noise(5000, 13);
  const auto rows = frame_features(a);
  const auto v = extract_features(a);
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    double s = 0.0;
    for (std::size_t f = 0; f < rows.rows(); ++f) s += rows(f, j);
    EXPECT_DOUBLE_EQ(v[j], s / static_cast<double>(rows.rows()));
  }
}

TEST(Features, RepeatedFramesGiveIdenticalRows) {
  // Period equal to the hop, so every frame that lies inside the clip sees
  // the same samples.
  AudioBuffer a;
  SplitMix64 rng(14);
  std::vector<double> period(160);
  for (double& x : period) x = rng.uniform(-0.5, 0.5);
  for (int r = 0; r < 40; ++r) a.samples.insert(a.samples.end(), period.begin(), period.end());
  const auto rows = frame_features(a);
  // Chroma's 128 ms window covers 2048 samples, so 13 hops from the end.
  const std::size_t inside = rows.rows() - 13;
  for (std::size_t f = 1; f < inside; ++f)
    for (std::size_t j = 0; j < kNumFeatures; ++j) EXPECT_NEAR(rows(f, j), rows(0, j), 1e-9 * (1.0 + std::abs(rows(0, j))));
}

TEST(Features, ConcatenationKeepsFramesOfFirstClip) {
  const auto a = noise(8000, 15), b = noise(8000, 16);
  AudioBuffer ab = a;
  ab.samples.insert(ab.samples.end(), b.samples.begin(), b.samples.end());
  const auto ra = frame_features(a), rab = frame_features(ab);
  const std::size_t inside = ra.rows() - 13;
  for (std::size_t f = 0; f < inside; ++f)
    for (std::size_t j = 0; j < kNumFeatures; ++j) EXPECT_EQ(rab(f, j), ra(f, j));
}

TEST(Features, RandomFixturesAreWellFormed) {
  SplitMix64 rng(17);
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 320 + rng.next() % 4000;
    const auto v = extract_features(noise(n, 100 + i, rng.uniform(0.01, 1.0)));
    ASSERT_EQ(v.size(), 37u);
    for (double x : v) ASSERT_TRUE(std::isfinite(x));
    EXPECT_GE(v[36], 0.0);
    EXPECT_GE(v[35], 0.0);
    EXPECT_LE(v[35], 1.0);
    EXPECT_GE(v[34], 0.0);
    EXPECT_LE(v[34], 8000.0);
  }
}

TEST(Features, DeterministicBitForBit) {
  const auto a = noise(3000, 18);
  const auto v1 = extract_features(a), v2 = extract_features(a);
  EXPECT_EQ(std::memcmp(v1.data(), v2.data(), sizeof(double) * v1.size()), 0);
}

TEST(Features, BatchParallelMatchesSerial) {
  std::vector<AudioBuffer> clips;
  for (int i = 0; i < 12; ++i) clips.push_back(noise(2000 + 97 * i, 200 + i));
  EXPECT_TRUE(batch_features(clips) == dsp::serial::batch_features(clips));
}

TEST(Features, BatchPropagatesInputError) {
  std::vector<AudioBuffer> clips{noise(2000, 1), noise(10, 2)};
  EXPECT_THROW(batch_features(clips), InputError);
  EXPECT_THROW(dsp::serial::batch_features(clips), InputError);
}

TEST(MelSpectrogram, SixSecondsGives128By60) {
  const auto s = mel_spectrogram(noise(96000, 19));
  EXPECT_EQ(s.bands(), 128u);
  EXPECT_EQ(s.steps(), 60u);
  EXPECT_EQ(s.band_centers.size(), 128u);
  for (double v : s.values.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(MelSpectrogram, SilenceIsLogFloor) {
  AudioBuffer a;
  a.samples.assign(16000, 0.0);
  const auto s = mel_spectrogram(a);
  for (double v : s.values.values()) EXPECT_EQ(v, std::log(1e-10));
}

TEST(MelSpectrogram, DoublingAddsConstant) {
  auto a = noise(32000, 20);
  auto b = a;
  for (double& x : b.samples) x *= 2.0;
  const auto sa = mel_spectrogram(a), sb = mel_spectrogram(b);
  for (std::size_t i = 0; i < sa.values.size(); ++i)
    EXPECT_NEAR(sb.values.values()[i] - sa.values.values()[i], std::log(4.0), 1e-9);
}

TEST(Audio, TrimSilenceDropsQuietEdges) {
  AudioBuffer a;
  a.samples.assign(100, 0.0);
  const auto t = tone(500.0, 0.01);
  a.samples.insert(a.samples.end(), t.samples.begin(), t.samples.end());
  a.samples.insert(a.samples.end(), 50, 0.0);
  const auto trimmed = trim_silence(a);
  EXPECT_LT(trimmed.samples.size(), t.samples.size() + 1);
  EXPECT_GT(trimmed.samples.size(), t.samples.size() - 10);
  AudioBuffer silent;
  silent.samples.assign(10, 0.0);
  EXPECT_EQ(trim_silence(silent).samples.size(), 10u);
}
