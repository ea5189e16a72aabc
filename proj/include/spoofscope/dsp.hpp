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

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "spoofscope/audio.hpp"
#include "spoofscope/matrix.hpp"

namespace spoofscope::dsp {

inline constexpr std::size_t kNumMfcc = 20;
inline constexpr std::size_t kNumChroma = 12;
inline constexpr std::size_t kNumFeatures = 37;
inline constexpr std::size_t kMelBands = 128;

// Column order of every feature vector and feature CSV.
const std::array<std::string, kNumFeatures>& feature_names();

struct FrameGrid {
  Matrix frames;  // n_frames x frame_len
  double frame_len_ms = 20.0;
  double hop_ms = 10.0;
  std::size_t hop_samples = 0;
};

// Frame i starts at floor(i * hop_ms * sr / 1000). Frames are emitted while
// their start lies inside the signal; the tail of the last frames is
// zero-padded.
FrameGrid frame(const AudioBuffer& audio, double frame_ms, double hop_ms);

enum class Window { hann, rectangular };

// Periodic window of the given length.
std::vector<double> make_window(Window w, std::size_t n);

// In-place iterative radix-2 FFT. Size must be a power of two.
void fft(std::span<double> re, std::span<double> im);

// |DFT_k|^2 for k = 0..n_fft/2 of the windowed frame, zero-padded to n_fft.
std::vector<double> power_spectrum(std::span<const double> frame, std::size_t n_fft,
                                   Window window = Window::hann);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular HTK-style filters between 0 Hz and Nyquist, peak gain 1.
// Shape: n_mels x (n_fft/2 + 1).
Matrix mel_filterbank(std::size_t n_mels, std::size_t n_fft, int sample_rate);

// Orthonormal DCT-II of a vector, keeping the first n_out coefficients.
std::vector<double> dct2_ortho(std::span<const double> x, std::size_t n_out);

// y[0] = x[0], y[n] = x[n] - coeff * x[n-1].
std::vector<double> pre_emphasis(std::span<const double> x, double coeff);

struct FeatureConfig {
  double frame_ms = 20.0;
  double hop_ms = 10.0;
  std::size_t n_fft = 512;
  std::size_t n_mels = 40;
  std::size_t n_mfcc = kNumMfcc;
  double pre_emphasis = 0.97;
  double log_floor = 1e-10;
  double rolloff_percent = 0.85;
  // Chroma needs semitone resolution, which a 20 ms window cannot give, so
  // it runs its own longer window on the same hop grid.
  double chroma_window_ms = 128.0;
  std::size_t chroma_n_fft = 2048;
  double chroma_fmin = 55.0;
};

// n_frames x n_mfcc.
Matrix mfcc(const AudioBuffer& audio, const FeatureConfig& cfg = {});

struct SpectralScalars {
  double centroid = 0.0;   // Hz
  double bandwidth = 0.0;  // Hz
  double rolloff = 0.0;    // Hz
  double zcr = 0.0;
  double rms = 0.0;
};

// Scalars of one raw (unwindowed) frame.
SpectralScalars frame_scalars(std::span<const double> frame, int sample_rate,
                              const FeatureConfig& cfg = {});

std::vector<SpectralScalars> spectral_scalars(const AudioBuffer& audio,
                                              const FeatureConfig& cfg = {});

// Pitch class of a frequency, C = 0 ... A = 9 ... B = 11.
int pitch_class(double hz);

// 12-vector for one magnitude spectrum of an n_fft-point transform.
std::array<double, kNumChroma> chroma_from_spectrum(std::span<const double> power,
                                                    std::size_t n_fft, int sample_rate,
                                                    double fmin);

// n_frames x 12; rows L2-normalised unless all zero.
Matrix chroma(const AudioBuffer& audio, const FeatureConfig& cfg = {});

using FeatureVector = std::array<double, kNumFeatures>;

// Frame-averaged features in feature_names() order.
FeatureVector extract_features(const AudioBuffer& audio, const FeatureConfig& cfg = {});

// Per-frame feature rows (n_frames x 37) before averaging.
Matrix frame_features(const AudioBuffer& audio, const FeatureConfig& cfg = {});

// Extracts features for many clips. Rows follow input order; the parallel
// version hands whole clips to threads and is bit-identical to the serial
// reference.
Matrix batch_features(std::span<const AudioBuffer> clips, const FeatureConfig& cfg = {});

namespace serial {
Matrix batch_features(std::span<const AudioBuffer> clips, const FeatureConfig& cfg = {});
}  // namespace serial

struct MelConfig {
  std::size_t n_mels = kMelBands;
  double hop_ms = 100.0;
  double win_ms = 100.0;
  std::size_t n_fft = 2048;
  double log_floor = 1e-10;
};

// Log-Mel spectrogram, bands x time.
struct MelSpectrogram {
  Matrix values;
  std::vector<double> band_centers;
  double hop_ms = 100.0;

  std::size_t bands() const { return values.rows(); }
  std::size_t steps() const { return values.cols(); }
};

MelSpectrogram mel_spectrogram(const AudioBuffer& audio, const MelConfig& cfg = {});

}  // namespace spoofscope::dsp
