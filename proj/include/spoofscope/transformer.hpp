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
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "spoofscope/dsp.hpp"
#include "spoofscope/matrix.hpp"

namespace spoofscope::transformer {

struct PatchGeometry {
  std::size_t patch_h = 16;
  std::size_t patch_w = 16;
  std::size_t stride_h = 10;
  std::size_t stride_w = 10;
};

struct PatchGrid {
  std::size_t rows = 0;  // along frequency
  std::size_t cols = 0;  // along time

  std::size_t count() const { return rows * cols; }
};

// floor((H - ph) / sh) + 1 by floor((W - pw) / sw) + 1. Throws InputError
// when the spectrogram is smaller than one patch.
PatchGrid patch_grid(std::size_t bands, std::size_t steps, const PatchGeometry& g);

// "add" sums a learned positional vector onto each embedded token; "append"
// concatenates a learned positional vector to each flattened patch before
// the linear projection.
enum class PosMode { add, append };

PosMode parse_pos_mode(const std::string& s);
std::string to_string(PosMode m);

struct ModelShape {
  std::size_t bands = 128;
  std::size_t steps = 60;
  PatchGeometry geometry;
  std::size_t d_model = 16;
  std::size_t n_heads = 2;
  std::size_t n_layers = 2;
  std::size_t d_ff = 32;
  PosMode pos_mode = PosMode::add;

  PatchGrid grid() const { return patch_grid(bands, steps, geometry); }
  std::size_t n_patches() const { return grid().count(); }
  std::size_t n_tokens() const { return n_patches() + 1; }
  std::size_t patch_dim() const { return geometry.patch_h * geometry.patch_w; }
  std::size_t embed_in() const { return patch_dim() + (pos_mode == PosMode::append ? d_model : 0); }
  std::size_t d_head() const { return d_model / n_heads; }
};

void validate(const ModelShape& s);

struct LayerOffsets {
  std::size_t wq, wk, wv, wo;          // d x d; head h owns columns [h*dk, (h+1)*dk)
  std::size_t ln1_gain, ln1_bias;      // d
  std::size_t w1, b1;                  // d x d_ff, d_ff
  std::size_t w2, b2;                  // d_ff x d, d
  std::size_t ln2_gain, ln2_bias;      // d
};

struct Layout {
  std::size_t embed_w = 0;  // embed_in x d
  std::size_t embed_b = 0;  // d
  std::size_t pos = 0;      // add: n_tokens x d; append: n_patches x d
  std::size_t cls = 0;      // d
  std::vector<LayerOffsets> layers;
  std::size_t head_w = 0;   // d x 2
  std::size_t head_b = 0;   // 2
  std::size_t total = 0;

  static Layout for_shape(const ModelShape& s);
};

// Every trainable tensor lives in one flat vector; the layout maps names to
// row-major slices of it.
struct EncoderParams {
  ModelShape shape;
  Layout layout;
  std::vector<double> values;
  // Spectrogram cells are mapped to (x - input_mean) / input_scale before
  // patching. Not trained. With center_per_clip the clip's own mean is
  // subtracted first, which removes absolute level.
  double input_mean = 0.0;
  double input_scale = 1.0;
  bool center_per_clip = false;
  // Opaque front-end description (mel settings, clip length) kept with the
  // weights so callers can rebuild matching inputs.
  nlohmann::json frontend = nlohmann::json::object();

  static EncoderParams init(const ModelShape& shape, std::uint64_t seed);

  double* at(std::size_t offset) { return values.data() + offset; }
  const double* at(std::size_t offset) const { return values.data() + offset; }
};

struct TensorInfo {
  std::string name;
  std::size_t offset;
  std::size_t rows;
  std::size_t cols;
};

std::vector<TensorInfo> tensor_table(const ModelShape& s);

struct TimeSpan {
  double start_ms = 0.0;
  double end_ms = 0.0;
};

// Flattened (normalised) patches in row-major grid order, one row per patch.
struct Patches {
  Matrix flat;  // n_patches x (patch_h * patch_w)
  PatchGrid grid;
  std::vector<TimeSpan> spans;
};

Patches extract_patches(const Matrix& spec, double hop_ms, const PatchGeometry& g,
                        double input_mean = 0.0, double input_scale = 1.0);

struct PatchSequence {
  Matrix tokens;  // (N+1) x d_model; row 0 is CLS
  PatchGeometry geometry;
  std::vector<TimeSpan> token_time_spans;  // one per patch token, CLS excluded
};

// Offset subtracted from every cell of spec before scaling.
double input_offset(const Matrix& spec, const EncoderParams& params);

PatchSequence patchify(const dsp::MelSpectrogram& spec, const EncoderParams& params);

struct AttentionResult {
  Matrix output;
  Matrix weights;  // row-stochastic
};

// softmax(Q K^T / sqrt(d_k)) V with d_k = K.cols().
AttentionResult attention(const Matrix& q, const Matrix& k, const Matrix& v);

// [layer][head] attention matrices of one forward pass.
struct AttentionRecord {
  std::vector<std::vector<Matrix>> layers;

  std::size_t n_layers() const { return layers.size(); }
};

// Concat(head_1..head_h) W_O for layer `layer`.
Matrix multi_head(const Matrix& x, const EncoderParams& p, std::size_t layer,
                  std::vector<Matrix>* head_weights = nullptr);

// Post-norm layer: LN(X + MHA(X)) followed by LN(. + FFN(.)).
Matrix encoder_layer(const Matrix& x, const EncoderParams& p, std::size_t layer,
                     std::vector<Matrix>* head_weights = nullptr);

// Per-row normalisation to zero mean and unit variance, then gain and bias.
Matrix layer_norm(const Matrix& x, std::span<const double> gain, std::span<const double> bias);

inline constexpr double kLayerNormEps = 1e-9;

// Runs every encoder layer over a token matrix.
Matrix encode(const Matrix& tokens, const EncoderParams& p, AttentionRecord* record = nullptr);

struct ForwardOutput {
  std::array<double, 2> logits{};  // bonafide, spoof
  double prob_spoof = 0.0;
  AttentionRecord attention;
  std::vector<double> cls_final;
};

ForwardOutput forward_tokens(const Matrix& tokens, const EncoderParams& p);
ForwardOutput forward(const dsp::MelSpectrogram& spec, const EncoderParams& p);
ForwardOutput forward(const Matrix& spec_values, double hop_ms, const EncoderParams& p);

struct Example {
  Matrix spec;  // bands x steps, raw log-Mel values
  int label = 0;
};

// Mean cross-entropy over the examples and its gradient w.r.t. every
// parameter. The parallel version computes per-example gradients
// concurrently and sums them in example order, matching the serial
// reference bit for bit.
struct BatchGradient {
  double loss = 0.0;
  std::size_t correct = 0;
  std::vector<double> grad;
};

BatchGradient batch_gradient(const EncoderParams& p, std::span<const Example> batch);

namespace serial {
BatchGradient batch_gradient(const EncoderParams& p, std::span<const Example> batch);
}  // namespace serial

double batch_loss(const EncoderParams& p, std::span<const Example> batch);

struct TrainConfig {
  ModelShape shape;
  int steps = 500;
  double learning_rate = 1e-2;  // Adam step size
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;    // decoupled, AdamW style
  double warmup_ratio = 0.0;
  bool center_per_clip = true;
  std::uint64_t seed = 0;
};

struct CurvePoint {
  int step = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainResult {
  EncoderParams params;
  std::vector<CurvePoint> curve;
};

// Full-batch Adam(W) on cross-entropy. The input normalisation constants are
// taken from the training spectrograms. Throws TrainingError on divergence.
TrainResult train_toy(std::span<const Example> data, const TrainConfig& cfg);

// One optimisation run starting from given parameters (used by tests).
TrainResult train_from(EncoderParams start, std::span<const Example> data, const TrainConfig& cfg);

std::string curve_csv(std::span<const CurvePoint> curve);

void save(const EncoderParams& p, const std::filesystem::path& path,
          const nlohmann::json& meta = nlohmann::json::object());
EncoderParams load(const std::filesystem::path& path);

}  // namespace spoofscope::transformer
