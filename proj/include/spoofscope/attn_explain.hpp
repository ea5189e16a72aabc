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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "spoofscope/matrix.hpp"
#include "spoofscope/transformer.hpp"

namespace spoofscope::attn_explain {

enum class Fill { zero, one, dataset_mean };

Fill parse_fill(const std::string& s);  // "zero", "one", "mean"
std::string to_string(Fill f);

struct OcclusionConfig {
  std::size_t box_h = 0;     // frequency bins
  std::size_t box_w = 0;     // time steps
  std::size_t stride_h = 0;
  std::size_t stride_w = 0;
  Fill fill = Fill::zero;
  Matrix mean_values;        // required for Fill::dataset_mean, same shape as the input
};

// Quarter of each dimension (at least 1), stride half the box (at least 1).
OcclusionConfig default_occlusion(std::size_t bands, std::size_t steps);

// Throws InputError when sizes are zero or the box does not fit.
void validate(const OcclusionConfig& cfg, std::size_t bands, std::size_t steps);

// Elementwise mean of equally shaped matrices.
Matrix dataset_mean(std::span<const Matrix> specs);

struct BoxDelta {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  double prob = 0.0;   // prediction with this box occluded
  double delta = 0.0;  // |base - prob|
};

struct OcclusionHeatmap {
  Matrix importance;  // per cell mean of the deltas of every covering box
  double base_prob = 0.0;
  std::vector<BoxDelta> boxes;  // row-major by stride
};

// Probability of the spoof class for one spectrogram. Must be safe to call
// concurrently.
using ProbabilityFn = std::function<double(const Matrix&)>;

// Box origins in row-major order.
std::vector<BoxDelta> box_positions(std::size_t bands, std::size_t steps, const OcclusionConfig& cfg);

// scan_order, when given, is a permutation of box indices controlling the
// evaluation order. The result does not depend on it.
OcclusionHeatmap occlusion_scan(const ProbabilityFn& f, const Matrix& spec, const OcclusionConfig& cfg,
                                std::span<const std::size_t> scan_order = {});

namespace serial {
OcclusionHeatmap occlusion_scan(const ProbabilityFn& f, const Matrix& spec, const OcclusionConfig& cfg,
                                std::span<const std::size_t> scan_order = {});
}  // namespace serial

enum class HeadFusion { mean, max };

HeadFusion parse_head_fusion(const std::string& s);

// One fused matrix per layer. Max fusion renormalises rows.
std::vector<Matrix> layer_attention_maps(const transformer::AttentionRecord& record,
                                         HeadFusion fusion = HeadFusion::mean);

enum class RolloutMode { plain, residual_half };

RolloutMode parse_rollout_mode(const std::string& s);  // "plain", "residual"
std::string to_string(RolloutMode m);

struct RolloutMap {
  Matrix weights;                      // (N+1) x (N+1)
  std::vector<double> cls_importance;  // length N, sums to 1
  bool uniform_fallback = false;       // CLS row carried no mass on the patch tokens
  std::vector<transformer::TimeSpan> token_time_spans;
};

// Row 0 of w over columns 1..N, renormalised. Falls back to uniform when the
// mass is zero.
std::vector<double> cls_importance(const Matrix& w, bool* fallback = nullptr);

// W = A_1 A_2 ... A_L. Throws InputError if a row of any map strays from 1
// by more than 1e-4.
RolloutMap rollout_maps(std::span<const Matrix> maps, RolloutMode mode = RolloutMode::plain);

RolloutMap rollout(const transformer::AttentionRecord& record, RolloutMode mode = RolloutMode::plain,
                   HeadFusion fusion = HeadFusion::mean);

// CLS attention of the final layer only.
RolloutMap last_layer(const transformer::AttentionRecord& record, HeadFusion fusion = HeadFusion::mean);

struct Segment {
  double start_ms = 0.0;
  double end_ms = 0.0;
  double importance = 0.0;
};

struct Timeline {
  std::vector<Segment> segments;
  double threshold = 0.0;
  bool no_salient_region = false;
};

// Linear interpolation between closest ranks, q in [0, 100].
double percentile(std::span<const double> values, double q);

// Tokens strictly above the q-th percentile; their spans are merged when they
// overlap or touch, summing importance.
Timeline cls_timeline(const RolloutMap& map, double q = 90.0);

nlohmann::json to_json(const Timeline& t);
nlohmann::json to_json(const OcclusionHeatmap& h);

// Min-max scaled to 0..255 with round half up. A constant matrix maps to 128.
std::vector<std::uint8_t> pixel_values(const Matrix& m);

// Binary PGM (P5), one image row per matrix row. Comment lines carry meta.
std::string pgm_bytes(const Matrix& m, const std::vector<std::string>& comments = {});
std::string matrix_csv(const Matrix& m, const std::vector<std::string>& comments = {});

void render_heatmap(const Matrix& m, const std::filesystem::path& pgm_path,
                    const std::filesystem::path& csv_path, const std::vector<std::string>& comments = {});

}  // namespace spoofscope::attn_explain
