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

#include "spoofscope/attn_explain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numeric>
#include <sstream>

#include "spoofscope/artifact.hpp"
#include "spoofscope/errors.hpp"

namespace spoofscope::attn_explain {

namespace {

Matrix occluded(const Matrix& spec, const OcclusionConfig& cfg, const BoxDelta& b) {
  Matrix x = spec;
  for (std::size_t i = b.row; i < b.row + b.height; ++i) {
    for (std::size_t j = b.col; j < b.col + b.width; ++j) {
      switch (cfg.fill) {
        case Fill::zero: x(i, j) = 0.0; break;
        case Fill::one: x(i, j) = 1.0; break;
        case Fill::dataset_mean: x(i, j) = cfg.mean_values(i, j); break;
      }
    }
  }
  return x;
}

std::vector<std::size_t> evaluation_order(std::size_t n, std::span<const std::size_t> scan_order) {
  if (scan_order.empty()) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    return order;
  }
  if (scan_order.size() != n) throw InputError("scan order must list every box exactly once");
  std::vector<char> seen(n, 0);
  for (std::size_t i : scan_order) {
    if (i >= n || seen[i]) throw InputError("scan order must list every box exactly once");
    seen[i] = 1;
  }
  return {scan_order.begin(), scan_order.end()};
}

OcclusionHeatmap aggregate(const Matrix& spec, double base, std::vector<BoxDelta> boxes) {
  OcclusionHeatmap h;
  h.base_prob = base;
  h.importance = Matrix(spec.rows(), spec.cols());
  Matrix count(spec.rows(), spec.cols());
  for (const auto& b : boxes) {
    for (std::size_t i = b.row; i < b.row + b.height; ++i) {
      for (std::size_t j = b.col; j < b.col + b.width; ++j) {
        h.importance(i, j) += b.delta;
        count(i, j) += 1.0;
      }
    }
  }
  for (std::size_t k = 0; k < h.importance.size(); ++k) {
    if (count.values()[k] > 0.0) h.importance.values()[k] /= count.values()[k];
  }
  h.boxes = std::move(boxes);
  return h;
}

void check_prob(double p) {
  if (!std::isfinite(p)) throw InputError("model returned a non-finite probability");
}

void check_row_stochastic(const Matrix& a, std::size_t layer) {
  if (a.rows() != a.cols() || a.rows() == 0) throw InputError("attention maps must be square");
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (double v : a.row(i)) {
      if (!std::isfinite(v) || v < 0.0) throw InputError("attention weights must be finite and non-negative");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-4) {
      throw InputError("attention map of layer " + std::to_string(layer) + " is not row-stochastic (row " +
                       std::to_string(i) + " sums to " + std::to_string(s) + ")");
    }
  }
}

void normalise_rows(Matrix& a) {
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto row = a.row(i);
    double s = 0.0;
    for (double v : row) s += v;
    if (s > 0.0)
      for (double& v : row) v /= s;
  }
}

}  // namespace

Fill parse_fill(const std::string& s) {
  if (s == "zero") return Fill::zero;
  if (s == "one") return Fill::one;
  if (s == "mean" || s == "dataset-mean") return Fill::dataset_mean;
  throw UsageError("unknown fill: " + s + " (expected zero, one or mean)");
}

std::string to_string(Fill f) {
  switch (f) {
    case Fill::zero: return "zero";
    case Fill::one: return "one";
    case Fill::dataset_mean: return "mean";
  }
  return "zero";
}

OcclusionConfig default_occlusion(std::size_t bands, std::size_t steps) {
  OcclusionConfig c;
  c.box_h = std::max<std::size_t>(1, bands / 4);
  c.box_w = std::max<std::size_t>(1, steps / 4);
  c.stride_h = std::max<std::size_t>(1, c.box_h / 2);
  c.stride_w = std::max<std::size_t>(1, c.box_w / 2);
  return c;
}

void validate(const OcclusionConfig& cfg, std::size_t bands, std::size_t steps) {
  if (cfg.box_h == 0 || cfg.box_w == 0 || cfg.stride_h == 0 || cfg.stride_w == 0) {
    throw InputError("occlusion box and stride must be positive");
  }
  if (cfg.box_h > bands || cfg.box_w > steps) {
    throw InputError("occlusion box " + std::to_string(cfg.box_h) + "x" + std::to_string(cfg.box_w) +
                     " does not fit a " + std::to_string(bands) + "x" + std::to_string(steps) +
                     " spectrogram (bands x steps); pass a smaller --box");
  }
  if (cfg.fill == Fill::dataset_mean && (cfg.mean_values.rows() != bands || cfg.mean_values.cols() != steps)) {
    throw InputError("mean fill needs a mean spectrogram of the input's shape");
  }
}

Matrix dataset_mean(std::span<const Matrix> specs) {
  if (specs.empty()) throw InputError("dataset_mean: no spectrograms");
  Matrix m(specs[0].rows(), specs[0].cols());
  for (const auto& s : specs) {
    if (s.rows() != m.rows() || s.cols() != m.cols()) throw InputError("dataset_mean: shape mismatch");
    for (std::size_t k = 0; k < m.size(); ++k) m.values()[k] += s.values()[k];
  }
  for (double& v : m.values()) v /= static_cast<double>(specs.size());
  return m;
}

std::vector<BoxDelta> box_positions(std::size_t bands, std::size_t steps, const OcclusionConfig& cfg) {
  validate(cfg, bands, steps);
  std::vector<BoxDelta> out;
  for (std::size_t r = 0; r + cfg.box_h <= bands; r += cfg.stride_h) {
    for (std::size_t c = 0; c + cfg.box_w <= steps; c += cfg.stride_w) {
      BoxDelta b;
      b.row = r;
      b.col = c;
      b.height = cfg.box_h;
      b.width = cfg.box_w;
      out.push_back(b);
    }
  }
  return out;
}

OcclusionHeatmap occlusion_scan(const ProbabilityFn& f, const Matrix& spec, const OcclusionConfig& cfg,
                                std::span<const std::size_t> scan_order) {
  auto boxes = box_positions(spec.rows(), spec.cols(), cfg);
  const auto order = evaluation_order(boxes.size(), scan_order);
  const double base = f(spec);
  check_prob(base);
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < static_cast<long>(order.size()); ++k) {
    auto& b = boxes[order[static_cast<std::size_t>(k)]];
    try {
      b.prob = f(occluded(spec, cfg, b));
      check_prob(b.prob);
      b.delta = std::abs(base - b.prob);
    } catch (...) {
#pragma omp critical(spoofscope_occlusion)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return aggregate(spec, base, std::move(boxes));
}

namespace serial {

OcclusionHeatmap occlusion_scan(const ProbabilityFn& f, const Matrix& spec, const OcclusionConfig& cfg,
                                std::span<const std::size_t> scan_order) {
  auto boxes = box_positions(spec.rows(), spec.cols(), cfg);
  const auto order = evaluation_order(boxes.size(), scan_order);
  const double base = f(spec);
  check_prob(base);
  for (std::size_t k : order) {
    auto& b = boxes[k];
    b.prob = f(occluded(spec, cfg, b));
    check_prob(b.prob);
    b.delta = std::abs(base - b.prob);
  }
  return aggregate(spec, base, std::move(boxes));
}

}  // namespace serial

HeadFusion parse_head_fusion(const std::string& s) {
  if (s == "mean") return HeadFusion::mean;
  if (s == "max") return HeadFusion::max;
  throw UsageError("unknown head fusion: " + s);
}

std::vector<Matrix> layer_attention_maps(const transformer::AttentionRecord& record, HeadFusion fusion) {
  if (record.layers.empty()) throw InputError("attention record is empty");
  std::vector<Matrix> maps;
  for (const auto& heads : record.layers) {
    if (heads.empty()) throw InputError("attention record has a layer without heads");
    Matrix m = heads[0];
    for (std::size_t h = 1; h < heads.size(); ++h) {
      if (heads[h].rows() != m.rows() || heads[h].cols() != m.cols()) {
        throw InputError("attention heads differ in shape");
      }
      for (std::size_t k = 0; k < m.size(); ++k) {
        m.values()[k] = fusion == HeadFusion::mean ? m.values()[k] + heads[h].values()[k]
                                                   : std::max(m.values()[k], heads[h].values()[k]);
      }
    }
    if (fusion == HeadFusion::mean) {
      for (double& v : m.values()) v /= static_cast<double>(heads.size());
    } else {
      normalise_rows(m);
    }
    maps.push_back(std::move(m));
  }
  return maps;
}

RolloutMode parse_rollout_mode(const std::string& s) {
  if (s == "plain") return RolloutMode::plain;
  if (s == "residual" || s == "residual_half") return RolloutMode::residual_half;
  throw UsageError("unknown rollout mode: " + s + " (expected plain or residual)");
}

std::string to_string(RolloutMode m) { return m == RolloutMode::plain ? "plain" : "residual"; }

std::vector<double> cls_importance(const Matrix& w, bool* fallback) {
  if (w.rows() < 2 || w.cols() != w.rows()) throw InputError("rollout matrix must be square with N >= 1");
  std::vector<double> imp(w.row(0).begin() + 1, w.row(0).end());
  const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
  const bool empty = !(total > 0.0);
  if (empty) {
    std::fill(imp.begin(), imp.end(), 1.0 / static_cast<double>(imp.size()));
  } else {
    for (double& v : imp) v /= total;
  }
  if (fallback) *fallback = empty;
  return imp;
}

RolloutMap rollout_maps(std::span<const Matrix> maps, RolloutMode mode) {
  if (maps.empty()) throw InputError("rollout needs at least one layer");
  RolloutMap out;
  for (std::size_t l = 0; l < maps.size(); ++l) {
    check_row_stochastic(maps[l], l);
    if (maps[l].rows() != maps[0].rows()) throw InputError("attention maps differ in size");
    Matrix a = maps[l];
    if (mode == RolloutMode::residual_half) {
      for (double& v : a.values()) v *= 0.5;
      for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += 0.5;
      normalise_rows(a);
    }
    out.weights = l == 0 ? std::move(a) : matmul(out.weights, a);
  }
  out.cls_importance = cls_importance(out.weights, &out.uniform_fallback);
  return out;
}

RolloutMap rollout(const transformer::AttentionRecord& record, RolloutMode mode, HeadFusion fusion) {
  const auto maps = layer_attention_maps(record, fusion);
  return rollout_maps(maps, mode);
}

RolloutMap last_layer(const transformer::AttentionRecord& record, HeadFusion fusion) {
  const auto maps = layer_attention_maps(record, fusion);
  return rollout_maps(std::span<const Matrix>(&maps.back(), 1), RolloutMode::plain);
}

double percentile(std::span<const double> values, double q) {
  if (values.empty()) throw InputError("percentile of an empty sequence");
  if (!(q >= 0.0 && q <= 100.0)) throw InputError("percentile must be within [0, 100]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Timeline cls_timeline(const RolloutMap& map, double q) {
  const auto& imp = map.cls_importance;
  if (map.token_time_spans.size() != imp.size()) {
    throw InputError("timeline needs one time span per patch token");
  }
  Timeline t;
  t.threshold = percentile(imp, q);
  std::vector<Segment> picked;
  for (std::size_t i = 0; i < imp.size(); ++i) {
    if (imp[i] > t.threshold) {
      picked.push_back({map.token_time_spans[i].start_ms, map.token_time_spans[i].end_ms, imp[i]});
    }
  }
  std::stable_sort(picked.begin(), picked.end(), [](const Segment& a, const Segment& b) {
    return a.start_ms < b.start_ms || (a.start_ms == b.start_ms && a.end_ms < b.end_ms);
  });
  for (const auto& s : picked) {
    if (!t.segments.empty() && s.start_ms <= t.segments.back().end_ms) {
      auto& last = t.segments.back();
      last.end_ms = std::max(last.end_ms, s.end_ms);
      last.importance += s.importance;
    } else {
      t.segments.push_back(s);
    }
  }
  t.no_salient_region = t.segments.empty();
  return t;
}

nlohmann::json to_json(const Timeline& t) {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : t.segments) {
    segs.push_back({{"start_ms", s.start_ms}, {"end_ms", s.end_ms}, {"importance", s.importance}});
  }
  nlohmann::json j = {{"threshold", t.threshold}, {"segments", segs}};
  if (t.no_salient_region) j["flag"] = "no salient region";
  return j;
}

nlohmann::json to_json(const OcclusionHeatmap& h) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const auto& b : h.boxes) {
    boxes.push_back({{"row", b.row}, {"col", b.col}, {"height", b.height}, {"width", b.width},
                     {"prob", b.prob}, {"delta", b.delta}});
  }
  return {{"base_prob", h.base_prob},
          {"shape", {h.importance.rows(), h.importance.cols()}},
          {"boxes", boxes}};
}

std::vector<std::uint8_t> pixel_values(const Matrix& m) {
  if (m.empty()) throw InputError("cannot render an empty matrix");
  for (double v : m.values()) {
    if (!std::isfinite(v)) throw InputError("cannot render a matrix with non-finite values");
  }
  const auto [lo_it, hi_it] = std::minmax_element(m.values().begin(), m.values().end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<std::uint8_t> px(m.size(), 128);
  if (hi > lo) {
    for (std::size_t k = 0; k < m.size(); ++k) {
      const double scaled = (m.values()[k] - lo) / (hi - lo) * 255.0;
      px[k] = static_cast<std::uint8_t>(std::min(255.0, std::floor(scaled + 0.5)));
    }
  }
  return px;
}

std::string pgm_bytes(const Matrix& m, const std::vector<std::string>& comments) {
  const auto px = pixel_values(m);
  std::string out = "P5\n";
  for (const auto& c : comments) out += "# " + c + "\n";
  out += std::to_string(m.cols()) + " " + std::to_string(m.rows()) + "\n255\n";
  out.append(px.begin(), px.end());
  return out;
}

std::string matrix_csv(const Matrix& m, const std::vector<std::string>& comments) {
  std::string out;
  for (const auto& c : comments) out += "# " + c + "\n";
  char buf[40];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      if (j) out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void render_heatmap(const Matrix& m, const std::filesystem::path& pgm_path, const std::filesystem::path& csv_path,
                    const std::vector<std::string>& comments) {
  artifact::write_text(pgm_path, pgm_bytes(m, comments));
  artifact::write_text(csv_path, matrix_csv(m, comments));
}

}  // namespace spoofscope::attn_explain
