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

#include <cmath>
#include <filesystem>
#include <fstream>

#include "spoofscope/errors.hpp"
#include "spoofscope/rng.hpp"
#include "spoofscope/transformer.hpp"

using namespace spoofscope;
using namespace spoofscope::transformer;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, SplitMix64& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

// Row-major product with the sum taken in index order.
Matrix naive_mul(const Matrix& a, const double* b, std::size_t n) {
  Matrix c(a.rows(), n);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b[k * n + j];
      c(i, j) = s;
    }
  return c;
}

Matrix naive_attention(const Matrix& q, const Matrix& k, const Matrix& v) {
  const std::size_t n = q.rows(), m = k.rows();
  Matrix w(n, m), out(n, v.cols());
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -1e300;
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < q.cols(); ++t) s += q(i, t) * k(j, t);
      w(i, j) = s / std::sqrt(static_cast<double>(q.cols()));
      mx = std::max(mx, w(i, j));
    }
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) z += (w(i, j) = std::exp(w(i, j) - mx));
    for (std::size_t j = 0; j < m; ++j) w(i, j) /= z;
    for (std::size_t c = 0; c < v.cols(); ++c)
      for (std::size_t j = 0; j < m; ++j) out(i, c) += w(i, j) * v(j, c);
  }
  return out;
}

Matrix naive_layer_norm(const Matrix& x, const double* gain, const double* bias) {
  Matrix y(x.rows(), x.cols());
  const double d = static_cast<double>(x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mean = 0.0, var = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) mean += x(i, j) / d;
    for (std::size_t j = 0; j < x.cols(); ++j) var += (x(i, j) - mean) * (x(i, j) - mean) / d;
    for (std::size_t j = 0; j < x.cols(); ++j)
      y(i, j) = gain[j] * (x(i, j) - mean) / std::sqrt(var + kLayerNormEps) + bias[j];
  }
  return y;
}

Matrix columns(const Matrix& m, std::size_t from, std::size_t count) {
  Matrix out(m.rows(), count);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = m(i, from + j);
  return out;
}

Matrix multi_head_oracle(const Matrix& x, const EncoderParams& p, std::size_t layer) {
  const auto& o = p.layout.layers[layer];
  const std::size_t d = p.shape.d_model, dk = p.shape.d_head();
  const Matrix q = naive_mul(x, p.at(o.wq), d), k = naive_mul(x, p.at(o.wk), d),
               v = naive_mul(x, p.at(o.wv), d);
  Matrix concat(x.rows(), d);
  for (std::size_t h = 0; h < p.shape.n_heads; ++h) {
    const Matrix out = naive_attention(columns(q, h * dk, dk), columns(k, h * dk, dk), columns(v, h * dk, dk));
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < dk; ++j) concat(i, h * dk + j) = out(i, j);
  }
  return naive_mul(concat, p.at(o.wo), d);
}

Matrix layer_oracle(const Matrix& x, const EncoderParams& p, std::size_t layer) {
  const auto& o = p.layout.layers[layer];
  const std::size_t d = p.shape.d_model, f = p.shape.d_ff;
  Matrix r1 = multi_head_oracle(x, p, layer);
  for (std::size_t i = 0; i < r1.size(); ++i) r1.values()[i] += x.values()[i];
  const Matrix y1 = naive_layer_norm(r1, p.at(o.ln1_gain), p.at(o.ln1_bias));
  Matrix h = naive_mul(y1, p.at(o.w1), f);
  for (std::size_t i = 0; i < h.rows(); ++i)
    for (std::size_t j = 0; j < f; ++j) h(i, j) = std::max(0.0, h(i, j) + p.at(o.b1)[j]);
  Matrix r2 = naive_mul(h, p.at(o.w2), d);
  for (std::size_t i = 0; i < r2.rows(); ++i)
    for (std::size_t j = 0; j < d; ++j) r2(i, j) += p.at(o.b2)[j] + y1(i, j);
  return naive_layer_norm(r2, p.at(o.ln2_gain), p.at(o.ln2_bias));
}

ModelShape small_shape(std::size_t d = 8, std::size_t heads = 2, std::size_t layers = 2) {
  ModelShape s;
  s.bands = 16;
  s.steps = 12;
  s.geometry = {4, 4, 4, 4};
  s.d_model = d;
  s.n_heads = heads;
  s.n_layers = layers;
  s.d_ff = 2 * d;
  return s;
}

// Every parameter drawn at random, gains and biases included.
EncoderParams random_params(const ModelShape& s, std::uint64_t seed, double scale = 0.4) {
  auto p = EncoderParams::init(s, seed);
  SplitMix64 rng(seed ^ 0x5eed);
  for (double& v : p.values) v += scale * rng.normal();
  return p;
}

void fill(EncoderParams& p, std::size_t offset, std::size_t count, double value) {
  std::fill_n(p.at(offset), count, value);
}

}  // namespace

TEST(Patches, PaperGridCount) {
  EXPECT_EQ(patch_grid(128, 60, {16, 16, 16, 16}).count(), 24u);
  EXPECT_EQ(patch_grid(128, 60, {16, 16, 16, 16}).rows, 8u);
  EXPECT_EQ(patch_grid(128, 60, {16, 16, 10, 10}).count(), 12u * 5u);
  EXPECT_EQ(patch_grid(128, 60, {128, 60, 1, 1}).count(), 1u);
  EXPECT_THROW(patch_grid(10, 60, {16, 16, 16, 16}), InputError);
}

TEST(Patches, CountMatchesSlidingWindowOracle) {
  SplitMix64 rng(1);
  for (int t = 0; t < 100; ++t) {
    const PatchGeometry g{1 + rng.below(20), 1 + rng.below(20), 1 + rng.below(12), 1 + rng.below(12)};
    const std::size_t h = g.patch_h + rng.below(100), w = g.patch_w + rng.below(60);
    std::size_t rows = 0, cols = 0;
    for (std::size_t r = 0; r + g.patch_h <= h; r += g.stride_h) ++rows;
    for (std::size_t c = 0; c + g.patch_w <= w; c += g.stride_w) ++cols;
    EXPECT_EQ(patch_grid(h, w, g).count(), rows * cols);
    const PatchGeometry half{g.patch_h, g.patch_w, std::max<std::size_t>(1, g.stride_h / 2),
                             std::max<std::size_t>(1, g.stride_w / 2)};
    EXPECT_GE(patch_grid(h, w, half).count(), rows * cols);
  }
  EXPECT_GT(patch_grid(128, 60, {16, 16, 8, 8}).count(), patch_grid(128, 60, {16, 16, 16, 16}).count());
}

TEST(Patches, ExtractionIsRowMajorWithTimeSpans) {
  Matrix spec(8, 6);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 6; ++j) spec(i, j) = 10.0 * i + j;
  const auto p = extract_patches(spec, 100.0, {4, 2, 4, 2});
  ASSERT_EQ(p.grid.rows, 2u);
  ASSERT_EQ(p.grid.cols, 3u);
  EXPECT_EQ(p.flat(1, 0), spec(0, 2));
  EXPECT_EQ(p.flat(3, 0), spec(4, 0));
  EXPECT_EQ(p.flat(5, 7), spec(7, 5));
  EXPECT_EQ(p.spans[1].start_ms, 200.0);
  EXPECT_EQ(p.spans[1].end_ms, 400.0);
  for (std::size_t k = 1; k < 3; ++k) EXPECT_GT(p.spans[k].start_ms, p.spans[k - 1].start_ms);
}

TEST(Patches, SequenceHasClsFirst) {
  const auto s = small_shape();
  const auto p = EncoderParams::init(s, 3);
  dsp::MelSpectrogram spec;
  SplitMix64 rng(4);
  spec.values = random_matrix(16, 12, rng);
  spec.hop_ms = 100.0;
  const auto seq = patchify(spec, p);
  EXPECT_EQ(seq.tokens.rows(), s.n_tokens());
  EXPECT_EQ(seq.token_time_spans.size(), s.n_patches());
  for (std::size_t j = 0; j < s.d_model; ++j)
    EXPECT_EQ(seq.tokens(0, j), p.at(p.layout.cls)[j] + p.at(p.layout.pos)[j]);
  spec.values = Matrix(16, 10);
  EXPECT_THROW(patchify(spec, p), InputError);
}

TEST(Attention, OneHotLimit) {
  Matrix k = Matrix::identity(4), v(4, 3);
  SplitMix64 rng(5);
  for (double& x : v.values()) x = rng.normal();
  Matrix q(1, 4);
  q(0, 2) = 1e4;
  const auto r = attention(q, k, v);
  EXPECT_NEAR(r.weights(0, 2), 1.0, 1e-12);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(r.output(0, c), v(2, c), 1e-9);
}

TEST(Attention, ZeroQueryIsUniform) {
  SplitMix64 rng(6);
  const Matrix k = random_matrix(5, 4, rng), v = random_matrix(5, 3, rng);
  const auto r = attention(Matrix(2, 4), k, v);
  for (double w : r.weights.values()) EXPECT_NEAR(w, 0.2, 1e-15);
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0.0;
    for (std::size_t j = 0; j < 5; ++j) mean += v(j, c) / 5.0;
    EXPECT_NEAR(r.output(0, c), mean, 1e-12);
  }
}

TEST(Attention, MatchesNaiveOracle) {
  SplitMix64 rng(7);
  for (int t = 0; t < 20; ++t) {
    const Matrix q = random_matrix(5, 4, rng), k = random_matrix(5, 4, rng), v = random_matrix(5, 6, rng);
    const auto r = attention(q, k, v);
    const auto ref = naive_attention(q, k, v);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(r.output.values()[i], ref.values()[i], 1e-9);
    for (std::size_t i = 0; i < 5; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 5; ++j) s += r.weights(i, j);
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
  EXPECT_THROW(attention(Matrix(2, 3), Matrix(2, 4), Matrix(2, 4)), InputError);
}

TEST(MultiHead, SingleHeadWithIdentityProjection) {
  auto s = small_shape(6, 1, 1);
  auto p = random_params(s, 8);
  const auto& o = p.layout.layers[0];
  const Matrix eye = Matrix::identity(6);
  std::copy(eye.values().begin(), eye.values().end(), p.at(o.wo));
  SplitMix64 rng(9);
  const Matrix x = random_matrix(5, 6, rng);
  const auto ref = attention(naive_mul(x, p.at(o.wq), 6), naive_mul(x, p.at(o.wk), 6), naive_mul(x, p.at(o.wv), 6));
  EXPECT_TRUE(multi_head(x, p, 0) == ref.output);
}

TEST(MultiHead, ZeroedSecondHeadPadsFirst) {
  auto s = small_shape(8, 2, 1);
  auto p = random_params(s, 10);
  const auto& o = p.layout.layers[0];
  // Zero the columns of the second head in the value projection.
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 4; c < 8; ++c) p.at(o.wv)[r * 8 + c] = 0.0;
  const Matrix eye = Matrix::identity(8);
  std::copy(eye.values().begin(), eye.values().end(), p.at(o.wo));
  SplitMix64 rng(11);
  const Matrix x = random_matrix(6, 8, rng);
  const Matrix out = multi_head(x, p, 0);
  const Matrix q = naive_mul(x, p.at(o.wq), 8), k = naive_mul(x, p.at(o.wk), 8), v = naive_mul(x, p.at(o.wv), 8);
  const auto head1 = attention(columns(q, 0, 4), columns(k, 0, 4), columns(v, 0, 4));
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(out(i, j), head1.output(i, j));
    for (std::size_t j = 4; j < 8; ++j) EXPECT_EQ(out(i, j), 0.0);
  }
}

TEST(MultiHead, MatchesLoopPerHeadOracle) {
  for (std::size_t heads : {1u, 2u, 4u}) {
    auto s = small_shape(8, heads, 1);
    const auto p = random_params(s, 12 + heads);
    SplitMix64 rng(13);
    const Matrix x = random_matrix(7, 8, rng);
    std::vector<Matrix> w;
    const Matrix out = multi_head(x, p, 0, &w);
    const Matrix ref = multi_head_oracle(x, p, 0);
    ASSERT_EQ(w.size(), heads);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(out.values()[i], ref.values()[i], 1e-9);
  }
}

TEST(EncoderLayer, ZeroSubLayersNormaliseTokens) {
  auto s = small_shape(8, 2, 1);
  auto p = EncoderParams::init(s, 14);
  const auto& o = p.layout.layers[0];
  for (auto off : {o.wq, o.wk, o.wv, o.wo}) fill(p, off, 64, 0.0);
  fill(p, o.w1, 8 * 16, 0.0);
  fill(p, o.w2, 16 * 8, 0.0);
  SplitMix64 rng(15);
  const Matrix x = random_matrix(5, 8, rng, 3.0);
  const Matrix y = encoder_layer(x, p, 0);
  const std::vector<double> ones(8, 1.0), zeros(8, 0.0);
  const Matrix ln = layer_norm(x, ones, zeros);
  for (std::size_t i = 0; i < 5; ++i) {
    double mean = 0.0, var = 0.0;
    for (std::size_t j = 0; j < 8; ++j) mean += y(i, j) / 8.0;
    for (std::size_t j = 0; j < 8; ++j) var += (y(i, j) - mean) * (y(i, j) - mean) / 8.0;
    EXPECT_LE(std::abs(mean), 1e-6);
    EXPECT_NEAR(var, 1.0, 1e-6);
    for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(y(i, j), ln(i, j), 1e-6);
  }
}

TEST(EncoderLayer, ReluBlocksNegativePreActivations) {
  auto s = small_shape(8, 2, 1);
  s.d_ff = 8;
  auto p = random_params(s, 16);
  const auto& o = p.layout.layers[0];
  fill(p, o.w1, 64, 0.0);
  fill(p, o.b1, 8, -1.0);
  const Matrix eye = Matrix::identity(8);
  std::copy(eye.values().begin(), eye.values().end(), p.at(o.w2));
  fill(p, o.b2, 8, 0.0);
  SplitMix64 rng(17);
  const Matrix x = random_matrix(5, 8, rng);
  // With the FFN contributing nothing the second sub-layer is LN(y1).
  Matrix r1 = multi_head(x, p, 0);
  for (std::size_t i = 0; i < r1.size(); ++i) r1.values()[i] += x.values()[i];
  const Matrix y1 = naive_layer_norm(r1, p.at(o.ln1_gain), p.at(o.ln1_bias));
  const Matrix ref = naive_layer_norm(y1, p.at(o.ln2_gain), p.at(o.ln2_bias));
  const Matrix y = encoder_layer(x, p, 0);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.values()[i], ref.values()[i], 1e-9);
}

TEST(EncoderLayer, MatchesStageOracle) {
  for (std::uint64_t seed : {18u, 19u, 20u}) {
    const auto s = small_shape(8, 2, 2);
    const auto p = random_params(s, seed);
    SplitMix64 rng(seed);
    const Matrix x = random_matrix(9, 8, rng);
    for (std::size_t l = 0; l < 2; ++l) {
      const Matrix y = encoder_layer(x, p, l), ref = layer_oracle(x, p, l);
      for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.values()[i], ref.values()[i], 1e-8);
    }
  }
}

TEST(LayerNorm, PreAffineMoments) {
  SplitMix64 rng(21);
  const Matrix x = random_matrix(20, 16, rng, 5.0);
  const std::vector<double> ones(16, 1.0), zeros(16, 0.0);
  const Matrix y = layer_norm(x, ones, zeros);
  for (std::size_t i = 0; i < 20; ++i) {
    double mean = 0.0, var = 0.0;
    for (double v : y.row(i)) mean += v / 16.0;
    for (double v : y.row(i)) var += (v - mean) * (v - mean) / 16.0;
    EXPECT_LE(std::abs(mean), 1e-6);
    EXPECT_LE(std::abs(var - 1.0), 1e-5);
  }
}

TEST(Forward, ContractOnRandomFixtures) {
  SplitMix64 rng(22);
  for (int t = 0; t < 50; ++t) {
    auto s = small_shape(8, 1 + rng.below(2) * 1, 1 + rng.below(3));
    s.pos_mode = t % 2 ? PosMode::append : PosMode::add;
    const auto p = random_params(s, 100 + t);
    const auto out = forward(random_matrix(16, 12, rng, 2.0), 100.0, p);
    EXPECT_GT(out.prob_spoof, 0.0);
    EXPECT_LT(out.prob_spoof, 1.0);
    const double e0 = std::exp(out.logits[0]), e1 = std::exp(out.logits[1]);
    EXPECT_NEAR(out.prob_spoof, e1 / (e0 + e1), 1e-12);
    ASSERT_EQ(out.attention.n_layers(), s.n_layers);
    for (const auto& layer : out.attention.layers) {
      ASSERT_EQ(layer.size(), s.n_heads);
      for (const auto& a : layer) {
        ASSERT_EQ(a.rows(), s.n_tokens());
        for (std::size_t i = 0; i < a.rows(); ++i) {
          double sum = 0.0;
          for (double v : a.row(i)) {
            EXPECT_GE(v, 0.0);
            sum += v;
          }
          EXPECT_NEAR(sum, 1.0, 1e-6);
        }
      }
    }
  }
}

TEST(Forward, Deterministic) {
  const auto p = random_params(small_shape(), 23);
  SplitMix64 rng(24);
  const Matrix spec = random_matrix(16, 12, rng);
  const auto a = forward(spec, 100.0, p), b = forward(spec, 100.0, p);
  EXPECT_EQ(a.logits, b.logits);
  EXPECT_EQ(a.cls_final, b.cls_final);
}

TEST(Forward, SwappingPatchesWithTheirPositionsKeepsLogits) {
  const auto s = small_shape(8, 2, 2);  // 4x3 grid of non-overlapping patches
  auto p = random_params(s, 25);
  SplitMix64 rng(26);
  Matrix spec = random_matrix(16, 12, rng);
  const auto base = forward(spec, 100.0, p);

  // Swap grid cells 1 (row 0, col 1) and 7 (row 2, col 1), tokens 2 and 8.
  Matrix swapped = spec;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) std::swap(swapped(0 + i, 4 + j), swapped(8 + i, 4 + j));
  auto q = p;
  for (std::size_t j = 0; j < 8; ++j) std::swap(q.at(q.layout.pos)[2 * 8 + j], q.at(q.layout.pos)[8 * 8 + j]);
  const auto out = forward(swapped, 100.0, q);
  EXPECT_NEAR(out.logits[0], base.logits[0], 1e-12);
  EXPECT_NEAR(out.logits[1], base.logits[1], 1e-12);
}

TEST(Forward, EqualTokensGiveUniformAttention) {
  const auto p = random_params(small_shape(8, 2, 3), 27);
  Matrix tokens(13, 8);
  SplitMix64 rng(28);
  std::vector<double> row(8);
  for (double& v : row) v = rng.normal();
  for (std::size_t i = 0; i < 13; ++i) std::copy(row.begin(), row.end(), tokens.row(i).begin());
  const auto out = forward_tokens(tokens, p);
  for (const auto& layer : out.attention.layers)
    for (const auto& a : layer)
      for (double v : a.values()) EXPECT_NEAR(v, 1.0 / 13.0, 1e-6);
}

namespace {

ModelShape three_token_shape(PosMode mode) {
  ModelShape s;
  s.bands = 4;
  s.steps = 8;
  s.geometry = {4, 4, 4, 4};  // two patches, three tokens
  s.d_model = 4;
  s.n_heads = 2;
  s.n_layers = 2;
  s.d_ff = 6;
  s.pos_mode = mode;
  return s;
}

// Largest |analytic - central difference| / max(|a|, |n|, 1e-6) over every
// coordinate.
double worst_gradient_error(EncoderParams p, std::uint64_t data_seed) {
  SplitMix64 rng(data_seed);
  std::vector<Example> batch;
  for (int e = 0; e < 3; ++e) batch.push_back({random_matrix(4, 8, rng), e % 2});
  const auto g = batch_gradient(p, batch);
  EXPECT_NEAR(g.loss, batch_loss(p, batch), 1e-12);
  const double eps = 1e-4;
  double worst = 0.0;
  for (std::size_t k = 0; k < p.values.size(); ++k) {
    const double keep = p.values[k];
    p.values[k] = keep + eps;
    const double up = batch_loss(p, batch);
    p.values[k] = keep - eps;
    const double down = batch_loss(p, batch);
    p.values[k] = keep;
    const double num = (up - down) / (2.0 * eps);
    worst = std::max(worst, std::abs(g.grad[k] - num) / std::max({std::abs(g.grad[k]), std::abs(num), 1e-6}));
  }
  return worst;
}

}  // namespace

TEST(Gradient, MatchesCentralDifferences) {
  for (auto mode : {PosMode::add, PosMode::append})
    for (std::uint64_t draw = 0; draw < 3; ++draw)
      EXPECT_LE(worst_gradient_error(EncoderParams::init(three_token_shape(mode), 30 + draw), 40 + draw), 1e-4);
}

TEST(Gradient, MatchesCentralDifferencesAwayFromInit) {
  // Far from the initializer some coordinates are ~1e-6 in size, where the
  // O(eps^2) truncation of the central difference alone reaches a few 1e-4.
  for (auto mode : {PosMode::add, PosMode::append})
    for (std::uint64_t draw = 0; draw < 3; ++draw)
      EXPECT_LE(worst_gradient_error(random_params(three_token_shape(mode), 30 + draw, 0.5), 40 + draw), 1e-3);
}

TEST(Gradient, ParallelMatchesSerial) {
  const auto s = small_shape(8, 2, 2);
  const auto p = random_params(s, 50);
  SplitMix64 rng(51);
  std::vector<Example> batch;
  for (int e = 0; e < 16; ++e) batch.push_back({random_matrix(16, 12, rng), e % 2});
  const auto a = batch_gradient(p, batch), b = transformer::serial::batch_gradient(p, batch);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.correct, b.correct);
  EXPECT_EQ(a.grad, b.grad);
}

namespace {

// Spoof clips carry a raised block over one fixed patch.
std::vector<Example> band_tone_task(std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<Example> data;
  for (std::size_t i = 0; i < n; ++i) {
    Example ex{random_matrix(32, 24, rng), static_cast<int>(i % 2)};
    if (ex.label)
      for (std::size_t r = 16; r < 24; ++r)
        for (std::size_t c = 8; c < 16; ++c) ex.spec(r, c) += 2.0;
    data.push_back(std::move(ex));
  }
  return data;
}

TrainConfig toy_config() {
  TrainConfig cfg;
  cfg.shape.bands = 32;
  cfg.shape.steps = 24;
  cfg.shape.geometry = {8, 8, 8, 8};
  cfg.shape.d_model = 16;
  cfg.shape.n_heads = 2;
  cfg.shape.n_layers = 2;
  cfg.shape.d_ff = 32;
  cfg.steps = 500;
  cfg.learning_rate = 1e-2;
  cfg.seed = 1;
  return cfg;
}

}  // namespace

TEST(Train, ToyBandTaskReachesHighAccuracy) {
  const auto data = band_tone_task(200, 60);
  const auto r = train_toy(data, toy_config());
  ASSERT_EQ(r.curve.size(), 501u);
  int reached = -1;
  for (const auto& c : r.curve)
    if (c.accuracy >= 0.95) {
      reached = c.step;
      break;
    }
  EXPECT_GE(reached, 0);
  EXPECT_LE(reached, 500);
  EXPECT_LT(r.curve.back().loss, r.curve.front().loss);
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  const auto data = band_tone_task(20, 61);
  auto cfg = toy_config();
  cfg.steps = 5;
  cfg.learning_rate = 0.0;
  cfg.weight_decay = 0.1;
  const auto start = EncoderParams::init(cfg.shape, 3);
  const auto r = train_from(start, data, cfg);
  EXPECT_EQ(r.params.values, start.values);
}

TEST(Train, SingleClassAndDivergence) {
  auto data = band_tone_task(10, 62);
  for (auto& ex : data) ex.label = 1;
  EXPECT_THROW(train_toy(data, toy_config()), DegenerateLabels);
  data = band_tone_task(10, 63);
  auto cfg = toy_config();
  cfg.steps = 3;
  auto start = EncoderParams::init(cfg.shape, 4);
  start.values[0] = std::nan("");
  EXPECT_THROW(train_from(start, data, cfg), InputError);
  cfg.learning_rate = 1e300;
  EXPECT_THROW(train_from(EncoderParams::init(cfg.shape, 4), data, cfg), TrainingError);
}

TEST(Train, CurveCsv) {
  const std::vector<CurvePoint> c{{0, 0.5, 0.25}, {1, 0.25, 1.0}};
  EXPECT_EQ(curve_csv(c), "step,loss,accuracy\n0,0.5,0.25\n1,0.25,1\n");
}

TEST(Serialization, RoundTrip) {
  auto s = small_shape(8, 2, 2);
  s.pos_mode = PosMode::append;
  auto p = random_params(s, 70);
  p.input_mean = -3.25;
  p.input_scale = 1.5;
  p.center_per_clip = true;
  p.frontend = {{"n_mels", 16}};
  const auto path = std::filesystem::temp_directory_path() / "spoofscope-encoder-test.bin";
  save(p, path, {{"seed", 7}});
  const auto q = load(path);
  EXPECT_EQ(q.values, p.values);
  EXPECT_EQ(q.shape.pos_mode, PosMode::append);
  EXPECT_EQ(q.shape.n_patches(), s.n_patches());
  EXPECT_EQ(q.input_mean, -3.25);
  EXPECT_EQ(q.input_scale, 1.5);
  EXPECT_TRUE(q.center_per_clip);
  EXPECT_EQ(q.frontend, p.frontend);
  std::ofstream(path) << "not an encoder";
  EXPECT_THROW(load(path), Error);
  EXPECT_THROW(load("/nonexistent/encoder.bin"), PathError);
}
