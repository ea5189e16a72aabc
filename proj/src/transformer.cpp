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

#include "spoofscope/transformer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <sstream>

#include "spoofscope/errors.hpp"
#include "spoofscope/rng.hpp"

namespace spoofscope::transformer {

namespace {

constexpr int kFormatVersion = 1;
constexpr char kMagic[] = "SPOOFSCOPE-ENC\n";

// c (+)= a[m x k] * b[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// c += a[k x m]^T * b[k x n]
void gemm_tn_acc(const double* a, const double* b, double* c, std::size_t k, std::size_t m,
                 std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double api = arow[i];
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
}

// c (+)= a[m x k] * b[n x k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
    }
  }
}

void softmax_rows(Matrix& s) {
  for (std::size_t i = 0; i < s.rows(); ++i) {
    auto row = s.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
}

Matrix head_slice(const Matrix& m, std::size_t h, std::size_t dk) {
  Matrix out(m.rows(), dk);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < dk; ++j) out(i, j) = m(i, h * dk + j);
  return out;
}

struct NormCache {
  Matrix xhat;
  std::vector<double> inv_std;
};

Matrix layer_norm_cached(const Matrix& x, const double* gain, const double* bias, NormCache* cache) {
  const std::size_t d = x.cols();
  Matrix y(x.rows(), d);
  if (cache) {
    cache->xhat = Matrix(x.rows(), d);
    cache->inv_std.assign(x.rows(), 0.0);
  }
  for (std::size_t t = 0; t < x.rows(); ++t) {
    const auto row = x.row(t);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = (row[j] - mean) * inv;
      if (cache) cache->xhat(t, j) = xh;
      y(t, j) = gain[j] * xh + bias[j];
    }
    if (cache) cache->inv_std[t] = inv;
  }
  return y;
}

// Returns dL/dx and accumulates gain/bias gradients.
Matrix layer_norm_backward(const Matrix& dy, const NormCache& c, const double* gain, double* dgain,
                           double* dbias) {
  const std::size_t d = dy.cols();
  Matrix dx(dy.rows(), d);
  std::vector<double> dxhat(d);
  for (std::size_t t = 0; t < dy.rows(); ++t) {
    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dgain[j] += dy(t, j) * c.xhat(t, j);
      dbias[j] += dy(t, j);
      dxhat[j] = dy(t, j) * gain[j];
      mean_dxhat += dxhat[j];
      mean_dxhat_xhat += dxhat[j] * c.xhat(t, j);
    }
    mean_dxhat /= static_cast<double>(d);
    mean_dxhat_xhat /= static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) {
      dx(t, j) = c.inv_std[t] * (dxhat[j] - mean_dxhat - c.xhat(t, j) * mean_dxhat_xhat);
    }
  }
  return dx;
}

struct LayerCache {
  Matrix x, q, k, v;
  std::vector<Matrix> attn;
  Matrix concat;
  NormCache ln1;
  Matrix y1;
  Matrix hidden_pre, hidden;
  NormCache ln2;
};

struct ForwardCache {
  Matrix embed_in;  // n_patches x embed_in
  std::vector<LayerCache> layers;
  Matrix final_tokens;
};

Matrix multi_head_cached(const Matrix& x, const EncoderParams& p, std::size_t layer,
                         LayerCache* cache, std::vector<Matrix>* head_weights) {
  const auto& s = p.shape;
  const auto& o = p.layout.layers[layer];
  const std::size_t t = x.rows(), d = s.d_model, dk = s.d_head();
  Matrix q(t, d), k(t, d), v(t, d);
  gemm_nn(x.data(), p.at(o.wq), q.data(), t, d, d, false);
  gemm_nn(x.data(), p.at(o.wk), k.data(), t, d, d, false);
  gemm_nn(x.data(), p.at(o.wv), v.data(), t, d, d, false);

  Matrix concat(t, d);
  if (head_weights) head_weights->clear();
  for (std::size_t h = 0; h < s.n_heads; ++h) {
    auto res = attention(head_slice(q, h, dk), head_slice(k, h, dk), head_slice(v, h, dk));
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < dk; ++j) concat(i, h * dk + j) = res.output(i, j);
    if (head_weights) head_weights->push_back(res.weights);
    if (cache) cache->attn.push_back(std::move(res.weights));
  }
  Matrix out(t, d);
  gemm_nn(concat.data(), p.at(o.wo), out.data(), t, d, d, false);
  if (cache) {
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->concat = std::move(concat);
  }
  return out;
}

Matrix encoder_layer_cached(const Matrix& x, const EncoderParams& p, std::size_t layer,
                            LayerCache* cache, std::vector<Matrix>* head_weights) {
  const auto& s = p.shape;
  const auto& o = p.layout.layers[layer];
  const std::size_t t = x.rows(), d = s.d_model;
  if (cache) cache->x = x;

  Matrix r1 = multi_head_cached(x, p, layer, cache, head_weights);
  for (std::size_t i = 0; i < r1.size(); ++i) r1.values()[i] += x.values()[i];
  Matrix y1 = layer_norm_cached(r1, p.at(o.ln1_gain), p.at(o.ln1_bias), cache ? &cache->ln1 : nullptr);

  Matrix pre(t, s.d_ff);
  gemm_nn(y1.data(), p.at(o.w1), pre.data(), t, d, s.d_ff, false);
  Matrix hidden(t, s.d_ff);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j < s.d_ff; ++j) {
      pre(i, j) += p.at(o.b1)[j];
      hidden(i, j) = pre(i, j) > 0.0 ? pre(i, j) : 0.0;
    }
  }
  Matrix r2(t, d);
  gemm_nn(hidden.data(), p.at(o.w2), r2.data(), t, s.d_ff, d, false);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < d; ++j) r2(i, j) += p.at(o.b2)[j] + y1(i, j);
  Matrix y2 = layer_norm_cached(r2, p.at(o.ln2_gain), p.at(o.ln2_bias), cache ? &cache->ln2 : nullptr);

  if (cache) {
    cache->y1 = std::move(y1);
    cache->hidden_pre = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return y2;
}

void check_finite(const EncoderParams& p) {
  for (double v : p.values) {
    if (!std::isfinite(v)) throw InputError("encoder parameters contain non-finite values");
  }
}

Matrix embed_patches(const Patches& patches, const EncoderParams& p, Matrix* embed_in) {
  const auto& s = p.shape;
  const std::size_t n = patches.flat.rows(), d = s.d_model, pd = s.patch_dim();
  if (n != s.n_patches()) throw InputError("patch count does not match the model");

  Matrix in(n, s.embed_in());
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(patches.flat.row(i).begin(), pd, in.row(i).begin());
    if (s.pos_mode == PosMode::append) {
      std::copy_n(p.at(p.layout.pos) + i * d, d, in.row(i).begin() + static_cast<std::ptrdiff_t>(pd));
    }
  }

  Matrix tokens(n + 1, d);
  gemm_nn(in.data(), p.at(p.layout.embed_w), tokens.data() + d, n, s.embed_in(), d, false);
  for (std::size_t j = 0; j < d; ++j) tokens(0, j) = p.at(p.layout.cls)[j];
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 0; j < d; ++j) tokens(i, j) += p.at(p.layout.embed_b)[j];
  if (s.pos_mode == PosMode::add) {
    for (std::size_t i = 0; i <= n; ++i)
      for (std::size_t j = 0; j < d; ++j) tokens(i, j) += p.at(p.layout.pos)[i * d + j];
  }
  if (embed_in) *embed_in = std::move(in);
  return tokens;
}

void classify(const std::vector<double>& cls, const EncoderParams& p, ForwardOutput& out) {
  const std::size_t d = p.shape.d_model;
  for (std::size_t c = 0; c < 2; ++c) {
    double z = p.at(p.layout.head_b)[c];
    for (std::size_t j = 0; j < d; ++j) z += cls[j] * p.at(p.layout.head_w)[j * 2 + c];
    out.logits[c] = z;
  }
  const double mx = std::max(out.logits[0], out.logits[1]);
  const double e0 = std::exp(out.logits[0] - mx), e1 = std::exp(out.logits[1] - mx);
  out.prob_spoof = e1 / (e0 + e1);
}

// Per-example loss and gradient (accumulated into grad).
double example_gradient(const EncoderParams& p, const Example& ex, std::span<double> grad,
                        bool& correct) {
  const auto& s = p.shape;
  const auto& L = p.layout;
  const std::size_t d = s.d_model, dk = s.d_head(), n = s.n_patches(), t = n + 1;
  if (ex.label != 0 && ex.label != 1) throw InputError("labels must be 0 or 1");
  if (ex.spec.rows() != s.bands || ex.spec.cols() != s.steps) {
    throw InputError("spectrogram shape does not match the model");
  }

  ForwardCache cache;
  const Patches patches = extract_patches(ex.spec, 1.0, s.geometry, input_offset(ex.spec, p), p.input_scale);
  Matrix x = embed_patches(patches, p, &cache.embed_in);
  cache.layers.resize(s.n_layers);
  for (std::size_t l = 0; l < s.n_layers; ++l) x = encoder_layer_cached(x, p, l, &cache.layers[l], nullptr);

  ForwardOutput out;
  out.cls_final.assign(x.row(0).begin(), x.row(0).end());
  classify(out.cls_final, p, out);
  const double py = ex.label == 1 ? out.prob_spoof : 1.0 - out.prob_spoof;
  const double loss = -std::log(std::max(py, 1e-300));
  correct = (out.prob_spoof >= 0.5 ? 1 : 0) == ex.label;

  double* g = grad.data();
  const double dlogit[2] = {(1.0 - out.prob_spoof) - (ex.label == 0 ? 1.0 : 0.0),
                            out.prob_spoof - (ex.label == 1 ? 1.0 : 0.0)};
  Matrix dx(t, d);
  for (std::size_t c = 0; c < 2; ++c) g[L.head_b + c] += dlogit[c];
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t c = 0; c < 2; ++c) {
      g[L.head_w + j * 2 + c] += out.cls_final[j] * dlogit[c];
      dx(0, j) += p.at(L.head_w)[j * 2 + c] * dlogit[c];
    }
  }

  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
  for (std::size_t li = s.n_layers; li-- > 0;) {
    const auto& o = L.layers[li];
    const LayerCache& c = cache.layers[li];

    Matrix dr2 = layer_norm_backward(dx, c.ln2, p.at(o.ln2_gain), g + o.ln2_gain, g + o.ln2_bias);
    // FFN
    gemm_tn_acc(c.hidden.data(), dr2.data(), g + o.w2, t, s.d_ff, d);
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < d; ++j) g[o.b2 + j] += dr2(i, j);
    Matrix dhidden(t, s.d_ff);
    gemm_nt(dr2.data(), p.at(o.w2), dhidden.data(), t, d, s.d_ff, false);
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < s.d_ff; ++j)
        if (!(c.hidden_pre(i, j) > 0.0)) dhidden(i, j) = 0.0;
    gemm_tn_acc(c.y1.data(), dhidden.data(), g + o.w1, t, d, s.d_ff);
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < s.d_ff; ++j) g[o.b1 + j] += dhidden(i, j);
    Matrix dy1 = dr2;
    gemm_nt(dhidden.data(), p.at(o.w1), dy1.data(), t, s.d_ff, d, true);

    Matrix dr1 = layer_norm_backward(dy1, c.ln1, p.at(o.ln1_gain), g + o.ln1_gain, g + o.ln1_bias);
    // Attention
    gemm_tn_acc(c.concat.data(), dr1.data(), g + o.wo, t, d, d);
    Matrix dconcat(t, d);
    gemm_nt(dr1.data(), p.at(o.wo), dconcat.data(), t, d, d, false);

    Matrix dq(t, d), dk_full(t, d), dv(t, d);
    for (std::size_t h = 0; h < s.n_heads; ++h) {
      const Matrix& a = c.attn[h];
      const Matrix qh = head_slice(c.q, h, dk), kh = head_slice(c.k, h, dk), vh = head_slice(c.v, h, dk);
      const Matrix dh = head_slice(dconcat, h, dk);
      Matrix da(t, t);
      gemm_nt(dh.data(), vh.data(), da.data(), t, dk, t, false);
      Matrix dvh(t, dk);
      gemm_tn_acc(a.data(), dh.data(), dvh.data(), t, t, dk);
      Matrix ds(t, t);
      for (std::size_t i = 0; i < t; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < t; ++j) dot += da(i, j) * a(i, j);
        for (std::size_t j = 0; j < t; ++j) ds(i, j) = a(i, j) * (da(i, j) - dot) * inv_sqrt_dk;
      }
      Matrix dqh(t, dk), dkh(t, dk);
      gemm_nn(ds.data(), kh.data(), dqh.data(), t, t, dk, false);
      gemm_tn_acc(ds.data(), qh.data(), dkh.data(), t, t, dk);
      for (std::size_t i = 0; i < t; ++i) {
        for (std::size_t j = 0; j < dk; ++j) {
          dq(i, h * dk + j) = dqh(i, j);
          dk_full(i, h * dk + j) = dkh(i, j);
          dv(i, h * dk + j) = dvh(i, j);
        }
      }
    }
    gemm_tn_acc(c.x.data(), dq.data(), g + o.wq, t, d, d);
    gemm_tn_acc(c.x.data(), dk_full.data(), g + o.wk, t, d, d);
    gemm_tn_acc(c.x.data(), dv.data(), g + o.wv, t, d, d);
    Matrix dxl = dr1;
    gemm_nt(dq.data(), p.at(o.wq), dxl.data(), t, d, d, true);
    gemm_nt(dk_full.data(), p.at(o.wk), dxl.data(), t, d, d, true);
    gemm_nt(dv.data(), p.at(o.wv), dxl.data(), t, d, d, true);
    dx = std::move(dxl);
  }

  // Embedding
  for (std::size_t j = 0; j < d; ++j) g[L.cls + j] += dx(0, j);
  if (s.pos_mode == PosMode::add) {
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < d; ++j) g[L.pos + i * d + j] += dx(i, j);
  }
  const double* dtok = dx.data() + d;
  gemm_tn_acc(cache.embed_in.data(), dtok, g + L.embed_w, n, s.embed_in(), d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) g[L.embed_b + j] += dtok[i * d + j];
  if (s.pos_mode == PosMode::append) {
    const std::size_t pd = s.patch_dim();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t a = 0; a < d; ++a) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) acc += dtok[i * d + j] * p.at(L.embed_w)[(pd + a) * d + j];
        g[L.pos + i * d + a] += acc;
      }
    }
  }
  return loss;
}

BatchGradient reduce_examples(const EncoderParams& p, std::span<const Example> batch,
                              const std::vector<std::vector<double>>& per_example,
                              const std::vector<double>& losses, const std::vector<char>& hits) {
  BatchGradient out;
  out.grad.assign(p.values.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.loss += losses[i];
    out.correct += static_cast<std::size_t>(hits[i]);
    const auto& gi = per_example[i];
    for (std::size_t k = 0; k < gi.size(); ++k) out.grad[k] += gi[k];
  }
  out.loss *= inv_n;
  for (double& v : out.grad) v *= inv_n;
  return out;
}

void check_batch(std::span<const Example> batch) {
  if (batch.empty()) throw InputError("training batch is empty");
}

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
  return r;
}

nlohmann::json shape_json(const ModelShape& s) {
  return {{"bands", s.bands},
          {"steps", s.steps},
          {"patch", {s.geometry.patch_h, s.geometry.patch_w}},
          {"stride", {s.geometry.stride_h, s.geometry.stride_w}},
          {"d_model", s.d_model},
          {"n_heads", s.n_heads},
          {"n_layers", s.n_layers},
          {"d_ff", s.d_ff},
          {"pos_mode", to_string(s.pos_mode)}};
}

ModelShape shape_from_json(const nlohmann::json& j) {
  ModelShape s;
  s.bands = j.at("bands").get<std::size_t>();
  s.steps = j.at("steps").get<std::size_t>();
  s.geometry.patch_h = j.at("patch").at(0).get<std::size_t>();
  s.geometry.patch_w = j.at("patch").at(1).get<std::size_t>();
  s.geometry.stride_h = j.at("stride").at(0).get<std::size_t>();
  s.geometry.stride_w = j.at("stride").at(1).get<std::size_t>();
  s.d_model = j.at("d_model").get<std::size_t>();
  s.n_heads = j.at("n_heads").get<std::size_t>();
  s.n_layers = j.at("n_layers").get<std::size_t>();
  s.d_ff = j.at("d_ff").get<std::size_t>();
  s.pos_mode = parse_pos_mode(j.at("pos_mode").get<std::string>());
  return s;
}

}  // namespace

PatchGrid patch_grid(std::size_t bands, std::size_t steps, const PatchGeometry& g) {
  if (g.patch_h == 0 || g.patch_w == 0 || g.stride_h == 0 || g.stride_w == 0) {
    throw InputError("patch and stride sizes must be positive");
  }
  if (bands < g.patch_h || steps < g.patch_w) {
    throw InputError("spectrogram " + std::to_string(bands) + "x" + std::to_string(steps) +
                     " is smaller than one " + std::to_string(g.patch_h) + "x" +
                     std::to_string(g.patch_w) + " patch");
  }
  return {(bands - g.patch_h) / g.stride_h + 1, (steps - g.patch_w) / g.stride_w + 1};
}

PosMode parse_pos_mode(const std::string& s) {
  if (s == "add") return PosMode::add;
  if (s == "append") return PosMode::append;
  throw UsageError("unknown positional mode: " + s);
}

std::string to_string(PosMode m) { return m == PosMode::add ? "add" : "append"; }

void validate(const ModelShape& s) {
  if (s.d_model == 0 || s.n_heads == 0 || s.n_layers == 0 || s.d_ff == 0) {
    throw InputError("model dimensions must be positive");
  }
  if (s.d_model % s.n_heads != 0) throw InputError("head count must divide d_model");
  (void)s.grid();
}

std::vector<TensorInfo> tensor_table(const ModelShape& s) {
  validate(s);
  const std::size_t d = s.d_model;
  std::vector<TensorInfo> t;
  std::size_t off = 0;
  const auto add = [&](std::string name, std::size_t r, std::size_t c) {
    t.push_back({std::move(name), off, r, c});
    off += r * c;
  };
  add("embed_w", s.embed_in(), d);
  add("embed_b", 1, d);
  add("pos", s.pos_mode == PosMode::add ? s.n_tokens() : s.n_patches(), d);
  add("cls", 1, d);
  for (std::size_t l = 0; l < s.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    add(p + "wq", d, d);
    add(p + "wk", d, d);
    add(p + "wv", d, d);
    add(p + "wo", d, d);
    add(p + "ln1_gain", 1, d);
    add(p + "ln1_bias", 1, d);
    add(p + "w1", d, s.d_ff);
    add(p + "b1", 1, s.d_ff);
    add(p + "w2", s.d_ff, d);
    add(p + "b2", 1, d);
    add(p + "ln2_gain", 1, d);
    add(p + "ln2_bias", 1, d);
  }
  add("head_w", d, 2);
  add("head_b", 1, 2);
  return t;
}

Layout Layout::for_shape(const ModelShape& s) {
  const auto table = tensor_table(s);
  Layout L;
  std::size_t i = 0;
  L.embed_w = table[i++].offset;
  L.embed_b = table[i++].offset;
  L.pos = table[i++].offset;
  L.cls = table[i++].offset;
  L.layers.resize(s.n_layers);
  for (auto& o : L.layers) {
    o.wq = table[i++].offset;
    o.wk = table[i++].offset;
    o.wv = table[i++].offset;
    o.wo = table[i++].offset;
    o.ln1_gain = table[i++].offset;
    o.ln1_bias = table[i++].offset;
    o.w1 = table[i++].offset;
    o.b1 = table[i++].offset;
    o.w2 = table[i++].offset;
    o.b2 = table[i++].offset;
    o.ln2_gain = table[i++].offset;
    o.ln2_bias = table[i++].offset;
  }
  L.head_w = table[i++].offset;
  L.head_b = table[i].offset;
  L.total = table.back().offset + table.back().rows * table.back().cols;
  return L;
}

EncoderParams EncoderParams::init(const ModelShape& shape, std::uint64_t seed) {
  EncoderParams p;
  p.shape = shape;
  p.layout = Layout::for_shape(shape);
  p.values.assign(p.layout.total, 0.0);
  SplitMix64 rng(seed);
  for (const auto& t : tensor_table(shape)) {
    const std::string base = t.name.substr(t.name.find('.') + 1);
    double stddev = 0.0;
    if (base == "embed_w" || base == "wq" || base == "wk" || base == "wv" || base == "wo" ||
        base == "w1" || base == "w2" || base == "head_w") {
      stddev = 1.0 / std::sqrt(static_cast<double>(t.rows));
    } else if (base == "pos" || base == "cls") {
      stddev = 0.02;
    }
    const bool unit = base == "ln1_gain" || base == "ln2_gain";
    for (std::size_t k = 0; k < t.rows * t.cols; ++k) {
      p.values[t.offset + k] = unit ? 1.0 : (stddev > 0.0 ? stddev * rng.normal() : 0.0);
    }
  }
  return p;
}

Patches extract_patches(const Matrix& spec, double hop_ms, const PatchGeometry& g,
                        double input_mean, double input_scale) {
  Patches out;
  out.grid = patch_grid(spec.rows(), spec.cols(), g);
  out.flat = Matrix(out.grid.count(), g.patch_h * g.patch_w);
  const double inv = 1.0 / input_scale;
  for (std::size_t r = 0; r < out.grid.rows; ++r) {
    for (std::size_t c = 0; c < out.grid.cols; ++c) {
      auto dst = out.flat.row(r * out.grid.cols + c);
      for (std::size_t i = 0; i < g.patch_h; ++i)
        for (std::size_t j = 0; j < g.patch_w; ++j)
          dst[i * g.patch_w + j] = (spec(r * g.stride_h + i, c * g.stride_w + j) - input_mean) * inv;
    }
  }
  for (std::size_t r = 0; r < out.grid.rows; ++r) {
    for (std::size_t c = 0; c < out.grid.cols; ++c) {
      const double start = static_cast<double>(c * g.stride_w) * hop_ms;
      out.spans.push_back({start, start + static_cast<double>(g.patch_w) * hop_ms});
    }
  }
  return out;
}

double input_offset(const Matrix& spec, const EncoderParams& params) {
  if (!params.center_per_clip || spec.empty()) return params.input_mean;
  double sum = 0.0;
  for (double v : spec.values()) sum += v;
  return sum / static_cast<double>(spec.size()) + params.input_mean;
}

PatchSequence patchify(const dsp::MelSpectrogram& spec, const EncoderParams& params) {
  const auto& s = params.shape;
  if (spec.bands() != s.bands || spec.steps() != s.steps) {
    throw InputError("model expects a " + std::to_string(s.bands) + "x" + std::to_string(s.steps) +
                     " spectrogram, got " + std::to_string(spec.bands()) + "x" +
                     std::to_string(spec.steps()));
  }
  const Patches patches =
      extract_patches(spec.values, spec.hop_ms, s.geometry, input_offset(spec.values, params), params.input_scale);
  PatchSequence seq;
  seq.tokens = embed_patches(patches, params, nullptr);
  seq.geometry = s.geometry;
  seq.token_time_spans = patches.spans;
  return seq;
}

AttentionResult attention(const Matrix& q, const Matrix& k, const Matrix& v) {
  if (q.cols() != k.cols() || k.rows() != v.rows()) throw InputError("attention: shapes do not conform");
  AttentionResult r;
  r.weights = Matrix(q.rows(), k.rows());
  gemm_nt(q.data(), k.data(), r.weights.data(), q.rows(), q.cols(), k.rows(), false);
  const double scale = 1.0 / std::sqrt(static_cast<double>(k.cols()));
  for (double& x : r.weights.values()) x *= scale;
  softmax_rows(r.weights);
  r.output = Matrix(q.rows(), v.cols());
  gemm_nn(r.weights.data(), v.data(), r.output.data(), q.rows(), v.rows(), v.cols(), false);
  return r;
}

Matrix multi_head(const Matrix& x, const EncoderParams& p, std::size_t layer,
                  std::vector<Matrix>* head_weights) {
  return multi_head_cached(x, p, layer, nullptr, head_weights);
}

Matrix encoder_layer(const Matrix& x, const EncoderParams& p, std::size_t layer,
                     std::vector<Matrix>* head_weights) {
  return encoder_layer_cached(x, p, layer, nullptr, head_weights);
}

Matrix layer_norm(const Matrix& x, std::span<const double> gain, std::span<const double> bias) {
  if (gain.size() != x.cols() || bias.size() != x.cols()) throw InputError("layer_norm: width mismatch");
  return layer_norm_cached(x, gain.data(), bias.data(), nullptr);
}

Matrix encode(const Matrix& tokens, const EncoderParams& p, AttentionRecord* record) {
  if (tokens.cols() != p.shape.d_model) throw InputError("token width does not match d_model");
  Matrix x = tokens;
  if (record) record->layers.assign(p.shape.n_layers, {});
  for (std::size_t l = 0; l < p.shape.n_layers; ++l) {
    x = encoder_layer(x, p, l, record ? &record->layers[l] : nullptr);
  }
  return x;
}

ForwardOutput forward_tokens(const Matrix& tokens, const EncoderParams& p) {
  ForwardOutput out;
  const Matrix final_tokens = encode(tokens, p, &out.attention);
  out.cls_final.assign(final_tokens.row(0).begin(), final_tokens.row(0).end());
  classify(out.cls_final, p, out);
  return out;
}

ForwardOutput forward(const dsp::MelSpectrogram& spec, const EncoderParams& p) {
  return forward_tokens(patchify(spec, p).tokens, p);
}

ForwardOutput forward(const Matrix& spec_values, double hop_ms, const EncoderParams& p) {
  dsp::MelSpectrogram spec;
  spec.values = spec_values;
  spec.hop_ms = hop_ms;
  return forward(spec, p);
}

BatchGradient batch_gradient(const EncoderParams& p, std::span<const Example> batch) {
  check_batch(batch);
  const std::size_t n = batch.size();
  std::vector<std::vector<double>> per_example(n);
  std::vector<double> losses(n);
  std::vector<char> hits(n);
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (long ii = 0; ii < static_cast<long>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    try {
      per_example[i].assign(p.values.size(), 0.0);
      bool ok = false;
      losses[i] = example_gradient(p, batch[i], per_example[i], ok);
      hits[i] = ok ? 1 : 0;
    } catch (...) {
#pragma omp critical(spoofscope_batch_gradient)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return reduce_examples(p, batch, per_example, losses, hits);
}

namespace serial {

BatchGradient batch_gradient(const EncoderParams& p, std::span<const Example> batch) {
  check_batch(batch);
  const std::size_t n = batch.size();
  std::vector<std::vector<double>> per_example(n);
  std::vector<double> losses(n);
  std::vector<char> hits(n);
  for (std::size_t i = 0; i < n; ++i) {
    per_example[i].assign(p.values.size(), 0.0);
    bool ok = false;
    losses[i] = example_gradient(p, batch[i], per_example[i], ok);
    hits[i] = ok ? 1 : 0;
  }
  return reduce_examples(p, batch, per_example, losses, hits);
}

}  // namespace serial

double batch_loss(const EncoderParams& p, std::span<const Example> batch) {
  check_batch(batch);
  double loss = 0.0;
  for (const auto& ex : batch) {
    const auto out = forward(ex.spec, 1.0, p);
    const double py = ex.label == 1 ? out.prob_spoof : 1.0 - out.prob_spoof;
    loss += -std::log(std::max(py, 1e-300));
  }
  return loss / static_cast<double>(batch.size());
}

TrainResult train_from(EncoderParams start, std::span<const Example> data, const TrainConfig& cfg) {
  check_batch(data);
  bool has_pos = false, has_neg = false;
  for (const auto& ex : data) (ex.label == 1 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) throw DegenerateLabels("training data must contain both classes");
  if (cfg.steps < 0) throw InputError("steps must be non-negative");

  TrainResult result;
  result.params = std::move(start);
  check_finite(result.params);
  auto& w = result.params.values;
  std::vector<double> m(w.size(), 0.0), v(w.size(), 0.0);
  const int warmup = static_cast<int>(std::ceil(cfg.warmup_ratio * cfg.steps));
  const double n = static_cast<double>(data.size());

  for (int step = 1; step <= cfg.steps + 1; ++step) {
    const BatchGradient bg = batch_gradient(result.params, data);
    if (!std::isfinite(bg.loss)) {
      throw TrainingError("training diverged at step " + std::to_string(step - 1));
    }
    result.curve.push_back({step - 1, bg.loss, static_cast<double>(bg.correct) / n});
    if (step > cfg.steps) break;

    double lr = cfg.learning_rate;
    if (warmup > 0 && step <= warmup) lr *= static_cast<double>(step) / warmup;
    const double c1 = 1.0 - std::pow(cfg.beta1, step);
    const double c2 = 1.0 - std::pow(cfg.beta2, step);
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double g = bg.grad[k];
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
      const double update = (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.adam_eps);
      w[k] -= lr * update;
      w[k] -= lr * cfg.weight_decay * w[k];
    }
  }
  return result;
}

TrainResult train_toy(std::span<const Example> data, const TrainConfig& cfg) {
  check_batch(data);
  EncoderParams p = EncoderParams::init(cfg.shape, cfg.seed);
  p.center_per_clip = cfg.center_per_clip;
  double sum = 0.0, sq = 0.0, count = 0.0;
  for (const auto& ex : data) {
    const double offset = input_offset(ex.spec, p);
    for (double raw : ex.spec.values()) {
      const double x = raw - offset;
      sum += x;
      sq += x * x;
      count += 1.0;
    }
  }
  const double mean = sum / count;
  const double var = std::max(0.0, sq / count - mean * mean);
  p.input_mean = mean;
  p.input_scale = var > 0.0 ? std::sqrt(var) : 1.0;
  return train_from(std::move(p), data, cfg);
}

std::string curve_csv(std::span<const CurvePoint> curve) {
  std::ostringstream out;
  out << "step,loss,accuracy\n";
  char buf[96];
  for (const auto& c : curve) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", c.step, c.loss, c.accuracy);
    out << buf;
  }
  return out.str();
}

void save(const EncoderParams& p, const std::filesystem::path& path, const nlohmann::json& meta) {
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& t : tensor_table(p.shape)) {
    tensors.push_back({{"name", t.name}, {"offset", t.offset}, {"shape", {t.rows, t.cols}}});
  }
  nlohmann::json header = {{"format", "spoofscope.encoder"},
                           {"version", kFormatVersion},
                           {"shape", shape_json(p.shape)},
                           {"input_mean", p.input_mean},
                           {"input_scale", p.input_scale},
                           {"center_per_clip", p.center_per_clip},
                           {"frontend", p.frontend},
                           {"count", p.values.size()},
                           {"dtype", "float64-le"},
                           {"tensors", tensors}};
  if (!meta.empty()) header["meta"] = meta;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write encoder: " + path.string());
  out << kMagic << header.dump() << '\n';
  for (double v : p.values) {
    const std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(v));
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

EncoderParams load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PathError("cannot open encoder: " + path.string());
  std::string magic, header_line;
  std::getline(in, magic);
  if (magic + "\n" != kMagic) throw InputError(path.string() + " is not an encoder file");
  std::getline(in, header_line);
  try {
    const auto header = nlohmann::json::parse(header_line);
    if (header.at("version").get<int>() != kFormatVersion) throw InputError("unsupported encoder version");
    EncoderParams p;
    p.shape = shape_from_json(header.at("shape"));
    p.layout = Layout::for_shape(p.shape);
    p.input_mean = header.at("input_mean").get<double>();
    p.input_scale = header.at("input_scale").get<double>();
    p.center_per_clip = header.value("center_per_clip", false);
    p.frontend = header.value("frontend", nlohmann::json::object());
    const auto count = header.at("count").get<std::size_t>();
    if (count != p.layout.total) throw InputError("encoder tensor count does not match its shape");
    p.values.resize(count);
    for (double& v : p.values) {
      std::uint64_t bits = 0;
      in.read(reinterpret_cast<char*>(&bits), sizeof bits);
      if (!in) throw InputError("encoder file is truncated");
      v = std::bit_cast<double>(to_le(bits));
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed encoder header: " + std::string(e.what()));
  }
}

}  // namespace spoofscope::transformer
