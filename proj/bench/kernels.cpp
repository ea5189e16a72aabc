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

// Serial reference vs OpenMP version of each parallel kernel.

#include <benchmark/benchmark.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "spoofscope/attn_explain.hpp"
#include "spoofscope/dsp.hpp"
#include "spoofscope/gbdt.hpp"
#include "spoofscope/gbdt_explain.hpp"
#include "spoofscope/matrix.hpp"
#include "spoofscope/rng.hpp"
#include "spoofscope/transformer.hpp"

using namespace spoofscope;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

std::vector<int> alternating(std::size_t n) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 2);
  return y;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(state.range(1) ? matmul(a, b) : serial::matmul(a, b));
}
BENCHMARK(BM_Matmul)->Args({128, 0})->Args({128, 1})->Args({256, 0})->Args({256, 1});

void BM_BatchFeatures(benchmark::State& state) {
  std::vector<AudioBuffer> clips(16);
  SplitMix64 rng(3);
  for (auto& c : clips) {
    c.samples.resize(16000);
    for (double& v : c.samples) v = 0.1 * rng.normal();
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(state.range(0) ? dsp::batch_features(clips) : dsp::serial::batch_features(clips));
}
BENCHMARK(BM_BatchFeatures)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_BestSplit(benchmark::State& state) {
  const std::size_t n = 4000, d = 37;
  const auto x = random_matrix(n, d, 4);
  gbdt::SortedColumns sorted(d);
  for (std::size_t j = 0; j < d; ++j) {
    sorted[j].resize(n);
    std::iota(sorted[j].begin(), sorted[j].end(), 0u);
    std::stable_sort(sorted[j].begin(), sorted[j].end(), [&](auto p, auto q) { return x(p, j) < x(q, j); });
  }
  std::vector<double> r(n);
  SplitMix64 rng(5);
  for (double& v : r) v = rng.uniform(-1.0, 1.0);
  for (auto _ : state)
    benchmark::DoNotOptimize(state.range(0) ? gbdt::best_split(x, sorted, r, 1) : gbdt::serial::best_split(x, sorted, r, 1));
}
BENCHMARK(BM_BestSplit)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_PermutationScores(benchmark::State& state) {
  const auto x = random_matrix(1000, 37, 6);
  const auto y = alternating(1000);
  gbdt::Config cfg;
  cfg.n_estimators = 50;
  cfg.max_depth = 4;
  const auto model = gbdt::train(x, y, cfg);
  const auto perms = gbdt_explain::seeded_permutations(1000, 7);
  const auto metric = gbdt_explain::Metric::accuracy;
  for (auto _ : state)
    benchmark::DoNotOptimize(state.range(0) ? gbdt_explain::permutation_scores(model, x, y, metric, 5, perms)
                                            : gbdt_explain::serial::permutation_scores(model, x, y, metric, 5, perms));
}
BENCHMARK(BM_PermutationScores)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_BatchGradient(benchmark::State& state) {
  transformer::ModelShape s;
  s.bands = 64;
  s.steps = 48;
  s.geometry = {16, 16, 16, 16};
  const auto p = transformer::EncoderParams::init(s, 8);
  std::vector<transformer::Example> batch;
  for (std::uint64_t e = 0; e < 32; ++e) batch.push_back({random_matrix(64, 48, 100 + e), static_cast<int>(e % 2)});
  for (auto _ : state)
    benchmark::DoNotOptimize(state.range(0) ? transformer::batch_gradient(p, batch)
                                            : transformer::serial::batch_gradient(p, batch));
}
BENCHMARK(BM_BatchGradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_OcclusionScan(benchmark::State& state) {
  transformer::ModelShape s;
  s.bands = 128;
  s.steps = 60;
  s.geometry = {16, 16, 16, 16};
  const auto p = transformer::EncoderParams::init(s, 9);
  const auto spec = random_matrix(128, 60, 10);
  const auto cfg = attn_explain::default_occlusion(128, 60);
  const attn_explain::ProbabilityFn f = [&](const Matrix& m) { return transformer::forward(m, 100.0, p).prob_spoof; };
  for (auto _ : state)
    benchmark::DoNotOptimize(state.range(0) ? attn_explain::occlusion_scan(f, spec, cfg)
                                            : attn_explain::serial::occlusion_scan(f, spec, cfg));
}
BENCHMARK(BM_OcclusionScan)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
