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
#include <limits>
#include <numeric>
#include <sstream>

#include "spoofscope/errors.hpp"
#include "spoofscope/gbdt.hpp"
#include "spoofscope/rng.hpp"

using namespace spoofscope;
using namespace spoofscope::gbdt;

namespace {

struct Fixture {
  Matrix x;
  std::vector<int> y;
};

// Two Gaussian blobs along the diagonal, 2-D.
Fixture blobs(std::size_t n, std::uint64_t seed, double sep = 3.0) {
  SplitMix64 rng(seed);
  Fixture f{Matrix(n, 2), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % 2);
    f.y[i] = c;
    const double mu = c ? sep : -sep;
    for (std::size_t j = 0; j < 2; ++j) f.x(i, j) = mu + rng.normal();
  }
  return f;
}

Fixture xor_grid(std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Fixture f{Matrix(n, 2), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    // Equal counts per quadrant so no axis-aligned marginal carries signal.
    const double sa = (i % 4) < 2 ? 1.0 : -1.0, sb = (i % 2) ? 1.0 : -1.0;
    const double a = sa * rng.uniform(0.01, 1.0), b = sb * rng.uniform(0.01, 1.0);
    f.x(i, 0) = a;
    f.x(i, 1) = b;
    f.y[i] = (a > 0) != (b > 0) ? 1 : 0;
  }
  return f;
}

double train_accuracy(const Model& m, const Fixture& f) {
  const auto p = m.predict(f.x);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < p.size(); ++i) ok += p[i] == f.y[i];
  return static_cast<double>(ok) / static_cast<double>(p.size());
}

double walk(const RegressionTree& t, std::span<const double> x) {
  std::size_t i = 0;
  for (;;) {
    const Node& n = t.nodes.at(i);
    if (n.feature < 0) return n.value;
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
}

SortedColumns sort_columns(const Matrix& x) {
  SortedColumns s(x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    s[j].resize(x.rows());
    std::iota(s[j].begin(), s[j].end(), 0u);
    std::stable_sort(s[j].begin(), s[j].end(), [&](auto a, auto b) { return x(a, j) < x(b, j); });
  }
  return s;
}

}  // namespace

TEST(LogOdds, Cases) {
  std::vector<int> y(100);
  for (std::size_t i = 0; i < 100; ++i) y[i] = i < 50;
  EXPECT_EQ(init_log_odds(y), 0.0);
  for (std::size_t i = 0; i < 100; ++i) y[i] = i < 75;
  EXPECT_NEAR(init_log_odds(y), std::log(3.0), 1e-15);
  std::vector<int> rare(1000, 0);
  rare[0] = 1;
  EXPECT_NEAR(init_log_odds(rare), std::log(1.0 / 999.0), 1e-15);
  EXPECT_THROW(init_log_odds(std::vector<int>(5, 1)), DegenerateLabels);
}

TEST(Residuals, Cases) {
  const std::vector<int> y{1, 0, 1};
  const std::vector<double> p{0.5, 0.5, 1.0 - 1e-12};
  const auto r = pseudo_residuals(y, p);
  EXPECT_EQ(r[0], 0.5);
  EXPECT_EQ(r[1], -0.5);
  EXPECT_NEAR(r[2], 0.0, 1e-11);
}

TEST(Sigmoid, Cases) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(std::log(3.0)), 0.75, 1e-15);
  EXPECT_GT(sigmoid(-800.0), -1.0);
  EXPECT_LE(sigmoid(800.0), 1.0);
}

TEST(FitTree, StumpMatchesHandNewtonStep) {
  Matrix x(6, 2);
  const double f0[] = {0.1, 0.2, 0.3, 0.7, 0.8, 0.9};
  const double f1[] = {5.0, 1.0, 4.0, 2.0, 6.0, 3.0};
  std::vector<double> r(6), p(6);
  for (std::size_t i = 0; i < 6; ++i) {
    x(i, 0) = f0[i];
    x(i, 1) = f1[i];
    r[i] = i < 3 ? -0.5 : 0.6;
    p[i] = i < 3 ? 0.5 : 0.3;
  }
  Config cfg;
  cfg.max_depth = 1;
  const auto t = fit_tree(x, r, p, cfg);
  ASSERT_EQ(t.nodes.size(), 3u);
  EXPECT_EQ(t.nodes[0].feature, 0);
  EXPECT_NEAR(t.nodes[0].threshold, 0.5, 1e-15);
  // -1.5 / (3 * 0.25) and 1.8 / (3 * 0.21).
  EXPECT_NEAR(t.nodes[t.nodes[0].left].value, -2.0, 1e-12);
  EXPECT_NEAR(t.nodes[t.nodes[0].right].value, 0.6 / 0.21, 1e-12);
}

TEST(FitTree, EqualResidualsGiveOneClampedLeaf) {
  SplitMix64 rng(1);
  Matrix x(20, 3);
  for (double& v : x.values()) v = rng.uniform();
  for (double c : {0.05, 0.5}) {
    std::vector<double> r(20, c), p(20, 0.4);
    const auto t = fit_tree(x, r, p, Config{});
    ASSERT_EQ(t.nodes.size(), 1u);
    EXPECT_NEAR(t.nodes[0].value, std::clamp(c / (0.4 * 0.6), -4.0, 4.0), 1e-12);
  }
}

TEST(FitTree, MinSamplesLeafRejectsSmallChildren) {
  Matrix x(4, 1);
  for (std::size_t i = 0; i < 4; ++i) x(i, 0) = static_cast<double>(i);
  const std::vector<double> r{-1.0, 1.0, 1.0, 1.0};
  const std::vector<double> p(4, 0.5);
  Config cfg;
  cfg.max_depth = 1;
  cfg.min_samples_leaf = 2;
  const auto t = fit_tree(x, r, p, cfg);
  ASSERT_EQ(t.nodes.size(), 3u);
  EXPECT_NEAR(t.nodes[0].threshold, 1.5, 1e-15);
  cfg.min_samples_leaf = 3;
  EXPECT_EQ(fit_tree(x, r, p, cfg).nodes.size(), 1u);
}

TEST(FitTree, DepthBounded) {
  const auto f = blobs(200, 2, 0.5);
  std::vector<double> r(f.y.size()), p(f.y.size(), 0.5);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = f.y[i] - 0.5;
  for (int d : {1, 2, 3, 5}) {
    Config cfg;
    cfg.max_depth = d;
    EXPECT_LE(fit_tree(f.x, r, p, cfg).depth(), d);
  }
}

TEST(BestSplit, ParallelMatchesSerial) {
  SplitMix64 rng(3);
  Matrix x(400, 37);
  for (double& v : x.values()) v = std::round(rng.uniform(0.0, 20.0));  // plenty of ties
  std::vector<double> r(400);
  for (double& v : r) v = rng.uniform(-1.0, 1.0);
  const auto s = sort_columns(x);
  for (int leaf : {1, 5, 50}) {
    const auto a = best_split(x, s, r, leaf), b = gbdt::serial::best_split(x, s, r, leaf);
    EXPECT_EQ(a.feature, b.feature);
    EXPECT_EQ(a.threshold, b.threshold);
    EXPECT_EQ(a.gain, b.gain);
  }
}

TEST(BestSplit, TiesGoToLowestFeature) {
  Matrix x(4, 3);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) x(i, j) = static_cast<double>(i);
  const std::vector<double> r{-1.0, -1.0, 1.0, 1.0};
  const auto s = sort_columns(x);
  EXPECT_EQ(best_split(x, s, r, 1).feature, 0);
  EXPECT_EQ(gbdt::serial::best_split(x, s, r, 1).feature, 0);
}

TEST(Train, SeparableBlobs) {
  const auto f = blobs(200, 4);
  Config cfg;
  cfg.max_depth = 3;
  cfg.n_estimators = 100;
  cfg.learning_rate = 0.1;
  EXPECT_GE(train_accuracy(train(f.x, f.y, cfg), f), 0.99);
}

TEST(Train, StumpsCannotExpressXor) {
  const auto f = xor_grid(4000, 5);
  Config cfg;
  cfg.n_estimators = 100;
  cfg.max_depth = 1;
  EXPECT_LE(train_accuracy(train(f.x, f.y, cfg), f), 0.6);
  cfg.max_depth = 2;
  EXPECT_GE(train_accuracy(train(f.x, f.y, cfg), f), 0.95);
}

TEST(Train, SingleRoundIsInitPlusOneTree) {
  const auto f = blobs(60, 6, 1.0);
  Config cfg;
  cfg.n_estimators = 1;
  cfg.max_depth = 2;
  const auto m = train(f.x, f.y, cfg);
  ASSERT_EQ(m.trees.size(), 1u);
  for (std::size_t i = 0; i < f.x.rows(); ++i)
    EXPECT_EQ(m.score(f.x.row(i)), m.f0 + cfg.learning_rate * walk(m.trees[0], f.x.row(i)));
  cfg.n_estimators = 0;
  EXPECT_THROW(train(f.x, f.y, cfg), InputError);
}

TEST(Train, PredictionMatchesTreeWalkOracle) {
  const auto f = blobs(120, 7, 0.7);
  Config cfg;
  cfg.n_estimators = 30;
  cfg.max_depth = 3;
  const auto m = train(f.x, f.y, cfg);
  SplitMix64 rng(8);
  for (int k = 0; k < 200; ++k) {
    const std::vector<double> x{rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)};
    double s = m.f0;
    for (const auto& t : m.trees) s += m.learning_rate * walk(t, x);
    EXPECT_EQ(m.score(x), s);
    EXPECT_EQ(m.predict_proba(x), sigmoid(s));
  }
  EXPECT_THROW(m.predict_proba(std::vector<double>{1.0}), InputError);
}

TEST(Train, LossNonIncreasing) {
  const auto f = blobs(200, 9, 0.6);
  Config cfg;
  cfg.n_estimators = 60;
  cfg.max_depth = 3;
  cfg.learning_rate = 0.1;
  TrainLog log;
  train(f.x, f.y, cfg, &log);
  ASSERT_EQ(log.loss.size(), 61u);
  for (std::size_t i = 1; i < log.loss.size(); ++i) EXPECT_LE(log.loss[i], log.loss[i - 1] + 1e-12);
}

TEST(Train, ZeroTreeLeavesPredictionsUnchanged) {
  const auto f = blobs(50, 10);
  Config cfg;
  cfg.n_estimators = 5;
  auto m = train(f.x, f.y, cfg);
  const auto before = m.predict_proba(f.x);
  RegressionTree zero;
  zero.nodes.emplace_back();
  m.trees.push_back(zero);
  EXPECT_EQ(m.predict_proba(f.x), before);
}

TEST(Train, BalancedSymmetricLabelsGiveZeroInit) {
  auto f = blobs(80, 11);
  EXPECT_EQ(train(f.x, f.y, Config{.n_estimators = 1}).f0, 0.0);
}

TEST(Train, NaNFeatureRejected) {
  auto f = blobs(20, 12);
  f.x(3, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(train(f.x, f.y, Config{}), InputError);
}

TEST(Train, DeterministicSerialization) {
  const auto f = blobs(100, 13, 0.5);
  Config cfg;
  cfg.n_estimators = 20;
  cfg.max_depth = 4;
  EXPECT_EQ(to_json(train(f.x, f.y, cfg)).dump(), to_json(train(f.x, f.y, cfg)).dump());
}

TEST(Serialization, RoundTripPreservesScores) {
  const auto f = blobs(100, 14, 0.5);
  Config cfg;
  cfg.n_estimators = 15;
  const auto m = train(f.x, f.y, cfg);
  const auto p = std::filesystem::temp_directory_path() / "spoofscope-gbdt-test.json";
  save(m, p);
  const auto back = load(p);
  EXPECT_EQ(back.predict_proba(f.x), m.predict_proba(f.x));
  EXPECT_EQ(back.trees.size(), m.trees.size());
  std::ofstream(p) << "{\"format\": \"something-else\"}";
  EXPECT_THROW(load(p), InputError);
  EXPECT_THROW(load("/nonexistent/model.json"), PathError);
}
