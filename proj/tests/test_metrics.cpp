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

#include "spoofscope/errors.hpp"
#include "spoofscope/metrics.hpp"
#include "spoofscope/rng.hpp"

using namespace spoofscope;
using namespace spoofscope::metrics;

namespace {

// Probability that a random positive outscores a random negative, ties
// counting one half.
double pairwise_auc(std::span<const double> s, std::span<const int> y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1.0;
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return wins / pairs;
}

}  // namespace

TEST(Counts, HandComputedCase) {
  const auto r = EvalReport::from_counts({85, 15, 14, 86});
  EXPECT_NEAR(r.spoof.precision, 0.85, 1e-12);
  EXPECT_NEAR(r.spoof.recall, 85.0 / 99.0, 1e-12);
  EXPECT_NEAR(r.accuracy, 0.855, 1e-12);
  const double f1 = 2.0 * 0.85 * (85.0 / 99.0) / (0.85 + 85.0 / 99.0);
  EXPECT_NEAR(r.spoof.f1, f1, 1e-12);
  EXPECT_NEAR(r.spoof.recall, 0.859, 5e-4);
  EXPECT_NEAR(r.spoof.f1, 0.854, 5e-4);
  EXPECT_NEAR(r.bonafide.precision, 86.0 / 100.0, 1e-12);
  EXPECT_NEAR(r.bonafide.recall, 86.0 / 101.0, 1e-12);
  EXPECT_NEAR(r.macro.precision, (0.85 + 0.86) / 2.0, 1e-12);
}

TEST(Counts, EmptyRatiosAreZero) {
  const auto r = EvalReport::from_counts({0, 0, 5, 5});
  EXPECT_EQ(r.spoof.precision, 0.0);
  EXPECT_EQ(r.spoof.recall, 0.0);
  EXPECT_EQ(r.spoof.f1, 0.0);
}

TEST(Evaluate, PerfectClassifier) {
  std::vector<int> y(100);
  std::vector<double> p(100);
  for (std::size_t i = 0; i < 100; ++i) {
    y[i] = i < 50;
    p[i] = y[i] ? 0.9 : 0.1;
  }
  const auto r = evaluate(p, y);
  EXPECT_EQ(r.counts.tp, 50u);
  EXPECT_EQ(r.counts.tn, 50u);
  EXPECT_EQ(r.spoof.precision, 1.0);
  EXPECT_EQ(r.spoof.recall, 1.0);
  EXPECT_EQ(r.spoof.f1, 1.0);
  EXPECT_EQ(r.accuracy, 1.0);
  ASSERT_TRUE(r.roc_auc);
  EXPECT_EQ(*r.roc_auc, 1.0);
  EXPECT_EQ(*r.eer, 0.0);
}

TEST(Evaluate, InvertedClassifier) {
  std::vector<int> y(40);
  std::vector<double> p(40);
  for (std::size_t i = 0; i < 40; ++i) {
    y[i] = i % 2;
    p[i] = y[i] ? 0.2 : 0.8;
  }
  const auto r = evaluate(p, y);
  EXPECT_EQ(r.accuracy, 0.0);
  EXPECT_EQ(*r.roc_auc, 0.0);
}

TEST(Evaluate, SingleClassHasNoAuc) {
  const std::vector<int> y(10, 1);
  const std::vector<double> p(10, 0.7);
  const auto r = evaluate(p, y);
  EXPECT_FALSE(r.roc_auc.has_value());
  EXPECT_FALSE(r.eer.has_value());
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_THROW(roc_auc(p, y), MetricError);
}

TEST(Evaluate, LengthMismatchThrows) {
  EXPECT_THROW(evaluate(std::vector<double>{0.1}, std::vector<int>{0, 1}), InputError);
}

TEST(Roc, AucMatchesPairwiseDefinition) {
  SplitMix64 rng(1);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> s(60);
    std::vector<int> y(60);
    for (std::size_t i = 0; i < 60; ++i) {
      y[i] = static_cast<int>(rng.below(2));
      s[i] = std::round(rng.uniform(0.0, 10.0)) / 10.0 + 0.05 * y[i];  // includes ties
    }
    y[0] = 0;
    y[1] = 1;
    EXPECT_NEAR(roc_auc(s, y), pairwise_auc(s, y), 1e-12);
  }
}

TEST(Roc, RankInvariance) {
  SplitMix64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 10 + rng.below(90);
    std::vector<double> s(n), tr(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(rng.below(2));
      s[i] = rng.uniform(-3.0, 3.0);
      tr[i] = std::exp(2.0 * s[i]) + 7.0;
    }
    y[0] = 0;
    y[1] = 1;
    const double a = roc_auc(s, y);
    EXPECT_EQ(a, roc_auc(tr, y));
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
}

TEST(Roc, CurveStartsAtOriginAndEndsAtOne) {
  const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  const std::vector<int> y{0, 0, 1, 1};
  const auto c = roc_curve(s, y);
  EXPECT_EQ(c.front().fpr, 0.0);
  EXPECT_EQ(c.front().tpr, 0.0);
  EXPECT_EQ(c.back().fpr, 1.0);
  EXPECT_EQ(c.back().tpr, 1.0);
  EXPECT_NEAR(roc_auc(s, y), 0.75, 1e-15);
}

TEST(Eer, GapWithinOneStep) {
  SplitMix64 rng(3);
  for (int t = 0; t < 30; ++t) {
    std::vector<double> s(80);
    std::vector<int> y(80);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < 80; ++i) {
      y[i] = static_cast<int>(rng.below(2));
      pos += static_cast<std::size_t>(y[i]);
      s[i] = rng.normal() + 0.8 * y[i];
    }
    if (pos == 0 || pos == 80) continue;
    const auto e = equal_error_rate(s, y);
    const double step = std::max(1.0 / static_cast<double>(pos), 1.0 / static_cast<double>(80 - pos));
    EXPECT_LE(std::abs(e.fpr - e.fnr), step + 1e-12);
    EXPECT_NEAR(e.eer, (e.fpr + e.fnr) / 2.0, 1e-15);
  }
}

TEST(Json, CountsRecomputeToReportedMetrics) {
  SplitMix64 rng(4);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> p(50);
    std::vector<int> y(50);
    for (std::size_t i = 0; i < 50; ++i) {
      y[i] = static_cast<int>(rng.below(2));
      p[i] = rng.uniform();
    }
    y[0] = 0;
    y[1] = 1;
    auto r = evaluate(p, y);
    r.model_id = "gbdt";
    r.dataset_id = "d";
    const auto doc = to_json(r);
    const auto back = report_from_json(doc);
    const auto again = EvalReport::from_counts(back.counts);
    EXPECT_NEAR(again.spoof.precision, doc.at("spoof").at("precision").get<double>(), 1e-12);
    EXPECT_NEAR(again.spoof.recall, doc.at("spoof").at("recall").get<double>(), 1e-12);
    EXPECT_NEAR(again.spoof.f1, doc.at("spoof").at("f1").get<double>(), 1e-12);
    EXPECT_NEAR(again.accuracy, doc.at("accuracy").get<double>(), 1e-12);
    EXPECT_EQ(back.model_id, "gbdt");
    EXPECT_EQ(*back.roc_auc, *r.roc_auc);
  }
}
