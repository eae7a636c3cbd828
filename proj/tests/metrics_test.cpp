// Copyright 2026 The CountPath Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "countpath/metrics.hpp"
#include "oracles.hpp"

namespace countpath {
namespace {

std::vector<ClassLabel> L(std::initializer_list<int> v) { return to_labels(std::vector<int>(v)); }

TEST(Mae, Examples) {
  EXPECT_DOUBLE_EQ(mean_absolute_error(L({1, 5, 9}), L({1, 5, 9})), 0.0);
  EXPECT_DOUBLE_EQ(mean_absolute_error(L({2, 4}), L({3, 4})), 0.5);
  EXPECT_DOUBLE_EQ(mean_absolute_error(L({10}), L({1})), 9.0);
  EXPECT_THROW(mean_absolute_error(L({}), L({})), ContractViolation);
  EXPECT_THROW(mean_absolute_error(L({1}), L({1, 2})), ContractViolation);
}

TEST(RSquared, Examples) {
  EXPECT_DOUBLE_EQ(r_squared(L({1, 2, 3}), L({1, 2, 3})), 1.0);
  EXPECT_DOUBLE_EQ(r_squared(L({2, 2, 2}), L({1, 2, 3})), 0.0);
  EXPECT_DOUBLE_EQ(r_squared(L({1, 2, 4}), L({1, 2, 3})), 0.5);
  EXPECT_THROW(r_squared(L({1, 2}), L({3, 3})), UndefinedStatistic);
  EXPECT_THROW(r_squared(L({1}), L({3})), UndefinedStatistic);
}

TEST(Accuracy, Examples) {
  EXPECT_DOUBLE_EQ(accuracy(L({1, 2}), L({1, 2})), 1.0);
  EXPECT_DOUBLE_EQ(accuracy(L({1, 2}), L({1, 3})), 0.5);
  std::vector<int> p(675, 3), t(675, 3);
  for (int i = 0; i < 49; ++i) p[i] = 4;
  const double acc = accuracy(to_labels(p), to_labels(t));
  EXPECT_DOUBLE_EQ(acc, 626.0 / 675.0);
  EXPECT_NEAR(acc, 0.927, 0.0005);
}

TEST(WeightedPrf, Examples) {
  const auto perfect = weighted_prf(L({1, 4, 7}), L({1, 4, 7}));
  EXPECT_DOUBLE_EQ(perfect.precision, 1.0);
  EXPECT_DOUBLE_EQ(perfect.recall, 1.0);
  EXPECT_DOUBLE_EQ(perfect.f1, 1.0);
  const auto single = weighted_prf(L({5, 5, 5}), L({5, 5, 5}));
  EXPECT_DOUBLE_EQ(single.f1, 1.0);

  // Two classes with supports {3,1}; values from a confusion matrix worked
  // by hand: class 2 P=1 R=2/3, class 5 P=1/2 R=1.
  const auto two = weighted_prf(L({2, 2, 5, 5}), L({2, 2, 2, 5}));
  EXPECT_NEAR(two.precision, 0.875, 1e-12);
  EXPECT_NEAR(two.recall, 0.75, 1e-12);
  EXPECT_NEAR(two.f1, 0.7666666666666667, 1e-12);
  EXPECT_EQ(two.zero_precision_classes, 0);

  // Class 2 is never predicted correctly but class 3 is predicted without
  // support; class 5 is untouched.
  const auto skew = weighted_prf(L({2, 3, 3, 5}), L({2, 2, 2, 5}));
  EXPECT_NEAR(skew.precision, 1.0, 1e-12);
  EXPECT_NEAR(skew.recall, 0.5, 1e-12);
  EXPECT_NEAR(skew.f1, 0.625, 1e-12);

  const auto zero = weighted_prf(L({3, 3}), L({2, 3}));
  EXPECT_EQ(zero.zero_precision_classes, 1);
}

TEST(MetricsProperties, MatchOracleAndRecallEqualsAccuracy) {
  std::mt19937_64 rng(123);
  std::uniform_int_distribution<int> len(2, 60), cls(1, 10);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = len(rng);
    std::vector<int> p(n), t(n);
    for (int i = 0; i < n; ++i) {
      t[i] = cls(rng);
      p[i] = (rng() % 3 == 0) ? cls(rng) : t[i];
    }
    const auto pl = to_labels(p), tl = to_labels(t);
    EXPECT_NEAR(mean_absolute_error(pl, tl), oracle::mae(p, t), 1e-9);
    EXPECT_NEAR(accuracy(pl, tl), oracle::accuracy(p, t), 1e-9);
    const auto prf = weighted_prf(pl, tl);
    const auto want = oracle::weighted_prf(p, t);
    EXPECT_NEAR(prf.precision, want.precision, 1e-9);
    EXPECT_NEAR(prf.recall, want.recall, 1e-9);
    EXPECT_NEAR(prf.f1, want.f1, 1e-9);
    EXPECT_NEAR(prf.recall, accuracy(pl, tl), 1e-12);
    bool constant = true;
    for (int v : t) constant = constant && v == t[0];
    if (!constant) EXPECT_NEAR(r_squared(pl, tl), oracle::r2(p, t), 1e-9);
  }
}

TEST(MetricsProperties, InvariantUnderJointPermutation) {
  std::mt19937_64 rng(8);
  std::vector<int> p = {1, 2, 3, 3, 5, 7, 10, 2}, t = {1, 3, 3, 4, 5, 7, 9, 2};
  const auto base = evaluate(to_labels(p), to_labels(t));
  for (int i = 0; i < 20; ++i) {
    std::vector<std::size_t> idx(p.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<int> pp, tt;
    for (auto k : idx) {
      pp.push_back(p[k]);
      tt.push_back(t[k]);
    }
    const auto m = evaluate(to_labels(pp), to_labels(tt));
    EXPECT_NEAR(m.mae, base.mae, 1e-12);
    EXPECT_NEAR(*m.r_squared, *base.r_squared, 1e-12);
    EXPECT_NEAR(m.f1, base.f1, 1e-12);
  }
}

SlideVerdict accepted(int label) {
  SlideVerdict v;
  v.slide_id = "a";
  v.outcome = Accepted{ClassLabel(label)};
  return v;
}

SlideVerdict rejected() {
  SlideVerdict v;
  v.slide_id = "r";
  v.outcome = Rejected{RejectionReason::InconsistentCrops};
  return v;
}

TEST(EvaluateWithRejection, RejectionRateAndAcceptedOnlyMetrics) {
  std::vector<SlideVerdict> verdicts;
  std::vector<ClassLabel> truths;
  for (int i = 0; i < 701; ++i) {
    const int truth = 1 + i % 10;
    truths.emplace_back(truth);
    verdicts.push_back(i % 27 == 5 && i < 27 * 26 ? rejected() : accepted(truth));
  }
  const auto s = evaluate_with_rejection(verdicts, truths);
  EXPECT_EQ(s.n_total, 701);
  EXPECT_EQ(s.n_rejected, 26);
  EXPECT_NEAR(s.rejection_rate * 100.0, 3.71, 0.005);
  ASSERT_TRUE(s.metrics);
  EXPECT_EQ(s.metrics->n_evaluated, 675);
  EXPECT_DOUBLE_EQ(s.metrics->accuracy, 1.0);
}

TEST(EvaluateWithRejection, DegenerateCases) {
  const std::vector<SlideVerdict> none = {accepted(2), accepted(3)};
  const auto plain = evaluate_with_rejection(none, L({2, 4}));
  EXPECT_EQ(plain.rejection_rate, 0.0);
  EXPECT_EQ(*plain.metrics, evaluate(L({2, 3}), L({2, 4})));

  const std::vector<SlideVerdict> all = {rejected(), rejected()};
  const auto s = evaluate_with_rejection(all, L({2, 4}));
  EXPECT_EQ(s.rejection_rate, 1.0);
  EXPECT_FALSE(s.metrics);
  EXPECT_EQ(s.n_rejected, 2);

  EXPECT_THROW(evaluate_with_rejection(all, L({1})), ContractViolation);
}

TEST(Evaluate, RSquaredAbsentForConstantTruths) {
  const auto m = evaluate(L({3, 4}), L({3, 3}));
  EXPECT_FALSE(m.r_squared);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
}

}  // namespace
}  // namespace countpath
