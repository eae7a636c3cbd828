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

// Counting metrics: MAE, R², accuracy and support-weighted
// precision/recall/F1, plus rejection-aware summaries.

#pragma once

#include <array>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <span>
#include <vector>

#include "countpath/errors.hpp"
#include "countpath/geometry.hpp"
#include "countpath/pipeline.hpp"

namespace countpath {

namespace detail {

inline void check_paired(std::size_t preds, std::size_t truths) {
  if (preds != truths) {
    throw ContractViolation("prediction/truth length mismatch: " +
                            std::to_string(preds) + " vs " +
                            std::to_string(truths));
  }
  if (preds == 0) throw ContractViolation("empty prediction list");
}

}  // namespace detail

inline std::vector<ClassLabel> to_labels(std::span<const int> values) {
  std::vector<ClassLabel> out;
  out.reserve(values.size());
  for (int v : values) out.emplace_back(v);
  return out;
}

inline double mean_absolute_error(std::span<const ClassLabel> preds,
                                  std::span<const ClassLabel> truths) {
  detail::check_paired(preds.size(), truths.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    sum += std::abs(preds[i].value() - truths[i].value());
  }
  return sum / static_cast<double>(preds.size());
}

/// Coefficient of determination about the truth mean. Throws
/// UndefinedStatistic for constant truths.
inline double r_squared(std::span<const ClassLabel> preds,
                        std::span<const ClassLabel> truths) {
  detail::check_paired(preds.size(), truths.size());
  if (preds.size() < 2) {
    throw UndefinedStatistic("R² needs at least two samples");
  }
  double mean = 0.0;
  for (const auto& t : truths) mean += t.value();
  mean /= static_cast<double>(truths.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double r = preds[i].value() - truths[i].value();
    const double d = truths[i].value() - mean;
    ss_res += r * r;
    ss_tot += d * d;
  }
  if (ss_tot == 0.0) throw UndefinedStatistic("R² undefined: constant truths");
  return 1.0 - ss_res / ss_tot;
}

inline double accuracy(std::span<const ClassLabel> preds,
                       std::span<const ClassLabel> truths) {
  detail::check_paired(preds.size(), truths.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == truths[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

struct WeightedPRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Classes with truth support but no predictions; their precision is 0.
  int zero_precision_classes = 0;
};

/// Per-class scores from the confusion matrix, averaged with weights equal
/// to each class's share of the truths.
inline WeightedPRF weighted_prf(std::span<const ClassLabel> preds,
                                std::span<const ClassLabel> truths) {
  detail::check_paired(preds.size(), truths.size());
  constexpr int kClasses = ClassLabel::kMax + 1;
  std::array<std::size_t, kClasses> support{};
  std::array<std::size_t, kClasses> predicted{};
  std::array<std::size_t, kClasses> hits{};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    ++support[truths[i].value()];
    ++predicted[preds[i].value()];
    if (preds[i] == truths[i]) ++hits[truths[i].value()];
  }

  WeightedPRF out;
  const double n = static_cast<double>(truths.size());
  for (int c = ClassLabel::kMin; c < kClasses; ++c) {
    if (support[c] == 0) continue;
    const double weight = static_cast<double>(support[c]) / n;
    const double recall =
        static_cast<double>(hits[c]) / static_cast<double>(support[c]);
    double precision = 0.0;
    if (predicted[c] == 0) {
      ++out.zero_precision_classes;
    } else {
      precision = static_cast<double>(hits[c]) / static_cast<double>(predicted[c]);
    }
    const double f1 = precision + recall > 0.0
                          ? 2.0 * precision * recall / (precision + recall)
                          : 0.0;
    out.precision += weight * precision;
    out.recall += weight * recall;
    out.f1 += weight * f1;
  }
  return out;
}

struct Metrics {
  double mae = 0.0;
  std::optional<double> r_squared;  // absent when undefined
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int n_evaluated = 0;
  int zero_precision_classes = 0;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

inline Metrics evaluate(std::span<const ClassLabel> preds,
                        std::span<const ClassLabel> truths) {
  Metrics m;
  m.mae = mean_absolute_error(preds, truths);
  try {
    m.r_squared = r_squared(preds, truths);
  } catch (const UndefinedStatistic&) {
    m.r_squared.reset();
  }
  m.accuracy = accuracy(preds, truths);
  const auto prf = weighted_prf(preds, truths);
  m.precision = prf.precision;
  m.recall = prf.recall;
  m.f1 = prf.f1;
  m.zero_precision_classes = prf.zero_precision_classes;
  m.n_evaluated = static_cast<int>(preds.size());
  return m;
}

struct EvalSummary {
  std::optional<Metrics> metrics;  // absent when nothing was accepted
  int n_total = 0;
  int n_rejected = 0;
  double rejection_rate = 0.0;

  friend bool operator==(const EvalSummary&, const EvalSummary&) = default;
};

/// Metrics over accepted verdicts only; rejection counts over all of them.
inline EvalSummary evaluate_with_rejection(std::span<const SlideVerdict> verdicts,
                                           std::span<const ClassLabel> truths) {
  if (verdicts.size() != truths.size()) {
    throw ContractViolation("verdict/truth length mismatch");
  }
  EvalSummary summary;
  summary.n_total = static_cast<int>(verdicts.size());
  std::vector<ClassLabel> preds;
  std::vector<ClassLabel> kept_truths;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    if (auto label = verdicts[i].label()) {
      preds.push_back(*label);
      kept_truths.push_back(truths[i]);
    } else {
      ++summary.n_rejected;
    }
  }
  summary.rejection_rate =
      summary.n_total == 0
          ? 0.0
          : static_cast<double>(summary.n_rejected) / summary.n_total;
  if (!preds.empty()) summary.metrics = evaluate(preds, kept_truths);
  return summary;
}

}  // namespace countpath
