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

// Inter-rater agreement (Fleiss' kappa, intraclass correlation) and
// per-rater scoring against ground truth.

#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "countpath/errors.hpp"
#include "countpath/geometry.hpp"
#include "countpath/metrics.hpp"

namespace countpath {

/// Items × raters matrix of labels. Complete, with at least two items and
/// two raters.
class RaterTable {
 public:
  RaterTable(std::vector<std::string> item_ids, std::vector<std::string> raters,
             std::vector<std::vector<ClassLabel>> labels)
      : item_ids_(std::move(item_ids)),
        raters_(std::move(raters)),
        labels_(std::move(labels)) {
    if (item_ids_.size() < 2) throw ContractViolation("rater table needs >= 2 items");
    if (raters_.size() < 2) throw ContractViolation("rater table needs >= 2 raters");
    if (labels_.size() != item_ids_.size()) {
      throw ContractViolation("rater table row count does not match items");
    }
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i].size() != raters_.size()) {
        throw ContractViolation("rater table row " + item_ids_[i] +
                                " is incomplete");
      }
    }
  }

  static RaterTable from_ints(const std::vector<std::vector<int>>& rows) {
    std::vector<std::string> items;
    std::vector<std::vector<ClassLabel>> labels;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      items.push_back("item" + std::to_string(i + 1));
      labels.push_back(to_labels(rows[i]));
    }
    std::vector<std::string> raters;
    for (std::size_t r = 0; r < (rows.empty() ? 0 : rows[0].size()); ++r) {
      raters.push_back("rater" + std::to_string(r + 1));
    }
    return RaterTable(std::move(items), std::move(raters), std::move(labels));
  }

  std::size_t n_items() const { return item_ids_.size(); }
  std::size_t n_raters() const { return raters_.size(); }
  const std::vector<std::string>& item_ids() const { return item_ids_; }
  const std::vector<std::string>& raters() const { return raters_; }
  const std::vector<std::vector<ClassLabel>>& labels() const { return labels_; }
  ClassLabel at(std::size_t item, std::size_t rater) const {
    return labels_[item][rater];
  }

  std::vector<ClassLabel> rater_column(std::size_t rater) const {
    std::vector<ClassLabel> col;
    col.reserve(labels_.size());
    for (const auto& row : labels_) col.push_back(row[rater]);
    return col;
  }

  friend bool operator==(const RaterTable&, const RaterTable&) = default;

 private:
  std::vector<std::string> item_ids_;
  std::vector<std::string> raters_;
  std::vector<std::vector<ClassLabel>> labels_;
};

/// Fleiss' kappa over the fixed categories 1..10.
inline double fleiss_kappa(const RaterTable& t) {
  constexpr int kCategories = ClassLabel::kMax + 1;
  const double n = static_cast<double>(t.n_items());
  const double r = static_cast<double>(t.n_raters());

  std::array<double, kCategories> category_totals{};
  double observed = 0.0;
  for (const auto& row : t.labels()) {
    std::array<double, kCategories> counts{};
    for (const auto& label : row) counts[label.value()] += 1.0;
    double sum_sq = 0.0;
    for (int c = ClassLabel::kMin; c < kCategories; ++c) {
      sum_sq += counts[c] * counts[c];
      category_totals[c] += counts[c];
    }
    observed += (sum_sq - r) / (r * (r - 1.0));
  }
  observed /= n;

  double expected = 0.0;
  for (int c = ClassLabel::kMin; c < kCategories; ++c) {
    const double p = category_totals[c] / (n * r);
    expected += p * p;
  }
  if (expected >= 1.0) {
    throw UndefinedStatistic("Fleiss' kappa undefined: a single category");
  }
  return (observed - expected) / (1.0 - expected);
}

/// Shrout–Fleiss intraclass correlation forms.
enum class IccForm {
  OneWaySingle,              // ICC(1,1)
  TwoWayRandomSingle,        // ICC(2,1), absolute agreement
  TwoWayMixedSingle,         // ICC(3,1), consistency
  OneWayAverage,             // ICC(1,k)
  TwoWayRandomAverage,       // ICC(2,k)
  TwoWayMixedAverage,        // ICC(3,k)
};

inline const char* to_string(IccForm form) {
  switch (form) {
    case IccForm::OneWaySingle: return "ICC(1,1)";
    case IccForm::TwoWayRandomSingle: return "ICC(2,1)";
    case IccForm::TwoWayMixedSingle: return "ICC(3,1)";
    case IccForm::OneWayAverage: return "ICC(1,k)";
    case IccForm::TwoWayRandomAverage: return "ICC(2,k)";
    case IccForm::TwoWayMixedAverage: return "ICC(3,k)";
  }
  return "?";
}

struct MeanSquares {
  double rows = 0.0;     // between items
  double columns = 0.0;  // between raters
  double error = 0.0;    // residual
  double within = 0.0;   // within items (columns + error pooled)
};

inline MeanSquares mean_squares(const RaterTable& t) {
  const std::size_t n = t.n_items();
  const std::size_t k = t.n_raters();
  std::vector<double> row_mean(n, 0.0);
  std::vector<double> col_mean(k, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double x = t.at(i, j).value();
      row_mean[i] += x;
      col_mean[j] += x;
      grand += x;
    }
  }
  for (auto& m : row_mean) m /= static_cast<double>(k);
  for (auto& m : col_mean) m /= static_cast<double>(n);
  grand /= static_cast<double>(n * k);

  double ss_rows = 0.0;
  for (double m : row_mean) ss_rows += (m - grand) * (m - grand);
  ss_rows *= static_cast<double>(k);
  double ss_cols = 0.0;
  for (double m : col_mean) ss_cols += (m - grand) * (m - grand);
  ss_cols *= static_cast<double>(n);
  double ss_error = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double e = t.at(i, j).value() - row_mean[i] - col_mean[j] + grand;
      ss_error += e * e;
    }
  }

  const double dn = static_cast<double>(n);
  const double dk = static_cast<double>(k);
  MeanSquares ms;
  ms.rows = ss_rows / (dn - 1.0);
  ms.columns = ss_cols / (dk - 1.0);
  ms.error = ss_error / ((dn - 1.0) * (dk - 1.0));
  ms.within = (ss_cols + ss_error) / (dn * (dk - 1.0));
  return ms;
}

/// Intraclass correlation from the two-way mean-squares decomposition.
/// Throws UndefinedStatistic when the items do not vary.
inline double icc(const RaterTable& t,
                  IccForm form = IccForm::TwoWayRandomSingle) {
  const auto ms = mean_squares(t);
  if (ms.rows <= 0.0) {
    throw UndefinedStatistic("ICC undefined: no between-item variance");
  }
  const double n = static_cast<double>(t.n_items());
  const double k = static_cast<double>(t.n_raters());
  switch (form) {
    case IccForm::OneWaySingle:
      return (ms.rows - ms.within) / (ms.rows + (k - 1.0) * ms.within);
    case IccForm::TwoWayRandomSingle:
      return (ms.rows - ms.error) /
             (ms.rows + (k - 1.0) * ms.error + k * (ms.columns - ms.error) / n);
    case IccForm::TwoWayMixedSingle:
      return (ms.rows - ms.error) / (ms.rows + (k - 1.0) * ms.error);
    case IccForm::OneWayAverage:
      return (ms.rows - ms.within) / ms.rows;
    case IccForm::TwoWayRandomAverage:
      return (ms.rows - ms.error) / (ms.rows + (ms.columns - ms.error) / n);
    case IccForm::TwoWayMixedAverage:
      return (ms.rows - ms.error) / ms.rows;
  }
  throw ContractViolation("unknown ICC form");
}

/// Sample mean and (n-1) standard deviation of one metric across raters.
struct Spread {
  double mean = 0.0;
  double stddev = 0.0;
  friend bool operator==(const Spread&, const Spread&) = default;
};

inline Spread spread(std::span<const double> values) {
  Spread s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() < 2) return s;
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  return s;
}

struct ObserverSummary {
  std::vector<Metrics> per_rater;
  Spread mae;
  std::optional<Spread> r_squared;  // absent if undefined for any rater
  Spread accuracy;
  Spread precision;
  Spread recall;
  Spread f1;
};

/// Scores every rater column against the truths.
inline ObserverSummary observer_evaluation(const RaterTable& t,
                                           std::span<const ClassLabel> truths) {
  if (truths.size() != t.n_items()) {
    throw ContractViolation("truth count does not match rater table items");
  }
  ObserverSummary out;
  for (std::size_t r = 0; r < t.n_raters(); ++r) {
    out.per_rater.push_back(evaluate(t.rater_column(r), truths));
  }
  auto collect = [&](auto field) {
    std::vector<double> v;
    for (const auto& m : out.per_rater) v.push_back(field(m));
    return spread(v);
  };
  out.mae = collect([](const Metrics& m) { return m.mae; });
  out.accuracy = collect([](const Metrics& m) { return m.accuracy; });
  out.precision = collect([](const Metrics& m) { return m.precision; });
  out.recall = collect([](const Metrics& m) { return m.recall; });
  out.f1 = collect([](const Metrics& m) { return m.f1; });
  bool all_r2 = true;
  for (const auto& m : out.per_rater) all_r2 = all_r2 && m.r_squared.has_value();
  if (all_r2) out.r_squared = collect([](const Metrics& m) { return *m.r_squared; });
  return out;
}

/// Informational Landis–Koch band for a kappa value.
inline const char* agreement_band(double kappa) {
  if (kappa < 0.0) return "poor";
  if (kappa <= 0.20) return "slight";
  if (kappa <= 0.40) return "fair";
  if (kappa <= 0.60) return "moderate";
  if (kappa <= 0.80) return "substantial";
  return "almost perfect";
}

}  // namespace countpath
