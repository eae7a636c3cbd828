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

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "countpath/pipeline.hpp"
#include "countpath/run_record.hpp"
#include "countpath/tables.hpp"

namespace countpath {

enum class QcStatus { Match, Discrepancy, NeedsReview };

inline const char* to_string(QcStatus s) {
  switch (s) {
    case QcStatus::Match: return "match";
    case QcStatus::Discrepancy: return "discrepancy";
    case QcStatus::NeedsReview: return "needs_review";
  }
  return "?";
}

/// A machine verdict joined with the macroscopic report.
struct QCRecord {
  std::string slide_id;
  QcStatus status = QcStatus::NeedsReview;
  std::optional<int> predicted;         // accepted label
  std::optional<int> reported;          // report's fragments per set
  std::optional<int> reported_sets;
  std::optional<RejectionReason> rejection;
  bool missing_report = false;

  friend bool operator==(const QCRecord&, const QCRecord&) = default;
};

/// One record per verdict, in verdict order. Rejected slides always need
/// review; accepted slides without a report entry need review too.
inline std::vector<QCRecord> qc_compare(std::span<const SlideVerdict> verdicts,
                                        std::span<const MacroReportEntry> macro) {
  std::map<std::string, const MacroReportEntry*> by_id;
  for (const auto& e : macro) by_id[e.slide_id] = &e;

  std::vector<QCRecord> out;
  out.reserve(verdicts.size());
  for (const auto& v : verdicts) {
    QCRecord rec;
    rec.slide_id = v.slide_id;
    const auto it = by_id.find(v.slide_id);
    if (it != by_id.end()) {
      rec.reported = it->second->reported_fragments_per_set.value();
      rec.reported_sets = it->second->reported_sets;
    }
    if (auto reason = v.rejection()) {
      rec.rejection = reason;
      rec.status = QcStatus::NeedsReview;
    } else if (!rec.reported) {
      rec.predicted = v.label()->value();
      rec.missing_report = true;
      rec.status = QcStatus::NeedsReview;
    } else {
      rec.predicted = v.label()->value();
      rec.status = *rec.predicted == *rec.reported ? QcStatus::Match : QcStatus::Discrepancy;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

inline json qc_record_to_json(const QCRecord& r) {
  return json{{"slide_id", r.slide_id},
              {"status", to_string(r.status)},
              {"predicted", optional_to_json(r.predicted)},
              {"reported", optional_to_json(r.reported)},
              {"reported_sets", optional_to_json(r.reported_sets)},
              {"rejection_reason",
               r.rejection ? json(to_string(*r.rejection))
                           : (r.missing_report ? json("missing_report") : json(nullptr))}};
}

struct QcTally {
  int match = 0;
  int discrepancy = 0;
  int needs_review = 0;
};

inline QcTally tally(std::span<const QCRecord> records) {
  QcTally t;
  for (const auto& r : records) {
    switch (r.status) {
      case QcStatus::Match: ++t.match; break;
      case QcStatus::Discrepancy: ++t.discrepancy; break;
      case QcStatus::NeedsReview: ++t.needs_review; break;
    }
  }
  return t;
}

}  // namespace countpath
