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

// Random valid instances of every file format, plus a fuzz corpus for the
// detection parser.

#pragma once

#include <random>
#include <string>
#include <vector>

#include "countpath/countpath.hpp"

namespace countpath::testing {

using Gen = std::mt19937_64;

inline double unit(Gen& g) { return std::uniform_real_distribution<double>(0.0, 1.0)(g); }
inline int between(Gen& g, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(g);
}

inline std::string random_id(Gen& g, const std::string& prefix = "s") {
  static const char kChars[] = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_.";
  std::string s = prefix;
  const int n = between(g, 1, 12);
  for (int i = 0; i < n; ++i) s += kChars[between(g, 0, sizeof(kChars) - 2)];
  return s;
}

inline BoundingBox random_box(Gen& g) {
  for (;;) {
    const double a = unit(g), b = unit(g), c = unit(g), d = unit(g);
    if (auto box = BoundingBox::try_make(std::min(a, b), std::min(c, d), std::max(a, b),
                                         std::max(c, d))) {
      return *box;
    }
  }
}

inline DetectionLine random_detection_line(Gen& g) {
  const auto b = random_box(g);
  // Mix exact short decimals with full-precision doubles.
  auto maybe_short = [&](double v) { return between(g, 0, 3) == 0 ? std::round(v * 100) / 100 : v; };
  return DetectionLine{between(g, 0, 1), maybe_short(b.center_x()), maybe_short(b.center_y()),
                       std::max(1e-6, maybe_short(b.width())),
                       std::max(1e-6, maybe_short(b.height())), unit(g)};
}

inline std::vector<DetectionLine> random_detection_lines(Gen& g) {
  std::vector<DetectionLine> out(between(g, 0, 30));
  for (auto& l : out) l = random_detection_line(g);
  return out;
}

inline ClassifierOutput random_classifier(Gen& g) {
  ClassifierOutput c;
  if (between(g, 0, 4)) c.sets = ClassLabel(between(g, 1, 10));
  if (between(g, 0, 4)) c.fragments = ClassLabel(between(g, 1, 10));
  return c;
}

inline Manifest random_manifest(Gen& g) {
  Manifest m;
  if (between(g, 0, 1)) m.dataset_id = random_id(g, "ds");
  m.split = static_cast<Split>(between(g, 0, 3));
  const int n = between(g, 0, 40);
  for (int i = 0; i < n; ++i) {
    ManifestEntry e;
    e.slide_id = random_id(g) + "-" + std::to_string(i);
    if (between(g, 0, 3)) e.thumbnail_path = "thumbs/" + e.slide_id + ".png";
    if (between(g, 0, 3)) e.truth_label = ClassLabel(between(g, 1, 10));
    if (between(g, 0, 3)) e.truth_set_count = between(g, 1, 6);
    m.entries.push_back(std::move(e));
  }
  return m;
}

inline std::vector<MacroReportEntry> random_macro(Gen& g) {
  std::vector<MacroReportEntry> out;
  const int n = between(g, 0, 40);
  for (int i = 0; i < n; ++i) {
    out.push_back({random_id(g) + "-" + std::to_string(i), ClassLabel(between(g, 1, 10)),
                   between(g, 1, 8)});
  }
  return out;
}

inline RaterTable random_rater_table(Gen& g) {
  const int n = between(g, 2, 30), k = between(g, 2, 8);
  std::vector<std::string> items, raters;
  std::vector<std::vector<ClassLabel>> labels;
  for (int i = 0; i < n; ++i) items.push_back(random_id(g, "item") + "-" + std::to_string(i));
  for (int r = 0; r < k; ++r) raters.push_back(random_id(g, "rater") + "-" + std::to_string(r));
  for (int i = 0; i < n; ++i) {
    std::vector<ClassLabel> row;
    for (int r = 0; r < k; ++r) row.emplace_back(between(g, 1, 10));
    labels.push_back(std::move(row));
  }
  return RaterTable(items, raters, labels);
}

inline SlideVerdict random_verdict(Gen& g, int index) {
  SlideVerdict v;
  v.slide_id = random_id(g) + "-" + std::to_string(index);
  if (between(g, 0, 3)) {
    v.outcome = Accepted{ClassLabel(between(g, 1, 10))};
  } else {
    v.outcome = Rejected{static_cast<RejectionReason>(between(g, 0, 3))};
  }
  auto& d = v.diagnostics;
  d.n_sets_detected = between(g, 0, 8);
  d.n_sets_after_suppression = between(g, 0, d.n_sets_detected);
  if (between(g, 0, 1)) d.n_sets_classifier = between(g, 1, 10);
  d.n_sets_retained = between(g, 0, d.n_sets_after_suppression);
  if (between(g, 0, 1)) {
    d.n_fragments = between(g, 0, 40);
    d.raw_ratio = unit(g) * 10;
  }
  for (int i = 0; i < d.n_sets_retained; ++i) {
    d.per_crop_counts.push_back(between(g, 0, 12));
    d.retained_set_boxes.push_back(random_box(g));
  }
  return v;
}

inline RunRecord random_run_record(Gen& g) {
  RunRecord r;
  r.run_id = random_id(g, "run-");
  r.created_at = "2026-0" + std::to_string(between(g, 1, 9)) + "-1" +
                 std::to_string(between(g, 0, 9)) + "T12:00:00Z";
  r.mode = static_cast<PipelineMode>(between(g, 0, 2));
  r.policy = static_cast<RejectionPolicy>(between(g, 0, 2));
  r.config.set_confidence_threshold = unit(g);
  r.config.fragment_confidence_threshold = unit(g);
  if (between(g, 0, 1)) r.config.set_overlap = OverlapRule::iou_above(0.01 + 0.9 * unit(g));
  if (between(g, 0, 1)) r.config.fragment_overlap = OverlapRule::iou_above(0.01 + 0.9 * unit(g));
  r.config.crop_output_side = between(g, 64, 1024);
  r.manifest_id = random_id(g, "m");
  const int n = between(g, 0, 25);
  for (int i = 0; i < n; ++i) r.verdicts.push_back(random_verdict(g, i));
  return r;
}

/// The i-th fuzz input: valid text with random byte edits, token soup, or
/// raw bytes.
inline std::string fuzz_case(Gen& g) {
  static const std::vector<std::string> kTokens = {
      "0", "1", "2", "-1", "0.5", "1e308", "-1e308", "nan", "inf", "-inf", "1e-320", "0x1p3",
      "+0.5", ".5", "5.", "1,5", "\t", " ", "\r", "\n", "\r\n", std::string(1, '\0'), "99999999999999999999",
      "1.7976931348623157e308", "abc", "#", "e", "--1", "0.0000000000000000000001"};
  std::string s;
  switch (between(g, 0, 2)) {
    case 0: {
      Gen inner(g());
      s = format_detection_lines(random_detection_lines(inner));
      const int edits = between(g, 1, 8);
      for (int e = 0; e < edits && !s.empty(); ++e) {
        const auto pos = static_cast<std::size_t>(between(g, 0, static_cast<int>(s.size()) - 1));
        switch (between(g, 0, 2)) {
          case 0: s[pos] = static_cast<char>(between(g, 0, 255)); break;
          case 1: s.erase(pos, 1); break;
          default: s.insert(pos, kTokens[between(g, 0, static_cast<int>(kTokens.size()) - 1)]);
        }
      }
      break;
    }
    case 1: {
      const int n = between(g, 0, 60);
      for (int i = 0; i < n; ++i) {
        s += kTokens[between(g, 0, static_cast<int>(kTokens.size()) - 1)];
        s += between(g, 0, 5) ? " " : "\n";
      }
      break;
    }
    default: {
      const int n = between(g, 0, 200);
      for (int i = 0; i < n; ++i) s += static_cast<char>(between(g, 0, 255));
    }
  }
  return s;
}

}  // namespace countpath::testing
