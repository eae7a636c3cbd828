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

// Comma-separated tables: slide manifests, macroscopic reports and rater
// tables. Every table starts with a mandatory header row. Fields are
// unquoted; surrounding spaces are trimmed.

#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "countpath/agreement.hpp"
#include "countpath/detection_io.hpp"
#include "countpath/errors.hpp"
#include "countpath/geometry.hpp"

namespace countpath {

namespace detail {

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> cells;
  std::vector<std::size_t> columns;  // 1-based start column of each cell
};

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

/// Non-blank lines split on commas. Lines starting with '#' are returned
/// through `comments` when given, else skipped.
inline std::vector<CsvRow> read_csv(std::string_view text,
                                    std::vector<std::string>* comments = nullptr) {
  std::vector<CsvRow> rows;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (trim(line).empty()) return;
    if (trim(line).front() == '#') {
      if (comments) comments->emplace_back(trim(line).substr(1));
      return;
    }
    CsvRow row;
    row.line = line_no;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      const auto cell = line.substr(start, comma == std::string_view::npos
                                               ? std::string_view::npos
                                               : comma - start);
      row.cells.emplace_back(trim(cell));
      row.columns.push_back(start + 1);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(row));
  });
  return rows;
}

inline void expect_header(const std::vector<CsvRow>& rows,
                          const std::vector<std::string>& header,
                          const std::string& source) {
  if (rows.empty()) throw ParseError(source, 1, 0, "missing header row");
  if (rows[0].cells != header) {
    std::string want;
    for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
    throw ParseError(source, rows[0].line, 0, "expected header `" + want + "`");
  }
}

inline void expect_width(const CsvRow& row, std::size_t width, const std::string& source) {
  if (row.cells.size() != width) {
    throw ParseError(source, row.line, 0,
                     "expected " + std::to_string(width) + " fields, got " +
                         std::to_string(row.cells.size()));
  }
}

inline long long cell_integer(const CsvRow& row, std::size_t col, const std::string& source) {
  const auto v = parse_integer(row.cells[col]);
  if (!v) {
    throw ParseError(source, row.line, row.columns[col],
                     "not an integer: '" + row.cells[col] + "'");
  }
  return *v;
}

}  // namespace detail

enum class Split { Train, Val, Test, Custom };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    case Split::Custom: return "custom";
  }
  return "custom";
}

inline std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  if (s == "custom") return Split::Custom;
  return std::nullopt;
}

struct ManifestEntry {
  std::string slide_id;
  std::string thumbnail_path;
  std::optional<ClassLabel> truth_label;
  std::optional<int> truth_set_count;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Slide list of one dataset split.
///
///   #dataset_id=synthetic
///   #split=test
///   slide_id,thumbnail_path,truth_label,truth_set_count
///   synth-1,synth-1.png,3,2
///
/// Metadata lines are optional; truth cells may be empty.
struct Manifest {
  std::string dataset_id;
  Split split = Split::Custom;
  std::vector<ManifestEntry> entries;

  const ManifestEntry* find(std::string_view slide_id) const {
    for (const auto& e : entries) {
      if (e.slide_id == slide_id) return &e;
    }
    return nullptr;
  }

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

inline const std::vector<std::string>& manifest_header() {
  static const std::vector<std::string> h = {"slide_id", "thumbnail_path", "truth_label",
                                             "truth_set_count"};
  return h;
}

inline Manifest parse_manifest(std::string_view text, const std::string& source = {}) {
  std::vector<std::string> comments;
  const auto rows = detail::read_csv(text, &comments);
  detail::expect_header(rows, manifest_header(), source);

  Manifest m;
  for (const auto& c : comments) {
    const auto eq = c.find('=');
    if (eq == std::string::npos) continue;
    const auto key = detail::trim(std::string_view(c).substr(0, eq));
    const auto value = std::string(detail::trim(std::string_view(c).substr(eq + 1)));
    if (key == "dataset_id") m.dataset_id = value;
    if (key == "split") {
      const auto s = parse_split(value);
      if (!s) throw ParseError(source, 0, 0, "unknown split '" + value + "'");
      m.split = *s;
    }
  }

  std::set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    detail::expect_width(row, 4, source);
    ManifestEntry e;
    e.slide_id = row.cells[0];
    if (e.slide_id.empty()) throw ParseError(source, row.line, 1, "empty slide_id");
    if (!seen.insert(e.slide_id).second) {
      throw ParseError(source, row.line, 1, "duplicate slide_id " + e.slide_id);
    }
    e.thumbnail_path = row.cells[1];
    if (!row.cells[2].empty()) {
      const auto v = detail::cell_integer(row, 2, source);
      if (v < ClassLabel::kMin || v > ClassLabel::kMax) {
        throw ParseError(source, row.line, row.columns[2], "truth_label outside 1..10");
      }
      e.truth_label = ClassLabel(static_cast<int>(v));
    }
    if (!row.cells[3].empty()) {
      const auto v = detail::cell_integer(row, 3, source);
      if (v < 1) throw ParseError(source, row.line, row.columns[3], "truth_set_count < 1");
      e.truth_set_count = static_cast<int>(v);
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

inline std::string format_manifest(const Manifest& m) {
  std::string out;
  if (!m.dataset_id.empty()) out += "#dataset_id=" + m.dataset_id + "\n";
  out += std::string("#split=") + to_string(m.split) + "\n";
  out += "slide_id,thumbnail_path,truth_label,truth_set_count\n";
  for (const auto& e : m.entries) {
    out += e.slide_id + "," + e.thumbnail_path + ",";
    if (e.truth_label) out += std::to_string(e.truth_label->value());
    out += ",";
    if (e.truth_set_count) out += std::to_string(*e.truth_set_count);
    out += "\n";
  }
  return out;
}

struct MacroReportEntry {
  std::string slide_id;
  ClassLabel reported_fragments_per_set{1};
  int reported_sets = 1;

  friend bool operator==(const MacroReportEntry&, const MacroReportEntry&) = default;
};

struct MacroReport {
  std::vector<MacroReportEntry> entries;
  std::vector<std::string> warnings;
};

/// `slide_id,fragments,sets`. Fragment counts above 9 become class 10 with
/// a warning.
inline MacroReport parse_macro_report(std::string_view text, const std::string& source = {}) {
  const auto rows = detail::read_csv(text);
  detail::expect_header(rows, {"slide_id", "fragments", "sets"}, source);
  MacroReport report;
  std::set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    detail::expect_width(row, 3, source);
    MacroReportEntry e;
    e.slide_id = row.cells[0];
    if (e.slide_id.empty()) throw ParseError(source, row.line, 1, "empty slide_id");
    if (!seen.insert(e.slide_id).second) {
      throw ParseError(source, row.line, 1, "duplicate slide_id " + e.slide_id);
    }
    const auto frags = detail::cell_integer(row, 1, source);
    if (frags < 1) throw ParseError(source, row.line, row.columns[1], "fragments < 1");
    if (frags > 10) {
      report.warnings.push_back(
          (source.empty() ? std::string("<input>") : source) + ":" +
          std::to_string(row.line) + ": " + std::to_string(frags) +
          " fragments recorded as class 10");
    }
    e.reported_fragments_per_set = ClassLabel(static_cast<int>(std::min<long long>(frags, 10)));
    const auto sets = detail::cell_integer(row, 2, source);
    if (sets < 1) throw ParseError(source, row.line, row.columns[2], "sets < 1");
    e.reported_sets = static_cast<int>(sets);
    report.entries.push_back(std::move(e));
  }
  return report;
}

inline std::string format_macro_report(const std::vector<MacroReportEntry>& entries) {
  std::string out = "slide_id,fragments,sets\n";
  for (const auto& e : entries) {
    out += e.slide_id + "," + std::to_string(e.reported_fragments_per_set.value()) + "," +
           std::to_string(e.reported_sets) + "\n";
  }
  return out;
}

/// `item_id,<rater>,<rater>,...`; every cell a label in 1..10.
inline RaterTable parse_rater_table(std::string_view text, const std::string& source = {}) {
  const auto rows = detail::read_csv(text);
  if (rows.empty()) throw ParseError(source, 1, 0, "missing header row");
  const auto& header = rows[0];
  if (header.cells.empty() || header.cells[0] != "item_id") {
    throw ParseError(source, header.line, 1, "header must start with item_id");
  }
  std::vector<std::string> raters(header.cells.begin() + 1, header.cells.end());
  for (std::size_t c = 0; c < raters.size(); ++c) {
    if (raters[c].empty()) {
      throw ParseError(source, header.line, header.columns[c + 1], "empty rater name");
    }
  }
  if (raters.size() < 2) throw ParseError(source, header.line, 0, "need at least 2 raters");

  std::vector<std::string> items;
  std::vector<std::vector<ClassLabel>> labels;
  std::set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    detail::expect_width(row, raters.size() + 1, source);
    if (!seen.insert(row.cells[0]).second) {
      throw ParseError(source, row.line, 1, "duplicate item_id " + row.cells[0]);
    }
    items.push_back(row.cells[0]);
    std::vector<ClassLabel> line;
    for (std::size_t c = 1; c < row.cells.size(); ++c) {
      if (row.cells[c].empty()) {
        throw ParseError(source, row.line, row.columns[c], "missing label");
      }
      const auto v = detail::cell_integer(row, c, source);
      if (v < ClassLabel::kMin || v > ClassLabel::kMax) {
        throw ParseError(source, row.line, row.columns[c],
                         "label " + row.cells[c] + " outside 1..10");
      }
      line.emplace_back(static_cast<int>(v));
    }
    labels.push_back(std::move(line));
  }
  if (items.size() < 2) throw ParseError(source, header.line, 0, "need at least 2 items");
  return RaterTable(std::move(items), std::move(raters), std::move(labels));
}

inline std::string format_rater_table(const RaterTable& t) {
  std::string out = "item_id";
  for (const auto& r : t.raters()) out += "," + r;
  out += "\n";
  for (std::size_t i = 0; i < t.n_items(); ++i) {
    out += t.item_ids()[i];
    for (const auto& l : t.labels()[i]) out += "," + std::to_string(l.value());
    out += "\n";
  }
  return out;
}

}  // namespace countpath
