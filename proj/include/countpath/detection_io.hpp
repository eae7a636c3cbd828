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

// Detector interchange files: one box per line,
//
//   class_id cx cy w h conf
//
// whitespace separated, normalized to the image. class 0 is a set, class 1
// a fragment. Classifier outputs use a separate `key value` file:
//
//   sets 2
//   fragments 3

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "countpath/errors.hpp"
#include "countpath/geometry.hpp"

namespace countpath {

/// One line of a detection file, exactly as written.
struct DetectionLine {
  int class_id = 0;
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
  double conf = 0.0;

  friend bool operator==(const DetectionLine&, const DetectionLine&) = default;
};

namespace detail {

struct Token {
  std::string_view text;
  std::size_t column;  // 1-based
};

inline std::vector<Token> split_whitespace(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back({line.substr(start, i - start), start + 1});
  }
  return out;
}

/// Calls fn(line_number, line) for each line; strips a trailing CR.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(line_no, line);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_integer(std::string_view s) {
  long long v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

inline std::vector<DetectionLine> parse_detection_lines(std::string_view text,
                                                        const std::string& source = {}) {
  std::vector<DetectionLine> out;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto tokens = detail::split_whitespace(line);
    if (tokens.empty()) return;
    if (tokens.size() != 6) {
      throw ParseError(source, line_no, tokens.size() > 6 ? tokens[6].column : 0,
                       "expected 6 fields `class cx cy w h conf`, got " +
                           std::to_string(tokens.size()));
    }
    const auto cls = detail::parse_integer(tokens[0].text);
    if (!cls) throw ParseError(source, line_no, tokens[0].column, "class id is not an integer");
    if (*cls != 0 && *cls != 1) {
      throw ParseError(source, line_no, tokens[0].column,
                       "unknown class id " + std::string(tokens[0].text));
    }
    double values[5];
    for (int k = 0; k < 5; ++k) {
      const auto v = detail::parse_double(tokens[k + 1].text);
      if (!v) {
        throw ParseError(source, line_no, tokens[k + 1].column,
                         "not a finite decimal: '" + std::string(tokens[k + 1].text) + "'");
      }
      values[k] = *v;
    }
    out.push_back({static_cast<int>(*cls), values[0], values[1], values[2], values[3],
                   values[4]});
  });
  return out;
}

inline std::string format_detection_lines(const std::vector<DetectionLine>& lines) {
  std::string out;
  for (const auto& l : lines) {
    out += std::to_string(l.class_id);
    for (double v : {l.cx, l.cy, l.w, l.h, l.conf}) {
      out += ' ';
      out += detail::format_double(v);
    }
    out += '\n';
  }
  return out;
}

struct ParsedDetections {
  std::vector<Detection> detections;
  int clamped_values = 0;  // coordinates or confidences pulled into [0,1]
};

/// Parses a detection file into corner-form detections. Out-of-range
/// coordinates and confidences are clamped and counted; non-positive sizes
/// and boxes that vanish after clamping are errors.
inline ParsedDetections parse_detection_file(std::string_view text,
                                             const std::string& source = {}) {
  ParsedDetections out;
  std::size_t index = 0;
  const auto lines = parse_detection_lines(text, source);
  // Line numbers for errors below; blank lines are skipped by the parser.
  std::vector<std::size_t> line_numbers;
  detail::for_each_line(text, [&](std::size_t n, std::string_view line) {
    if (!detail::split_whitespace(line).empty()) line_numbers.push_back(n);
  });
  for (const auto& l : lines) {
    const std::size_t line_no = line_numbers[index++];
    if (l.w <= 0.0 || l.h <= 0.0) {
      throw ParseError(source, line_no, 0, "inverted or empty box (w or h <= 0)");
    }
    auto clamp = [&](double v) {
      if (v < 0.0 || v > 1.0) {
        ++out.clamped_values;
        return std::clamp(v, 0.0, 1.0);
      }
      return v;
    };
    const double x0 = clamp(l.cx - 0.5 * l.w);
    const double y0 = clamp(l.cy - 0.5 * l.h);
    const double x1 = clamp(l.cx + 0.5 * l.w);
    const double y1 = clamp(l.cy + 0.5 * l.h);
    const double conf = clamp(l.conf);
    const auto box = BoundingBox::try_make(x0, y0, x1, y1);
    if (!box) throw ParseError(source, line_no, 0, "box lies outside the image");
    out.detections.push_back(Detection{
        l.class_id == 0 ? DetectionKind::Set : DetectionKind::Fragment, *box, conf,
        (source.empty() ? std::string("line") : source + ":") + std::to_string(line_no)});
  }
  return out;
}

inline DetectionLine to_detection_line(const Detection& d) {
  return DetectionLine{d.kind == DetectionKind::Set ? 0 : 1,
                       d.box.center_x(),
                       d.box.center_y(),
                       d.box.width(),
                       d.box.height(),
                       d.confidence};
}

inline std::string format_detection_file(const std::vector<Detection>& dets) {
  std::vector<DetectionLine> lines;
  lines.reserve(dets.size());
  for (const auto& d : dets) lines.push_back(to_detection_line(d));
  return format_detection_lines(lines);
}

struct ClassifierOutput {
  std::optional<ClassLabel> sets;
  std::optional<ClassLabel> fragments;

  friend bool operator==(const ClassifierOutput&, const ClassifierOutput&) = default;
};

/// Values of 10 or more are clamped to 10 (class 10 means "more than 9").
inline ClassifierOutput parse_classifier_file(std::string_view text,
                                              const std::string& source = {}) {
  ClassifierOutput out;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto tokens = detail::split_whitespace(line);
    if (tokens.empty()) return;
    if (tokens.size() != 2) {
      throw ParseError(source, line_no, 0, "expected `sets N` or `fragments N`");
    }
    const auto v = detail::parse_integer(tokens[1].text);
    if (!v || *v < 1) {
      throw ParseError(source, line_no, tokens[1].column, "count must be a positive integer");
    }
    const ClassLabel label(static_cast<int>(std::min<long long>(*v, ClassLabel::kMax)));
    if (tokens[0].text == "sets") {
      out.sets = label;
    } else if (tokens[0].text == "fragments") {
      out.fragments = label;
    } else {
      throw ParseError(source, line_no, tokens[0].column,
                       "unknown key '" + std::string(tokens[0].text) + "'");
    }
  });
  return out;
}

inline std::string format_classifier_file(const ClassifierOutput& c) {
  std::string out;
  if (c.sets) out += "sets " + std::to_string(c.sets->value()) + "\n";
  if (c.fragments) out += "fragments " + std::to_string(c.fragments->value()) + "\n";
  return out;
}

}  // namespace countpath
