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

// JSON encodings of pipeline results and the persisted run record.
//
// A run record is one JSON document with sorted keys, a mandatory
// `format_version` and a `checksum` holding the SHA-256 of the compact
// encoding of every other field.

#pragma once

#include <openssl/evp.h>

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "countpath/errors.hpp"
#include "countpath/geometry.hpp"
#include "countpath/metrics.hpp"
#include "countpath/pipeline.hpp"

namespace countpath {

using json = nlohmann::json;

inline constexpr int kRunFormatVersion = 1;

inline std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

inline std::optional<PipelineMode> parse_mode(std::string_view s) {
  if (s == "detection") return PipelineMode::DetectionOnly;
  if (s == "classification") return PipelineMode::ClassificationOnly;
  if (s == "hybrid") return PipelineMode::Hybrid;
  return std::nullopt;
}

inline std::optional<RejectionPolicy> parse_policy(std::string_view s) {
  if (s == "none") return RejectionPolicy::NoRejection;
  if (s == "reject_non_integer") return RejectionPolicy::RejectNonInteger;
  if (s == "reject_inconsistent_crops") return RejectionPolicy::RejectInconsistentCrops;
  return std::nullopt;
}

inline std::optional<RejectionReason> parse_reason(std::string_view s) {
  for (auto r : {RejectionReason::NonIntegerRatio, RejectionReason::InconsistentCrops,
                 RejectionReason::NoSetsDetected, RejectionReason::NoFragmentsDetected}) {
    if (s == to_string(r)) return r;
  }
  return std::nullopt;
}

inline json box_to_json(const BoundingBox& b) {
  return json::array({b.x_min(), b.y_min(), b.x_max(), b.y_max()});
}

inline BoundingBox box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw IntegrityError("box must be [x0,y0,x1,y1]");
  return BoundingBox::make(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                           j[3].get<double>());
}

template <typename T>
json optional_to_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

inline json config_to_json(const PipelineConfig& c) {
  auto rule = [](const OverlapRule& r) {
    return r.is_strict() ? json("strict") : json(r.threshold());
  };
  return json{{"set_confidence_threshold", c.set_confidence_threshold},
              {"fragment_confidence_threshold", c.fragment_confidence_threshold},
              {"set_overlap", rule(c.set_overlap)},
              {"fragment_overlap", rule(c.fragment_overlap)},
              {"crop_output_side", c.crop_output_side},
              {"rounding", "half_up"}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline PipelineConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ContractViolation("config must be an object");
  PipelineConfig c;
  auto rule = [](const json& v) {
    if (v.is_string() && v.get<std::string>() == "strict") return OverlapRule::strict();
    if (v.is_number()) {
      const double t = v.get<double>();
      return t == 0.0 ? OverlapRule::strict() : OverlapRule::iou_above(t);
    }
    throw ContractViolation("overlap rule must be \"strict\" or an IoU threshold");
  };
  for (const auto& [key, value] : j.items()) {
    if (key == "set_confidence_threshold" && value.is_number()) {
      c.set_confidence_threshold = value.get<double>();
    } else if (key == "fragment_confidence_threshold" && value.is_number()) {
      c.fragment_confidence_threshold = value.get<double>();
    } else if (key == "set_overlap") {
      c.set_overlap = rule(value);
    } else if (key == "fragment_overlap") {
      c.fragment_overlap = rule(value);
    } else if (key == "crop_output_side" && value.is_number_integer()) {
      c.crop_output_side = value.get<int>();
    } else if (key == "rounding" && value == "half_up") {
    } else {
      throw ContractViolation("bad config field '" + key + "'");
    }
  }
  c.validate();
  return c;
}

inline json verdict_to_json(const SlideVerdict& v) {
  const auto& d = v.diagnostics;
  json boxes = json::array();
  for (const auto& b : d.retained_set_boxes) boxes.push_back(box_to_json(b));
  json diag{{"n_sets_detected", d.n_sets_detected},
            {"n_sets_after_suppression", d.n_sets_after_suppression},
            {"n_sets_classifier", optional_to_json(d.n_sets_classifier)},
            {"n_sets_retained", d.n_sets_retained},
            {"n_fragments", optional_to_json(d.n_fragments)},
            {"per_crop_counts", d.per_crop_counts},
            {"raw_ratio", optional_to_json(d.raw_ratio)},
            {"retained_set_boxes", boxes}};
  json out{{"slide_id", v.slide_id}, {"diagnostics", diag}};
  if (auto label = v.label()) {
    out["outcome"] = "accepted";
    out["label"] = label->value();
    out["reason"] = nullptr;
  } else {
    out["outcome"] = "rejected";
    out["label"] = nullptr;
    out["reason"] = to_string(*v.rejection());
  }
  return out;
}

inline SlideVerdict verdict_from_json(const json& j) {
  SlideVerdict v;
  v.slide_id = j.at("slide_id").get<std::string>();
  const auto outcome = j.at("outcome").get<std::string>();
  if (outcome == "accepted") {
    v.outcome = Accepted{ClassLabel(j.at("label").get<int>())};
  } else if (outcome == "rejected") {
    const auto reason = parse_reason(j.at("reason").get<std::string>());
    if (!reason) throw IntegrityError("unknown rejection reason");
    v.outcome = Rejected{*reason};
  } else {
    throw IntegrityError("unknown outcome '" + outcome + "'");
  }
  const auto& d = j.at("diagnostics");
  auto& diag = v.diagnostics;
  diag.n_sets_detected = d.at("n_sets_detected").get<int>();
  diag.n_sets_after_suppression = d.at("n_sets_after_suppression").get<int>();
  diag.n_sets_classifier = optional_from_json<int>(d.at("n_sets_classifier"));
  diag.n_sets_retained = d.at("n_sets_retained").get<int>();
  diag.n_fragments = optional_from_json<int>(d.at("n_fragments"));
  diag.per_crop_counts = d.at("per_crop_counts").get<std::vector<int>>();
  diag.raw_ratio = optional_from_json<double>(d.at("raw_ratio"));
  for (const auto& b : d.at("retained_set_boxes")) {
    diag.retained_set_boxes.push_back(box_from_json(b));
  }
  return v;
}

/// Metric fields named after the usual results-table columns, lowercased.
inline json metrics_to_json(const Metrics& m) {
  return json{{"mae", m.mae},
              {"r2", optional_to_json(m.r_squared)},
              {"accuracy", m.accuracy},
              {"precision", m.precision},
              {"recall", m.recall},
              {"f1-score", m.f1},
              {"n_evaluated", m.n_evaluated},
              {"zero_precision_classes", m.zero_precision_classes}};
}

inline json summary_to_json(const EvalSummary& s) {
  return json{{"metrics", s.metrics ? metrics_to_json(*s.metrics) : json(nullptr)},
              {"n_total", s.n_total},
              {"n_rejected", s.n_rejected},
              {"rejection", s.rejection_rate}};
}

struct RunRecord {
  std::string run_id;
  std::string created_at;  // ISO-8601 UTC
  PipelineMode mode = PipelineMode::Hybrid;
  RejectionPolicy policy = RejectionPolicy::NoRejection;
  PipelineConfig config;
  std::string manifest_id;
  std::vector<SlideVerdict> verdicts;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

namespace detail {

inline json run_body(const RunRecord& r) {
  json verdicts = json::array();
  for (const auto& v : r.verdicts) verdicts.push_back(verdict_to_json(v));
  return json{{"format_version", kRunFormatVersion},
              {"run_id", r.run_id},
              {"created_at", r.created_at},
              {"mode", to_string(r.mode)},
              {"policy", to_string(r.policy)},
              {"config", config_to_json(r.config)},
              {"manifest_id", r.manifest_id},
              {"verdicts", verdicts}};
}

}  // namespace detail

inline std::string save_run(const RunRecord& r) {
  json j = detail::run_body(r);
  j["checksum"] = "sha256:" + sha256_hex(j.dump());
  return j.dump(2) + "\n";
}

inline RunRecord load_run(std::string_view text, const std::string& source = {}) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min(e.byte, text.size()); ++i) {
      if (text[i] == '\n') ++line;
    }
    throw ParseError(source, line, 0, "invalid JSON in run record");
  }
  if (!j.is_object() || !j.contains("format_version")) {
    throw IntegrityError("run record has no format_version");
  }
  if (j["format_version"] != kRunFormatVersion) {
    throw IntegrityError("run record format_version " + j["format_version"].dump() +
                         " is not supported (expected " +
                         std::to_string(kRunFormatVersion) + ")");
  }
  if (!j.contains("checksum") || !j["checksum"].is_string()) {
    throw IntegrityError("run record has no checksum");
  }
  const auto stored = j["checksum"].get<std::string>();
  j.erase("checksum");
  if (stored != "sha256:" + sha256_hex(j.dump())) {
    throw IntegrityError("run record checksum mismatch");
  }
  try {
    RunRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.created_at = j.at("created_at").get<std::string>();
    const auto mode = parse_mode(j.at("mode").get<std::string>());
    const auto policy = parse_policy(j.at("policy").get<std::string>());
    if (!mode || !policy) throw IntegrityError("unknown mode or policy");
    r.mode = *mode;
    r.policy = *policy;
    r.config = config_from_json(j.at("config"));
    r.manifest_id = j.at("manifest_id").get<std::string>();
    for (const auto& v : j.at("verdicts")) r.verdicts.push_back(verdict_from_json(v));
    return r;
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("malformed run record: ") + e.what());
  } catch (const ContractViolation& e) {
    throw IntegrityError(std::string("malformed run record: ") + e.what());
  }
}

}  // namespace countpath
