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

// Run execution, QC reporting and the human review queue behind the HTTP
// API. Every operation returns an ApiResult (status code plus JSON body)
// so the state machine can be driven with or without a socket.
//
// Store layout:
//
//   <store>/manifests/<manifest_id>.csv
//   <store>/macro/<manifest_id>.csv       optional macroscopic report
//   <store>/runs/<run_id>.json            run record
//   <store>/runs/<run_id>.state.json      QC records, truths, review items
//   <store>/reviews.jsonl                 append-only review decisions
//
// Review items move Pending -> Resolved exactly once; later corrections
// append events but never rewrite earlier ones or the machine verdict.

#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "countpath/errors.hpp"
#include "countpath/metrics.hpp"
#include "countpath/pipeline.hpp"
#include "countpath/qc.hpp"
#include "countpath/run_record.hpp"
#include "countpath/slide_store.hpp"
#include "countpath/tables.hpp"

namespace countpath {

struct ApiResult {
  int status = 200;
  json body;
};

inline ApiResult api_error(int status, const std::string& message) {
  return {status, json{{"error", message}}};
}

inline std::string utc_now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct ReviewEvent {
  std::string kind;  // "decision" or "correction"
  int final_count = 0;
  std::string reviewer_id;
  std::string note;
  std::string decided_at;
};

/// Boxes shown over the thumbnail, in thumbnail-normalized coordinates.
struct OverlayBox {
  DetectionKind kind = DetectionKind::Set;
  BoundingBox box = BoundingBox::unit();
  double confidence = 0.0;
  bool retained = false;
  std::optional<int> crop;  // crop index for hybrid fragment boxes
};

struct ReviewItem {
  std::string item_id;
  std::string run_id;
  std::string slide_id;
  QCRecord qc;
  SlideVerdict verdict;
  std::vector<OverlayBox> overlays;
  std::vector<ReviewEvent> history;

  bool resolved() const { return !history.empty(); }
};

inline std::vector<OverlayBox> overlays_for(const SlideInput& input, const SlideVerdict& verdict,
                                            PipelineMode mode, const PipelineConfig& cfg) {
  std::vector<OverlayBox> out;
  const auto& retained = verdict.diagnostics.retained_set_boxes;
  for (const auto& d : input.set_detections) {
    const bool kept = std::find(retained.begin(), retained.end(), d.box) != retained.end();
    out.push_back({DetectionKind::Set, d.box, d.confidence, kept, std::nullopt});
  }
  if (mode == PipelineMode::Hybrid && input.crop_fragment_detections && !retained.empty() &&
      input.crop_fragment_detections->size() == retained.size()) {
    std::vector<Detection> sets;
    for (const auto& b : retained) sets.push_back({DetectionKind::Set, b, 1.0, {}});
    const auto regions =
        make_crop_regions(sets, input.slide_id, input.thumb_width, input.thumb_height, cfg);
    for (std::size_t k = 0; k < regions.size(); ++k) {
      for (const auto& f : (*input.crop_fragment_detections)[k]) {
        if (auto b = regions[k].to_thumbnail(f.box, input.thumb_width, input.thumb_height)) {
          out.push_back({DetectionKind::Fragment, *b, f.confidence,
                         f.confidence >= cfg.fragment_confidence_threshold,
                         static_cast<int>(k)});
        }
      }
    }
  } else {
    for (const auto& f : input.fragment_detections) {
      out.push_back({DetectionKind::Fragment, f.box, f.confidence,
                     f.confidence >= cfg.fragment_confidence_threshold, std::nullopt});
    }
  }
  return out;
}

class ReviewService {
 public:
  using Clock = std::function<std::string()>;

  explicit ReviewService(fs::path store, Clock clock = utc_now_iso8601)
      : store_(std::move(store)), clock_(std::move(clock)) {
    fs::create_directories(store_ / "manifests");
    fs::create_directories(store_ / "macro");
    fs::create_directories(store_ / "runs");
    reload();
  }

  const fs::path& store() const { return store_; }

  ApiResult put_manifest(const std::string& manifest_id, const std::string& csv) {
    if (!valid_id(manifest_id)) return api_error(422, "invalid manifest id");
    try {
      parse_manifest(csv, manifest_id);
    } catch (const Error& e) {
      return api_error(422, e.what());
    }
    std::unique_lock lock(mutex_);
    write_file(store_ / "manifests" / (manifest_id + ".csv"), csv);
    return {201, json{{"manifest_id", manifest_id}}};
  }

  ApiResult put_macro_report(const std::string& manifest_id, const std::string& csv) {
    if (!valid_id(manifest_id)) return api_error(422, "invalid manifest id");
    try {
      parse_macro_report(csv, manifest_id);
    } catch (const Error& e) {
      return api_error(422, e.what());
    }
    std::unique_lock lock(mutex_);
    if (!fs::exists(store_ / "manifests" / (manifest_id + ".csv"))) {
      return api_error(404, "unknown manifest " + manifest_id);
    }
    write_file(store_ / "macro" / (manifest_id + ".csv"), csv);
    return {201, json{{"manifest_id", manifest_id}}};
  }

  /// Body: {manifest_id, detections_dir, mode, policy, config?,
  /// thumbnail_root?}. policy is "none", "reject" (the mode's own reject
  /// rule) or an explicit policy name.
  ApiResult create_run(const json& body) {
    if (!body.is_object()) return api_error(422, "body must be a JSON object");
    const auto manifest_id = body.value("manifest_id", std::string());
    if (manifest_id.empty() || !valid_id(manifest_id)) {
      return api_error(422, "manifest_id required");
    }
    const fs::path manifest_path = store_ / "manifests" / (manifest_id + ".csv");
    if (!fs::exists(manifest_path)) return api_error(404, "unknown manifest " + manifest_id);

    PipelineMode mode;
    RejectionPolicy policy;
    PipelineConfig cfg;
    fs::path detections_dir;
    fs::path thumbnail_root;
    try {
      const auto m = parse_mode(body.value("mode", std::string("hybrid")));
      if (!m) return api_error(422, "unknown mode");
      mode = *m;
      const auto p = body.value("policy", std::string("none"));
      if (p == "reject") {
        policy = rejecting_policy_for(mode);
      } else if (auto parsed = parse_policy(p)) {
        policy = *parsed;
      } else {
        return api_error(422, "unknown policy " + p);
      }
      if (!policy_fits_mode(policy, mode)) {
        return api_error(422, std::string("policy ") + to_string(policy) +
                                  " does not apply to mode " + to_string(mode));
      }
      if (body.contains("config")) cfg = config_from_json(body["config"]);
      detections_dir = body.value("detections_dir", std::string());
      thumbnail_root = body.value("thumbnail_root", std::string());
    } catch (const json::exception& e) {
      return api_error(422, e.what());
    } catch (const ContractViolation& e) {
      return api_error(422, e.what());
    }
    if (detections_dir.empty() || !fs::is_directory(detections_dir)) {
      return api_error(422, "detections_dir not found");
    }

    // Ingest and run without holding the lock.
    Manifest manifest;
    std::vector<MacroReportEntry> macro;
    bool has_macro = false;
    LoadedBatch batch;
    std::vector<SlideVerdict> verdicts;
    try {
      manifest = parse_manifest(read_file(manifest_path), manifest_path.string());
      const fs::path macro_path = store_ / "macro" / (manifest_id + ".csv");
      if (fs::exists(macro_path)) {
        macro = parse_macro_report(read_file(macro_path), macro_path.string()).entries;
        has_macro = true;
      }
      batch = load_batch(manifest, detections_dir, mode, thumbnail_root);
      verdicts = run_batch(batch.inputs, mode, cfg, policy);
    } catch (const Error& e) {
      return api_error(422, e.what());
    }

    std::unique_lock lock(mutex_);
    RunState run;
    run.record.run_id = next_run_id();
    run.record.created_at = clock_();
    run.record.mode = mode;
    run.record.policy = policy;
    run.record.config = cfg;
    run.record.manifest_id = manifest_id;
    run.record.verdicts = verdicts;
    run.has_macro = has_macro;
    run.thumbnail_root = thumbnail_root;
    for (const auto& e : manifest.entries) {
      run.truths.push_back(e.truth_label ? std::optional<int>(e.truth_label->value())
                                         : std::nullopt);
      run.thumbnails.push_back(e.thumbnail_path);
    }
    if (has_macro) {
      run.qc = qc_compare(verdicts, macro);
    } else {
      // Without a report only rejections can be flagged.
      run.qc = qc_compare(verdicts, {});
      for (std::size_t i = 0; i < run.qc.size(); ++i) {
        if (!run.qc[i].rejection) run.qc[i].missing_report = false;
      }
    }
    int flagged = 0;
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
      if (!flags_review(run, i)) continue;
      ReviewItem item;
      item.item_id = run.record.run_id + "-" + std::to_string(i);
      item.run_id = run.record.run_id;
      item.slide_id = verdicts[i].slide_id;
      item.qc = run.qc[i];
      item.verdict = verdicts[i];
      item.overlays = overlays_for(batch.inputs[i], verdicts[i], mode, cfg);
      run.item_ids.push_back(item.item_id);
      item_index_[item.item_id] = items_.size();
      items_.push_back(std::move(item));
      ++flagged;
    }
    const auto run_id = run.record.run_id;
    write_file(store_ / "runs" / (run_id + ".json"), save_run(run.record));
    runs_[run_id] = std::move(run);
    persist_state(run_id);
    return {201, json{{"run_id", run_id},
                      {"n_slides", static_cast<int>(verdicts.size())},
                      {"n_flagged", flagged}}};
  }

  ApiResult run_report(const std::string& run_id) const {
    std::shared_lock lock(mutex_);
    const auto it = runs_.find(run_id);
    if (it == runs_.end()) return api_error(404, "unknown run " + run_id);
    const auto& run = it->second;

    std::vector<SlideVerdict> judged;
    std::vector<ClassLabel> truths;
    for (std::size_t i = 0; i < run.record.verdicts.size(); ++i) {
      if (i < run.truths.size() && run.truths[i]) {
        judged.push_back(run.record.verdicts[i]);
        truths.emplace_back(*run.truths[i]);
      }
    }
    const auto& verdicts = run.record.verdicts;
    int rejected = 0;
    for (const auto& v : verdicts) rejected += v.accepted() ? 0 : 1;
    json metrics = nullptr;
    if (!judged.empty()) {
      const auto s = evaluate_with_rejection(judged, truths);
      if (s.metrics) metrics = metrics_to_json(*s.metrics);
    }
    return {200, json{{"run_id", run_id},
                      {"mode", to_string(run.record.mode)},
                      {"policy", to_string(run.record.policy)},
                      {"n_total", static_cast<int>(verdicts.size())},
                      {"n_rejected", rejected},
                      {"rejection", verdicts.empty()
                                        ? 0.0
                                        : static_cast<double>(rejected) / verdicts.size()},
                      {"metrics", metrics},
                      {"has_macro_report", run.has_macro},
                      {"tallies", tallies_json(run)}}};
  }

  ApiResult run_qc(const std::string& run_id) const {
    std::shared_lock lock(mutex_);
    const auto it = runs_.find(run_id);
    if (it == runs_.end()) return api_error(404, "unknown run " + run_id);
    json out = json::array();
    for (const auto& r : it->second.qc) out.push_back(qc_record_to_json(r));
    return {200, out};
  }

  /// state: "pending", "resolved" or "all". Items come back in enqueue order.
  ApiResult review_queue(const std::string& state) const {
    if (state != "pending" && state != "resolved" && state != "all") {
      return api_error(422, "state must be pending, resolved or all");
    }
    std::shared_lock lock(mutex_);
    json out = json::array();
    for (const auto& item : items_) {
      if (state == "pending" && item.resolved()) continue;
      if (state == "resolved" && !item.resolved()) continue;
      out.push_back(item_json(item));
    }
    return {200, out};
  }

  ApiResult review_item(const std::string& item_id) const {
    std::shared_lock lock(mutex_);
    const auto it = item_index_.find(item_id);
    if (it == item_index_.end()) return api_error(404, "unknown review item " + item_id);
    return {200, item_json(items_[it->second])};
  }

  /// Resolves a pending item. 404 unknown item, 422 bad body, 409 when the
  /// item is already resolved.
  ApiResult decide(const std::string& item_id, const json& body) {
    return append_event(item_id, body, "decision");
  }

  /// Appends a correction to an already resolved item (409 while pending).
  ApiResult correct(const std::string& item_id, const json& body) {
    return append_event(item_id, body, "correction");
  }

  ApiResult thumbnail(const std::string& run_id, const std::string& slide_id,
                      std::string& png) const {
    std::shared_lock lock(mutex_);
    const auto it = runs_.find(run_id);
    if (it == runs_.end()) return api_error(404, "unknown run " + run_id);
    const auto& run = it->second;
    for (std::size_t i = 0; i < run.record.verdicts.size(); ++i) {
      if (run.record.verdicts[i].slide_id != slide_id) continue;
      fs::path p = i < run.thumbnails.size() ? run.thumbnails[i] : std::string();
      if (!p.empty() && p.is_relative()) p = run.thumbnail_root / p;
      if (p.empty() || !fs::is_regular_file(p)) return api_error(404, "no thumbnail");
      png = read_file(p);
      return {200, nullptr};
    }
    return api_error(404, "unknown slide " + slide_id);
  }

  std::size_t n_items() const {
    std::shared_lock lock(mutex_);
    return items_.size();
  }

 private:
  struct RunState {
    RunRecord record;
    std::vector<QCRecord> qc;
    std::vector<std::optional<int>> truths;
    std::vector<std::string> thumbnails;
    fs::path thumbnail_root;
    bool has_macro = false;
    std::vector<std::string> item_ids;
  };

  static bool valid_id(const std::string& id) {
    if (id.empty() || id.size() > 128) return false;
    for (char c : id) {
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) {
        return false;
      }
    }
    return id != "." && id != "..";
  }

  static bool policy_fits_mode(RejectionPolicy policy, PipelineMode mode) {
    if (policy == RejectionPolicy::NoRejection) return true;
    return policy == rejecting_policy_for(mode);
  }

  static bool flags_review(const RunState& run, std::size_t i) {
    const auto& qc = run.qc[i];
    return qc.status == QcStatus::Discrepancy ||
           (qc.status == QcStatus::NeedsReview && (qc.rejection || qc.missing_report));
  }

  std::string next_run_id() const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "run-%04zu", runs_.size() + 1);
    return buf;
  }

  json tallies_json(const RunState& run) const {
    int match = 0, discrepancy = 0, needs_review = 0, resolved = 0, unchecked = 0;
    std::map<std::string, bool> resolved_slides;
    for (const auto& id : run.item_ids) {
      const auto& item = items_[item_index_.at(id)];
      resolved_slides[item.slide_id] = item.resolved();
    }
    for (const auto& qc : run.qc) {
      const auto r = resolved_slides.find(qc.slide_id);
      if (r != resolved_slides.end() && r->second) {
        ++resolved;
      } else if (qc.status == QcStatus::Match) {
        ++match;
      } else if (qc.status == QcStatus::Discrepancy) {
        ++discrepancy;
      } else if (qc.rejection || qc.missing_report) {
        ++needs_review;
      } else {
        ++unchecked;
      }
    }
    return json{{"match", match},
                {"discrepancy", discrepancy},
                {"needs_review", needs_review},
                {"resolved", resolved},
                {"unchecked", unchecked}};
  }

  static json event_json(const ReviewEvent& e) {
    return json{{"kind", e.kind},
                {"final_count", e.final_count},
                {"reviewer_id", e.reviewer_id},
                {"note", e.note},
                {"decided_at", e.decided_at}};
  }

  static json item_json(const ReviewItem& item) {
    json overlays = json::array();
    for (const auto& o : item.overlays) {
      overlays.push_back(json{{"kind", to_string(o.kind)},
                              {"box", box_to_json(o.box)},
                              {"confidence", o.confidence},
                              {"retained", o.retained},
                              {"crop", optional_to_json(o.crop)}});
    }
    json history = json::array();
    for (const auto& e : item.history) history.push_back(event_json(e));
    const auto verdict = verdict_to_json(item.verdict);
    return json{{"item_id", item.item_id},
                {"run_id", item.run_id},
                {"slide_id", item.slide_id},
                {"state", item.resolved() ? "resolved" : "pending"},
                {"qc", qc_record_to_json(item.qc)},
                {"predicted", verdict["label"]},
                {"reported", optional_to_json(item.qc.reported)},
                {"rejection_reason", verdict["reason"]},
                {"diagnostics", verdict["diagnostics"]},
                {"overlays", overlays},
                {"thumbnail_url",
                 "/v1/runs/" + item.run_id + "/slides/" + item.slide_id + "/thumbnail.png"},
                {"resolution", item.history.empty() ? json(nullptr)
                                                    : event_json(item.history.back())},
                {"history", history}};
  }

  ApiResult append_event(const std::string& item_id, const json& body, const std::string& kind) {
    std::unique_lock lock(mutex_);
    const auto it = item_index_.find(item_id);
    if (it == item_index_.end()) return api_error(404, "unknown review item " + item_id);
    if (!body.is_object() || !body.contains("final_count") ||
        !body["final_count"].is_number_integer()) {
      return api_error(422, "final_count must be an integer");
    }
    const int count = body["final_count"].get<int>();
    if (count < ClassLabel::kMin || count > ClassLabel::kMax) {
      return api_error(422, "final_count must be in 1..10");
    }
    const auto reviewer = body.value("reviewer_id", std::string());
    if (reviewer.empty()) return api_error(422, "reviewer_id required");
    auto& item = items_[it->second];
    if (kind == "decision" && item.resolved()) {
      return api_error(409, "review item " + item_id + " is already resolved");
    }
    if (kind == "correction" && !item.resolved()) {
      return api_error(409, "review item " + item_id + " is still pending");
    }
    ReviewEvent e{kind, count, reviewer, body.value("note", std::string()), clock_()};
    json line = event_json(e);
    line["item_id"] = item_id;
    {
      std::ofstream log(store_ / "reviews.jsonl", std::ios::app);
      log << line.dump() << '\n';
      if (!log) return api_error(500, "cannot append review log");
    }
    item.history.push_back(std::move(e));
    return {200, item_json(item)};
  }

  void persist_state(const std::string& run_id) const {
    const auto& run = runs_.at(run_id);
    json qc = json::array();
    for (const auto& r : run.qc) {
      json j = qc_record_to_json(r);
      j["missing_report"] = r.missing_report;
      qc.push_back(j);
    }
    json items = json::array();
    for (const auto& id : run.item_ids) {
      const auto& item = items_[item_index_.at(id)];
      json j = item_json(item);
      j.erase("history");
      j.erase("resolution");
      items.push_back(j);
    }
    json truths = json::array();
    for (const auto& t : run.truths) truths.push_back(optional_to_json(t));
    json state{{"run_id", run_id},
               {"qc", qc},
               {"truths", truths},
               {"thumbnails", run.thumbnails},
               {"thumbnail_root", run.thumbnail_root.string()},
               {"has_macro", run.has_macro},
               {"items", items}};
    write_file(store_ / "runs" / (run_id + ".state.json"), state.dump(2) + "\n");
  }

  static QCRecord qc_from_json(const json& j) {
    QCRecord r;
    r.slide_id = j.at("slide_id").get<std::string>();
    const auto status = j.at("status").get<std::string>();
    r.status = status == "match"         ? QcStatus::Match
               : status == "discrepancy" ? QcStatus::Discrepancy
                                         : QcStatus::NeedsReview;
    r.predicted = optional_from_json<int>(j.at("predicted"));
    r.reported = optional_from_json<int>(j.at("reported"));
    r.reported_sets = optional_from_json<int>(j.at("reported_sets"));
    if (j.at("rejection_reason").is_string()) r.rejection = parse_reason(j["rejection_reason"].get<std::string>());
    r.missing_report = j.value("missing_report", false);
    return r;
  }

  // Restores runs and review items from the store, then replays the
  // review log.
  void reload() {
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(store_ / "runs")) {
      const auto name = entry.path().filename().string();
      if (name.ends_with(".state.json")) ids.push_back(name.substr(0, name.size() - 11));
    }
    std::sort(ids.begin(), ids.end());
    for (const auto& run_id : ids) {
      const auto state = json::parse(read_file(store_ / "runs" / (run_id + ".state.json")));
      RunState run;
      run.record = load_run(read_file(store_ / "runs" / (run_id + ".json")), run_id);
      for (const auto& q : state.at("qc")) run.qc.push_back(qc_from_json(q));
      for (const auto& t : state.at("truths")) run.truths.push_back(optional_from_json<int>(t));
      run.thumbnails = state.at("thumbnails").get<std::vector<std::string>>();
      run.thumbnail_root = state.at("thumbnail_root").get<std::string>();
      run.has_macro = state.at("has_macro").get<bool>();
      for (const auto& j : state.at("items")) {
        ReviewItem item;
        item.item_id = j.at("item_id").get<std::string>();
        item.run_id = run_id;
        item.slide_id = j.at("slide_id").get<std::string>();
        for (const auto& q : run.qc) {
          if (q.slide_id == item.slide_id) item.qc = q;
        }
        for (const auto& v : run.record.verdicts) {
          if (v.slide_id == item.slide_id) item.verdict = v;
        }
        for (const auto& o : j.at("overlays")) {
          item.overlays.push_back({o.at("kind") == "set" ? DetectionKind::Set
                                                         : DetectionKind::Fragment,
                                   box_from_json(o.at("box")), o.at("confidence").get<double>(),
                                   o.at("retained").get<bool>(),
                                   optional_from_json<int>(o.at("crop"))});
        }
        run.item_ids.push_back(item.item_id);
        item_index_[item.item_id] = items_.size();
        items_.push_back(std::move(item));
      }
      runs_[run_id] = std::move(run);
    }
    const auto log_path = store_ / "reviews.jsonl";
    if (!fs::exists(log_path)) return;
    std::ifstream log(log_path);
    std::string line;
    while (std::getline(log, line)) {
      if (line.empty()) continue;
      const auto j = json::parse(line);
      const auto it = item_index_.find(j.at("item_id").get<std::string>());
      if (it == item_index_.end()) continue;
      items_[it->second].history.push_back(
          ReviewEvent{j.at("kind").get<std::string>(), j.at("final_count").get<int>(),
                      j.at("reviewer_id").get<std::string>(), j.at("note").get<std::string>(),
                      j.at("decided_at").get<std::string>()});
    }
  }

  fs::path store_;
  Clock clock_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, RunState> runs_;
  std::vector<ReviewItem> items_;
  std::map<std::string, std::size_t> item_index_;
};

}  // namespace countpath
