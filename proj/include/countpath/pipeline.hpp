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

// Counting modes and their post-processing.
//
//   detection-only      sets and fragments from one detector pass; the
//                       final score is fragments / sets.
//   classification-only the classifier's fragments-per-set class.
//   hybrid              set boxes pruned under the classifier's set count,
//                       fragments counted per set crop, crop counts
//                       reconciled into one score.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "countpath/errors.hpp"
#include "countpath/geometry.hpp"

namespace countpath {

enum class PipelineMode { DetectionOnly, ClassificationOnly, Hybrid };

enum class RejectionPolicy {
  NoRejection,
  // Detection-only: reject when fragments / sets is not an integer.
  RejectNonInteger,
  // Hybrid: reject unless every crop of the slide yields the same count.
  RejectInconsistentCrops,
};

enum class RejectionReason {
  NonIntegerRatio,
  InconsistentCrops,
  NoSetsDetected,
  // The resolved fragments-per-set count is zero; a label needs at least 1.
  NoFragmentsDetected,
};

inline const char* to_string(PipelineMode mode) {
  switch (mode) {
    case PipelineMode::DetectionOnly: return "detection";
    case PipelineMode::ClassificationOnly: return "classification";
    case PipelineMode::Hybrid: return "hybrid";
  }
  return "?";
}

inline const char* to_string(RejectionPolicy policy) {
  switch (policy) {
    case RejectionPolicy::NoRejection: return "none";
    case RejectionPolicy::RejectNonInteger: return "reject_non_integer";
    case RejectionPolicy::RejectInconsistentCrops: return "reject_inconsistent_crops";
  }
  return "?";
}

inline const char* to_string(RejectionReason reason) {
  switch (reason) {
    case RejectionReason::NonIntegerRatio: return "non_integer_ratio";
    case RejectionReason::InconsistentCrops: return "inconsistent_crops";
    case RejectionReason::NoSetsDetected: return "no_sets_detected";
    case RejectionReason::NoFragmentsDetected: return "no_fragments_detected";
  }
  return "?";
}

/// The reject flavour that belongs to `mode`, or NoRejection.
inline RejectionPolicy rejecting_policy_for(PipelineMode mode) {
  switch (mode) {
    case PipelineMode::DetectionOnly: return RejectionPolicy::RejectNonInteger;
    case PipelineMode::Hybrid: return RejectionPolicy::RejectInconsistentCrops;
    case PipelineMode::ClassificationOnly: return RejectionPolicy::NoRejection;
  }
  return RejectionPolicy::NoRejection;
}

struct PipelineConfig {
  // Detections below these confidences are dropped before suppression.
  double set_confidence_threshold = 0.25;
  double fragment_confidence_threshold = 0.25;
  OverlapRule set_overlap = OverlapRule::strict();
  OverlapRule fragment_overlap = OverlapRule::strict();
  // Side of the square crop handed to the fragment detector. Ratios round
  // half-up; there is no other rounding mode.
  int crop_output_side = 512;

  void validate() const {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(set_confidence_threshold) ||
        !in_unit(fragment_confidence_threshold)) {
      throw ContractViolation("confidence threshold outside [0,1]");
    }
    if (crop_output_side <= 0) {
      throw ContractViolation("crop_output_side must be positive");
    }
  }

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

struct Accepted {
  ClassLabel label;
  friend bool operator==(const Accepted&, const Accepted&) = default;
};

struct Rejected {
  RejectionReason reason;
  friend bool operator==(const Rejected&, const Rejected&) = default;
};

using Outcome = std::variant<Accepted, Rejected>;

/// Result of reconciling per-crop counts: a raw count or a rejection.
using CountOutcome = std::variant<int, Rejected>;

struct Diagnostics {
  int n_sets_detected = 0;           // raw set detections
  int n_sets_after_suppression = 0;  // after confidence + overlap filtering
  std::optional<int> n_sets_classifier;
  int n_sets_retained = 0;
  std::optional<int> n_fragments;    // detection-only total
  std::vector<int> per_crop_counts;
  std::optional<double> raw_ratio;
  std::vector<BoundingBox> retained_set_boxes;

  friend bool operator==(const Diagnostics&, const Diagnostics&) = default;
};

struct SlideVerdict {
  std::string slide_id;
  Outcome outcome = Rejected{RejectionReason::NoSetsDetected};
  Diagnostics diagnostics;

  bool accepted() const { return std::holds_alternative<Accepted>(outcome); }
  std::optional<ClassLabel> label() const {
    if (auto* a = std::get_if<Accepted>(&outcome)) return a->label;
    return std::nullopt;
  }
  std::optional<RejectionReason> rejection() const {
    if (auto* r = std::get_if<Rejected>(&outcome)) return r->reason;
    return std::nullopt;
  }

  friend bool operator==(const SlideVerdict&, const SlideVerdict&) = default;
};

/// Maps a non-negative count onto the 1..10 label scale. Zero has no label
/// and throws; callers turn it into a rejection.
inline ClassLabel clamp_class(int n) {
  if (n < 0) throw ContractViolation("negative count");
  if (n == 0) throw ContractViolation("zero count has no class label");
  return ClassLabel(std::min(n, ClassLabel::kMax));
}

/// Confidence filter followed by greedy overlap suppression in descending
/// confidence order. Ties keep input order. Output is sorted by confidence,
/// highest first.
inline std::vector<Detection> suppress_overlaps(std::span<const Detection> dets,
                                                double threshold,
                                                const OverlapRule& rule) {
  std::vector<Detection> candidates;
  candidates.reserve(dets.size());
  for (const auto& d : dets) {
    if (d.confidence >= threshold) candidates.push_back(d);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Detection& a, const Detection& b) {
                     return a.confidence > b.confidence;
                   });
  std::vector<Detection> kept;
  for (auto& c : candidates) {
    const bool redundant = std::any_of(
        kept.begin(), kept.end(),
        [&](const Detection& k) { return rule.overlaps(k.box, c.box); });
    if (!redundant) kept.push_back(std::move(c));
  }
  return kept;
}

/// Set boxes after filtering, truncated to at most `classifier_count`. The
/// classifier count is an upper bound: when fewer boxes survive, all stay.
inline std::vector<Detection> prune_set_detections(
    std::span<const Detection> dets, ClassLabel classifier_count,
    const PipelineConfig& cfg) {
  for (const auto& d : dets) {
    if (d.kind != DetectionKind::Set) {
      throw ContractViolation("prune_set_detections given a fragment box");
    }
  }
  auto kept =
      suppress_overlaps(dets, cfg.set_confidence_threshold, cfg.set_overlap);
  const auto bound = static_cast<std::size_t>(classifier_count.value());
  if (kept.size() > bound) kept.resize(bound);
  return kept;
}

inline std::vector<CropRegion> make_crop_regions(
    std::span<const Detection> retained_sets, const std::string& slide_id,
    int thumb_width, int thumb_height, const PipelineConfig& cfg) {
  if (retained_sets.empty()) {
    throw ContractViolation("make_crop_regions needs at least one set");
  }
  std::vector<CropRegion> regions;
  regions.reserve(retained_sets.size());
  for (std::size_t i = 0; i < retained_sets.size(); ++i) {
    regions.emplace_back(
        slide_id, static_cast<int>(i),
        CropRegion::pixel_rect_for(retained_sets[i].box, thumb_width,
                                   thumb_height),
        cfg.crop_output_side);
  }
  return regions;
}

inline int count_fragments_in_crop(std::span<const Detection> dets,
                                   const PipelineConfig& cfg) {
  for (const auto& d : dets) {
    if (d.kind != DetectionKind::Fragment) {
      throw ContractViolation("count_fragments_in_crop given a set box");
    }
  }
  return static_cast<int>(suppress_overlaps(dets,
                                            cfg.fragment_confidence_threshold,
                                            cfg.fragment_overlap)
                              .size());
}

/// Reconciles the fragment counts of every crop cut from one slide.
///
/// Unanimous counts pass through. Otherwise RejectInconsistentCrops
/// rejects; NoRejection takes the lower of two counts, and for three or
/// more takes the strict-majority value, falling back to the smallest of
/// the most frequent values when no strict majority exists.
inline CountOutcome resolve_crop_counts(std::span<const int> counts,
                                        RejectionPolicy policy) {
  if (counts.empty()) throw ContractViolation("resolve_crop_counts: no crops");
  if (policy == RejectionPolicy::RejectNonInteger) {
    throw ContractViolation("RejectNonInteger does not apply to crop counts");
  }
  const bool unanimous = std::all_of(counts.begin(), counts.end(),
                                     [&](int c) { return c == counts[0]; });
  if (unanimous) return counts[0];
  if (policy == RejectionPolicy::RejectInconsistentCrops) {
    return Rejected{RejectionReason::InconsistentCrops};
  }
  if (counts.size() == 2) return std::min(counts[0], counts[1]);

  std::map<int, std::size_t> tally;
  for (int c : counts) ++tally[c];
  std::size_t best = 0;
  for (const auto& [value, n] : tally) best = std::max(best, n);
  // std::map iterates ascending, so the first modal value is the smallest.
  for (const auto& [value, n] : tally) {
    if (n == best) return value;
  }
  return counts[0];  // unreachable
}

/// fragments / sets as a class label. Integer ratios are always accepted;
/// other ratios are rejected under RejectNonInteger or rounded half-up.
/// A ratio that rounds to zero is rejected as NoFragmentsDetected.
inline Outcome ratio_final_score(int n_fragments, int n_sets,
                                 RejectionPolicy policy) {
  if (n_sets < 1) throw ContractViolation("ratio_final_score: n_sets < 1");
  if (n_fragments < 0) throw ContractViolation("negative fragment count");
  if (policy == RejectionPolicy::RejectInconsistentCrops) {
    throw ContractViolation("RejectInconsistentCrops does not apply to ratios");
  }
  const bool integral = n_fragments % n_sets == 0;
  if (!integral && policy == RejectionPolicy::RejectNonInteger) {
    return Rejected{RejectionReason::NonIntegerRatio};
  }
  // floor(f/s + 1/2) in integer arithmetic.
  const int rounded = (2 * n_fragments + n_sets) / (2 * n_sets);
  if (rounded == 0) return Rejected{RejectionReason::NoFragmentsDetected};
  return Accepted{clamp_class(rounded)};
}

inline SlideVerdict run_hybrid(const SlideInput& input,
                               const PipelineConfig& cfg,
                               RejectionPolicy policy) {
  validate_slide_input(input);
  cfg.validate();
  if (policy == RejectionPolicy::RejectNonInteger) {
    throw ContractViolation("hybrid mode does not support RejectNonInteger");
  }
  if (!input.classifier_set_count) {
    throw ContractViolation("slide " + input.slide_id +
                            ": hybrid mode needs the classifier set count");
  }
  if (!input.crop_fragment_detections) {
    throw ContractViolation("slide " + input.slide_id +
                            ": hybrid mode needs per-crop fragment detections");
  }

  SlideVerdict verdict;
  verdict.slide_id = input.slide_id;
  auto& diag = verdict.diagnostics;
  diag.n_sets_detected = static_cast<int>(input.set_detections.size());
  diag.n_sets_after_suppression = static_cast<int>(
      suppress_overlaps(input.set_detections, cfg.set_confidence_threshold,
                        cfg.set_overlap)
          .size());
  diag.n_sets_classifier = input.classifier_set_count->value();

  const auto retained = prune_set_detections(
      input.set_detections, *input.classifier_set_count, cfg);
  diag.n_sets_retained = static_cast<int>(retained.size());
  for (const auto& d : retained) diag.retained_set_boxes.push_back(d.box);

  const auto& crops = *input.crop_fragment_detections;
  if (crops.size() != retained.size()) {
    throw ContractViolation(
        "slide " + input.slide_id + ": " + std::to_string(crops.size()) +
        " crop detection lists for " + std::to_string(retained.size()) +
        " retained sets");
  }
  if (retained.empty()) {
    verdict.outcome = Rejected{RejectionReason::NoSetsDetected};
    return verdict;
  }

  for (const auto& crop : crops) {
    diag.per_crop_counts.push_back(count_fragments_in_crop(crop, cfg));
  }
  const auto resolved = resolve_crop_counts(diag.per_crop_counts, policy);
  if (const auto* rejected = std::get_if<Rejected>(&resolved)) {
    verdict.outcome = *rejected;
  } else if (const int count = std::get<int>(resolved); count == 0) {
    verdict.outcome = Rejected{RejectionReason::NoFragmentsDetected};
  } else {
    verdict.outcome = Accepted{clamp_class(count)};
  }
  return verdict;
}

/// Pure detector path. Sets are suppressed without a classifier bound;
/// fragments are counted on the whole thumbnail, keeping only those whose
/// center falls inside a retained set.
inline SlideVerdict run_detection_only(const SlideInput& input,
                                       const PipelineConfig& cfg,
                                       RejectionPolicy policy) {
  validate_slide_input(input);
  cfg.validate();
  if (policy == RejectionPolicy::RejectInconsistentCrops) {
    throw ContractViolation(
        "detection-only mode does not support RejectInconsistentCrops");
  }
  SlideVerdict verdict;
  verdict.slide_id = input.slide_id;
  auto& diag = verdict.diagnostics;
  diag.n_sets_detected = static_cast<int>(input.set_detections.size());
  if (input.classifier_set_count) {
    diag.n_sets_classifier = input.classifier_set_count->value();
  }

  const auto sets = suppress_overlaps(
      input.set_detections, cfg.set_confidence_threshold, cfg.set_overlap);
  diag.n_sets_after_suppression = static_cast<int>(sets.size());
  diag.n_sets_retained = static_cast<int>(sets.size());
  for (const auto& d : sets) diag.retained_set_boxes.push_back(d.box);
  if (sets.empty()) {
    verdict.outcome = Rejected{RejectionReason::NoSetsDetected};
    return verdict;
  }

  const auto fragments =
      suppress_overlaps(input.fragment_detections,
                        cfg.fragment_confidence_threshold, cfg.fragment_overlap);
  const auto inside_a_set = [&](const Detection& f) {
    return std::any_of(sets.begin(), sets.end(), [&](const Detection& s) {
      return s.box.contains_point(f.box.center_x(), f.box.center_y());
    });
  };
  const int n_fragments = static_cast<int>(
      std::count_if(fragments.begin(), fragments.end(), inside_a_set));
  const int n_sets = static_cast<int>(sets.size());
  diag.n_fragments = n_fragments;
  diag.raw_ratio = static_cast<double>(n_fragments) / n_sets;
  verdict.outcome = ratio_final_score(n_fragments, n_sets, policy);
  return verdict;
}

inline SlideVerdict run_classification_only(const SlideInput& input) {
  if (!input.classifier_fragment_count) {
    throw ContractViolation("slide " + input.slide_id +
                            ": classification mode needs the classifier "
                            "fragment count");
  }
  SlideVerdict verdict;
  verdict.slide_id = input.slide_id;
  verdict.diagnostics.n_sets_detected =
      static_cast<int>(input.set_detections.size());
  if (input.classifier_set_count) {
    verdict.diagnostics.n_sets_classifier = input.classifier_set_count->value();
  }
  verdict.outcome = Accepted{*input.classifier_fragment_count};
  return verdict;
}

inline SlideVerdict run_slide(const SlideInput& input, PipelineMode mode,
                              const PipelineConfig& cfg,
                              RejectionPolicy policy) {
  switch (mode) {
    case PipelineMode::DetectionOnly: return run_detection_only(input, cfg, policy);
    case PipelineMode::ClassificationOnly: return run_classification_only(input);
    case PipelineMode::Hybrid: return run_hybrid(input, cfg, policy);
  }
  throw ContractViolation("unknown pipeline mode");
}

/// Runs every slide, possibly on several threads. Output order always
/// matches input order. The first exception thrown by any slide is
/// rethrown after all workers stop.
inline std::vector<SlideVerdict> run_batch(std::span<const SlideInput> inputs,
                                           PipelineMode mode,
                                           const PipelineConfig& cfg,
                                           RejectionPolicy policy,
                                           unsigned threads = 1) {
  std::vector<std::optional<SlideVerdict>> slots(inputs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= inputs.size() || failed.load()) return;
      try {
        slots[i] = run_slide(inputs[i], mode, cfg, policy);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
        return;
      }
    }
  };

  threads = std::max(1u, std::min<unsigned>(
                             threads, static_cast<unsigned>(inputs.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  std::vector<SlideVerdict> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace countpath
