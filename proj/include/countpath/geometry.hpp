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

// Domain types and box geometry shared by the whole pipeline.
//
// Boxes live in normalized thumbnail coordinates, [0,1] on both axes with
// the origin in the top-left corner. Conversion to pixels happens only in
// CropRegion.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "countpath/errors.hpp"

namespace countpath {

class BoundingBox {
 public:
  /// Throws ContractViolation unless 0 <= x_min < x_max <= 1 and likewise
  /// for y.
  static BoundingBox make(double x_min, double y_min, double x_max,
                          double y_max) {
    if (auto box = try_make(x_min, y_min, x_max, y_max)) return *box;
    throw ContractViolation("invalid bounding box [" + std::to_string(x_min) +
                            ", " + std::to_string(y_min) + ", " +
                            std::to_string(x_max) + ", " +
                            std::to_string(y_max) + "]");
  }

  static std::optional<BoundingBox> try_make(double x_min, double y_min,
                                             double x_max, double y_max) {
    const bool ok = std::isfinite(x_min) && std::isfinite(y_min) &&
                    std::isfinite(x_max) && std::isfinite(y_max) &&
                    0.0 <= x_min && x_min < x_max && x_max <= 1.0 &&
                    0.0 <= y_min && y_min < y_max && y_max <= 1.0;
    if (!ok) return std::nullopt;
    return BoundingBox(x_min, y_min, x_max, y_max);
  }

  static BoundingBox unit() { return BoundingBox(0.0, 0.0, 1.0, 1.0); }

  double x_min() const { return x_min_; }
  double y_min() const { return y_min_; }
  double x_max() const { return x_max_; }
  double y_max() const { return y_max_; }
  double width() const { return x_max_ - x_min_; }
  double height() const { return y_max_ - y_min_; }
  double center_x() const { return 0.5 * (x_min_ + x_max_); }
  double center_y() const { return 0.5 * (y_min_ + y_max_); }

  bool contains_point(double x, double y) const {
    return x_min_ <= x && x <= x_max_ && y_min_ <= y && y <= y_max_;
  }

  bool contains(const BoundingBox& other) const {
    return x_min_ <= other.x_min_ && other.x_max_ <= x_max_ &&
           y_min_ <= other.y_min_ && other.y_max_ <= y_max_;
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;

 private:
  BoundingBox(double x_min, double y_min, double x_max, double y_max)
      : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max) {}

  double x_min_;
  double y_min_;
  double x_max_;
  double y_max_;
};

enum class DetectionKind { Set, Fragment };

inline const char* to_string(DetectionKind kind) {
  return kind == DetectionKind::Set ? "set" : "fragment";
}

struct Detection {
  DetectionKind kind = DetectionKind::Set;
  BoundingBox box = BoundingBox::unit();
  double confidence = 1.0;
  std::string source_id;

  friend bool operator==(const Detection&, const Detection&) = default;
};

inline Detection make_detection(DetectionKind kind, const BoundingBox& box,
                                double confidence, std::string source_id = {}) {
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw ContractViolation("detection confidence outside [0,1]: " +
                            std::to_string(confidence));
  }
  return Detection{kind, box, confidence, std::move(source_id)};
}

/// Fragments-per-set class. 10 is the catch-all for "more than 9".
class ClassLabel {
 public:
  static constexpr int kMin = 1;
  static constexpr int kMax = 10;

  explicit ClassLabel(int value) : value_(value) {
    if (value < kMin || value > kMax) {
      throw ContractViolation("class label outside 1..10: " +
                              std::to_string(value));
    }
  }

  int value() const { return value_; }

  friend bool operator==(const ClassLabel&, const ClassLabel&) = default;
  friend auto operator<=>(const ClassLabel&, const ClassLabel&) = default;

 private:
  int value_;
};

/// One thumbnail's detector and classifier evidence.
///
/// `fragment_detections` holds whole-thumbnail fragment boxes (detection-only
/// mode). `crop_fragment_detections` holds one list per retained set, in
/// retained order, with boxes normalized to the padded square crop.
struct SlideInput {
  std::string slide_id;
  int thumb_width = 1024;
  int thumb_height = 1024;
  std::vector<Detection> set_detections;
  std::optional<ClassLabel> classifier_set_count;
  std::vector<Detection> fragment_detections;
  std::optional<std::vector<std::vector<Detection>>> crop_fragment_detections;
  std::optional<ClassLabel> classifier_fragment_count;

  friend bool operator==(const SlideInput&, const SlideInput&) = default;
};

/// Checks that every detection sits in the slot matching its kind.
inline void validate_slide_input(const SlideInput& input) {
  auto check = [&](const std::vector<Detection>& dets, DetectionKind want,
                   const char* slot) {
    for (const auto& d : dets) {
      if (d.kind != want) {
        throw ContractViolation("slide " + input.slide_id + ": " +
                                to_string(d.kind) + " detection in " + slot);
      }
    }
  };
  if (input.thumb_width <= 0 || input.thumb_height <= 0) {
    throw ContractViolation("slide " + input.slide_id +
                            ": non-positive thumbnail size");
  }
  check(input.set_detections, DetectionKind::Set, "set_detections");
  check(input.fragment_detections, DetectionKind::Fragment,
        "fragment_detections");
  if (input.crop_fragment_detections) {
    for (const auto& crop : *input.crop_fragment_detections) {
      check(crop, DetectionKind::Fragment, "crop_fragment_detections");
    }
  }
}

inline double area(const BoundingBox& b) {
  return (b.x_max() - b.x_min()) * (b.y_max() - b.y_min());
}

inline double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double w = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const double h = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

inline double intersection_over_union(const BoundingBox& a,
                                      const BoundingBox& b) {
  if (a == b) return 1.0;
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  return inter / (area(a) + area(b) - inter);
}

/// Two boxes "overlap at their vertices" when they share positive area.
/// Boxes that only touch along an edge or at a corner do not overlap.
inline bool vertices_overlap(const BoundingBox& a, const BoundingBox& b) {
  return intersection_area(a, b) > 0.0;
}

/// When two boxes count as redundant during suppression. The default is
/// the strict positive-area rule; `iou_above(t)` relaxes it to IoU > t.
class OverlapRule {
 public:
  static OverlapRule strict() { return OverlapRule(0.0); }

  static OverlapRule iou_above(double threshold) {
    if (!(threshold >= 0.0 && threshold < 1.0)) {
      throw ContractViolation("IoU threshold must lie in [0,1)");
    }
    return OverlapRule(threshold);
  }

  bool is_strict() const { return threshold_ == 0.0; }
  double threshold() const { return threshold_; }

  bool overlaps(const BoundingBox& a, const BoundingBox& b) const {
    if (is_strict()) return vertices_overlap(a, b);
    return intersection_over_union(a, b) > threshold_;
  }

  friend bool operator==(const OverlapRule&, const OverlapRule&) = default;

 private:
  explicit OverlapRule(double threshold) : threshold_(threshold) {}
  double threshold_;
};

struct PixelRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Geometric instruction for cutting one set out of a thumbnail: the set's
/// pixel rectangle, scaled to fit `output_side` and centered on a white
/// square canvas.
class CropRegion {
 public:
  static constexpr unsigned char kPadValue = 255;

  CropRegion(std::string slide_id, int set_index, PixelRect rect,
             int output_side)
      : slide_id_(std::move(slide_id)),
        set_index_(set_index),
        rect_(rect),
        output_side_(output_side) {
    if (set_index < 0 || output_side <= 0 || rect.width <= 0 ||
        rect.height <= 0) {
      throw ContractViolation("invalid crop region");
    }
    const int longest = std::max(rect.width, rect.height);
    scale_ = static_cast<double>(output_side) / longest;
    content_width_ = std::clamp(
        static_cast<int>(std::lround(rect.width * scale_)), 1, output_side);
    content_height_ = std::clamp(
        static_cast<int>(std::lround(rect.height * scale_)), 1, output_side);
    pad_left_ = (output_side - content_width_) / 2;
    pad_top_ = (output_side - content_height_) / 2;
  }

  /// Pixel rectangle covering `box` in a `width`×`height` thumbnail. Edges
  /// are rounded outward so the rectangle contains the box.
  static PixelRect pixel_rect_for(const BoundingBox& box, int width,
                                  int height) {
    int x0 = static_cast<int>(std::floor(box.x_min() * width + 1e-9));
    int y0 = static_cast<int>(std::floor(box.y_min() * height + 1e-9));
    int x1 = static_cast<int>(std::ceil(box.x_max() * width - 1e-9));
    int y1 = static_cast<int>(std::ceil(box.y_max() * height - 1e-9));
    x0 = std::clamp(x0, 0, width - 1);
    y0 = std::clamp(y0, 0, height - 1);
    x1 = std::clamp(x1, x0 + 1, width);
    y1 = std::clamp(y1, y0 + 1, height);
    return PixelRect{x0, y0, x1 - x0, y1 - y0};
  }

  const std::string& slide_id() const { return slide_id_; }
  int set_index() const { return set_index_; }
  const PixelRect& pixel_rect() const { return rect_; }
  int output_side() const { return output_side_; }
  double scale() const { return scale_; }
  int content_width() const { return content_width_; }
  int content_height() const { return content_height_; }
  int pad_left() const { return pad_left_; }
  int pad_top() const { return pad_top_; }
  int pad_right() const { return output_side_ - content_width_ - pad_left_; }
  int pad_bottom() const { return output_side_ - content_height_ - pad_top_; }

  /// Maps a thumbnail-normalized box into crop-normalized coordinates,
  /// clipped to the crop content. Returns nullopt when nothing remains.
  std::optional<BoundingBox> to_crop(const BoundingBox& box, int thumb_width,
                                     int thumb_height) const {
    const double sx = static_cast<double>(content_width_) / rect_.width;
    const double sy = static_cast<double>(content_height_) / rect_.height;
    auto map_x = [&](double x) {
      const double px = std::clamp(x * thumb_width, double(rect_.x),
                                   double(rect_.x + rect_.width));
      return (pad_left_ + (px - rect_.x) * sx) / output_side_;
    };
    auto map_y = [&](double y) {
      const double py = std::clamp(y * thumb_height, double(rect_.y),
                                   double(rect_.y + rect_.height));
      return (pad_top_ + (py - rect_.y) * sy) / output_side_;
    };
    return BoundingBox::try_make(
        std::clamp(map_x(box.x_min()), 0.0, 1.0),
        std::clamp(map_y(box.y_min()), 0.0, 1.0),
        std::clamp(map_x(box.x_max()), 0.0, 1.0),
        std::clamp(map_y(box.y_max()), 0.0, 1.0));
  }

  /// Inverse of to_crop for boxes inside the content area; padding is
  /// clipped away. Returns nullopt for boxes entirely in the padding.
  std::optional<BoundingBox> to_thumbnail(const BoundingBox& crop_box,
                                          int thumb_width,
                                          int thumb_height) const {
    const double sx = static_cast<double>(content_width_) / rect_.width;
    const double sy = static_cast<double>(content_height_) / rect_.height;
    auto unmap_x = [&](double x) {
      const double cx = std::clamp(x * output_side_, double(pad_left_),
                                   double(pad_left_ + content_width_));
      return (rect_.x + (cx - pad_left_) / sx) / thumb_width;
    };
    auto unmap_y = [&](double y) {
      const double cy = std::clamp(y * output_side_, double(pad_top_),
                                   double(pad_top_ + content_height_));
      return (rect_.y + (cy - pad_top_) / sy) / thumb_height;
    };
    return BoundingBox::try_make(
        std::clamp(unmap_x(crop_box.x_min()), 0.0, 1.0),
        std::clamp(unmap_y(crop_box.y_min()), 0.0, 1.0),
        std::clamp(unmap_x(crop_box.x_max()), 0.0, 1.0),
        std::clamp(unmap_y(crop_box.y_max()), 0.0, 1.0));
  }

 private:
  std::string slide_id_;
  int set_index_;
  PixelRect rect_;
  int output_side_;
  double scale_ = 1.0;
  int content_width_ = 0;
  int content_height_ = 0;
  int pad_left_ = 0;
  int pad_top_ = 0;
};

}  // namespace countpath
