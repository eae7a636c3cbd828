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

// Deterministic synthetic slides with known fragment counts, plus a noisy
// stand-in for the set/fragment detectors and the set/fragment classifier.
//
// A scene holds 1..4 disjoint sets; every set repeats the same fragment
// layout. All randomness goes through Rng, which draws raw 64-bit words
// from std::mt19937_64 and shapes them itself, so results do not depend on
// the standard library's distribution implementations.

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "countpath/errors.hpp"
#include "countpath/geometry.hpp"
#include "countpath/image.hpp"
#include "countpath/pipeline.hpp"

namespace countpath {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream keyed by a tuple of integers.
  static Rng derive(std::initializer_list<std::uint64_t> keys) {
    std::vector<std::uint32_t> words;
    for (auto k : keys) {
      words.push_back(static_cast<std::uint32_t>(k & 0xffffffffu));
      words.push_back(static_cast<std::uint32_t>(k >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return Rng(std::mt19937_64(seq));
  }

  /// Uniform in [0,1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
  }

  double normal() {
    const double u1 = 1.0 - uniform();  // (0,1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  int poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    const double limit = std::exp(-lambda);
    int k = 0;
    double p = uniform();
    while (p > limit) {
      ++k;
      p *= uniform();
    }
    return k;
  }

 private:
  explicit Rng(std::mt19937_64 engine) : engine_(std::move(engine)) {}
  std::mt19937_64 engine_;
};

struct SceneParams {
  int n_sets = 1;
  int n_fragments_per_set = 1;
};

enum class FragmentShape { Ellipse, RoundedRect };

struct SyntheticScene {
  std::uint64_t seed = 0;
  int n_sets = 0;
  int n_fragments_per_set = 0;
  std::vector<BoundingBox> set_boxes;
  // fragment_boxes[s] are the fragments of set s, in thumbnail coordinates.
  std::vector<std::vector<BoundingBox>> fragment_boxes;
  std::vector<FragmentShape> fragment_shapes;  // one per layout slot
  ClassLabel true_label{1};

  friend bool operator==(const SyntheticScene&, const SyntheticScene&) = default;
};

inline constexpr int kMaxPlacementAttempts = 10000;
inline constexpr int kThumbnailSide = 1024;

namespace detail {

// Gaps keep neighbouring boxes apart by a visible margin, so box jitter
// rarely turns neighbours into overlaps.
inline constexpr double kSetGap = 0.03;
inline constexpr double kFragmentGap = 0.03;  // relative to the set box
inline constexpr double kFragmentMargin = 0.05;

struct Rect {
  double x0, y0, x1, y1;
};

inline bool separated(const Rect& a, const Rect& b, double gap) {
  return a.x1 + gap <= b.x0 || b.x1 + gap <= a.x0 || a.y1 + gap <= b.y0 ||
         b.y1 + gap <= a.y0;
}

/// Places `count` rectangles of random size in [lo, hi] within
/// [margin, 1-margin]², pairwise separated by `gap`. Restarts the layout
/// when one rectangle cannot be placed; gives up once `budget` is spent.
inline std::vector<Rect> place_rects(Rng& rng, int count, double lo, double hi,
                                     double margin, double gap, int& budget) {
  std::vector<Rect> placed;
  int stalls = 0;
  while (static_cast<int>(placed.size()) < count) {
    if (budget-- <= 0) {
      throw Error("synthetic scene packing infeasible: " +
                  std::to_string(count) + " boxes after " +
                  std::to_string(kMaxPlacementAttempts) + " attempts");
    }
    const double w = rng.uniform(lo, hi);
    const double h = rng.uniform(lo, hi);
    const double x0 = rng.uniform(margin, 1.0 - margin - w);
    const double y0 = rng.uniform(margin, 1.0 - margin - h);
    const Rect r{x0, y0, x0 + w, y0 + h};
    bool ok = true;
    for (const auto& p : placed) ok = ok && separated(p, r, gap);
    if (ok) {
      placed.push_back(r);
      stalls = 0;
    } else if (++stalls > 200) {
      placed.clear();
      stalls = 0;
    }
  }
  return placed;
}

}  // namespace detail

inline void validate(const SceneParams& p) {
  if (p.n_sets < 1 || p.n_sets > 4) throw ContractViolation("n_sets must be in 1..4");
  if (p.n_fragments_per_set < 1 || p.n_fragments_per_set > 12) {
    throw ContractViolation("n_fragments_per_set must be in 1..12");
  }
}

inline SyntheticScene generate_scene(std::uint64_t seed, const SceneParams& params) {
  validate(params);
  Rng rng = Rng::derive({seed, 0x5ce1e});
  int budget = kMaxPlacementAttempts;

  const double set_hi = params.n_sets == 1 ? 0.8 : params.n_sets == 2 ? 0.45 : 0.4;
  const double set_lo = params.n_sets == 1 ? 0.3 : 0.2;
  const auto sets = detail::place_rects(rng, params.n_sets, set_lo, set_hi, 0.02,
                                        detail::kSetGap, budget);

  const int k = params.n_fragments_per_set;
  const double base = std::min(0.4, 0.55 / std::sqrt(static_cast<double>(k)));
  const auto layout =
      detail::place_rects(rng, k, 0.6 * base, base, detail::kFragmentMargin,
                          detail::kFragmentGap, budget);

  SyntheticScene scene;
  scene.seed = seed;
  scene.n_sets = params.n_sets;
  scene.n_fragments_per_set = k;
  scene.true_label = clamp_class(k);
  for (int i = 0; i < k; ++i) {
    scene.fragment_shapes.push_back(rng.uniform() < 0.5 ? FragmentShape::Ellipse
                                                        : FragmentShape::RoundedRect);
  }
  for (const auto& s : sets) {
    const auto set_box = BoundingBox::make(s.x0, s.y0, s.x1, s.y1);
    std::vector<BoundingBox> frags;
    for (const auto& f : layout) {
      const double w = set_box.width();
      const double h = set_box.height();
      frags.push_back(BoundingBox::make(
          set_box.x_min() + f.x0 * w, set_box.y_min() + f.y0 * h,
          set_box.x_min() + f.x1 * w, set_box.y_min() + f.y1 * h));
    }
    scene.set_boxes.push_back(set_box);
    scene.fragment_boxes.push_back(std::move(frags));
  }
  return scene;
}

/// Scene parameters drawn from the seed: 1..4 sets, 1..12 fragments per set.
inline SceneParams random_scene_params(std::uint64_t seed) {
  Rng rng = Rng::derive({seed, 0x9a5a});
  return SceneParams{rng.uniform_int(1, 4), rng.uniform_int(1, 12)};
}

inline SyntheticScene generate_random_scene(std::uint64_t seed) {
  return generate_scene(seed, random_scene_params(seed));
}

inline std::string scene_slide_id(std::uint64_t seed) {
  return "synth-" + std::to_string(seed);
}

namespace detail {

inline std::string set_source(int i) { return "set" + std::to_string(i); }
inline std::string fragment_source(int set, int j) {
  return "set" + std::to_string(set) + ".frag" + std::to_string(j);
}

/// Fragment boxes of `scene` whose center lies in `region_box`, mapped to
/// crop coordinates.
template <typename MakeDetection>
std::vector<Detection> crop_fragments(const SyntheticScene& scene,
                                      const BoundingBox& region_box,
                                      const CropRegion& region,
                                      MakeDetection&& make) {
  std::vector<Detection> out;
  for (int s = 0; s < scene.n_sets; ++s) {
    for (int j = 0; j < scene.n_fragments_per_set; ++j) {
      const auto& f = scene.fragment_boxes[s][j];
      if (!region_box.contains_point(f.center_x(), f.center_y())) continue;
      if (auto det = make(s, j, f, region)) out.push_back(std::move(*det));
    }
  }
  return out;
}

}  // namespace detail

/// Noise-free detector and classifier outputs for `scene`.
inline SlideInput exact_detections(const SyntheticScene& scene,
                                   const PipelineConfig& cfg = {}) {
  SlideInput input;
  input.slide_id = scene_slide_id(scene.seed);
  input.thumb_width = kThumbnailSide;
  input.thumb_height = kThumbnailSide;
  for (int s = 0; s < scene.n_sets; ++s) {
    input.set_detections.push_back(
        Detection{DetectionKind::Set, scene.set_boxes[s], 1.0, detail::set_source(s)});
    for (int j = 0; j < scene.n_fragments_per_set; ++j) {
      input.fragment_detections.push_back(Detection{DetectionKind::Fragment,
                                                    scene.fragment_boxes[s][j], 1.0,
                                                    detail::fragment_source(s, j)});
    }
  }
  input.classifier_set_count = clamp_class(scene.n_sets);
  input.classifier_fragment_count = scene.true_label;

  const auto retained =
      prune_set_detections(input.set_detections, *input.classifier_set_count, cfg);
  const auto regions = make_crop_regions(retained, input.slide_id, input.thumb_width,
                                         input.thumb_height, cfg);
  std::vector<std::vector<Detection>> crops;
  for (std::size_t k = 0; k < retained.size(); ++k) {
    crops.push_back(detail::crop_fragments(
        scene, retained[k].box, regions[k],
        [&](int s, int j, const BoundingBox& f,
            const CropRegion& region) -> std::optional<Detection> {
          auto mapped = region.to_crop(f, input.thumb_width, input.thumb_height);
          if (!mapped) return std::nullopt;
          return Detection{DetectionKind::Fragment, *mapped, 1.0,
                           detail::fragment_source(s, j)};
        }));
  }
  input.crop_fragment_detections = std::move(crops);
  return input;
}

/// How the simulated models err.
struct NoiseProfile {
  double miss_rate = 0.0;          // per true box, independently
  double spurious_rate = 0.0;      // expected spurious fragments per image
  double spurious_set_rate = 0.0;  // expected spurious sets per slide
  double box_jitter = 0.0;         // edge noise sigma, relative to box size
  double true_confidence_lo = 1.0;
  double true_confidence_hi = 1.0;
  double spurious_confidence_lo = 0.0;
  double spurious_confidence_hi = 0.0;
  double classifier_error_rate = 0.0;  // chance each classifier output is off by one

  void validate() const {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    const bool ok = unit(miss_rate) && spurious_rate >= 0.0 &&
                    spurious_set_rate >= 0.0 && box_jitter >= 0.0 &&
                    unit(true_confidence_lo) && unit(true_confidence_hi) &&
                    true_confidence_lo <= true_confidence_hi &&
                    unit(spurious_confidence_lo) && unit(spurious_confidence_hi) &&
                    spurious_confidence_lo <= spurious_confidence_hi &&
                    unit(classifier_error_rate);
    if (!ok) throw ContractViolation("noise profile out of range");
  }

  static NoiseProfile none() { return {}; }

  static NoiseProfile light() {
    return {0.002, 0.02, 0.02, 0.01, 0.7, 1.0, 0.05, 0.4, 0.02};
  }

  static NoiseProfile moderate() {
    return {0.005, 0.05, 0.05, 0.02, 0.5, 1.0, 0.05, 0.6, 0.05};
  }

  static NoiseProfile heavy() {
    return {0.02, 0.2, 0.1, 0.04, 0.3, 1.0, 0.05, 0.8, 0.1};
  }

  static std::optional<NoiseProfile> named(const std::string& name) {
    if (name == "none") return none();
    if (name == "light") return light();
    if (name == "moderate") return moderate();
    if (name == "heavy") return heavy();
    return std::nullopt;
  }

  friend bool operator==(const NoiseProfile&, const NoiseProfile&) = default;
};

namespace detail {

inline std::optional<BoundingBox> jitter_box(Rng& rng, const BoundingBox& b,
                                             double sigma) {
  const double dx0 = rng.normal() * sigma * b.width();
  const double dy0 = rng.normal() * sigma * b.height();
  const double dx1 = rng.normal() * sigma * b.width();
  const double dy1 = rng.normal() * sigma * b.height();
  if (sigma == 0.0) return b;
  return BoundingBox::try_make(
      std::clamp(b.x_min() + dx0, 0.0, 1.0), std::clamp(b.y_min() + dy0, 0.0, 1.0),
      std::clamp(b.x_max() + dx1, 0.0, 1.0), std::clamp(b.y_max() + dy1, 0.0, 1.0));
}

inline BoundingBox random_box(Rng& rng, double lo, double hi) {
  const double w = rng.uniform(lo, hi);
  const double h = rng.uniform(lo, hi);
  const double x0 = rng.uniform(0.0, 1.0 - w);
  const double y0 = rng.uniform(0.0, 1.0 - h);
  return BoundingBox::make(x0, y0, x0 + w, y0 + h);
}

inline ClassLabel flip_by_one(Rng& rng, int value, double rate) {
  const double u = rng.uniform();
  const bool up = rng.uniform() < 0.5;
  if (u >= rate) return ClassLabel(value);
  int v = up ? value + 1 : value - 1;
  if (v < ClassLabel::kMin) v = value + 1;
  if (v > ClassLabel::kMax) v = value - 1;
  return ClassLabel(v);
}

// Stream tags keep each random decision independent of the others, so
// raising one rate does not reshuffle unrelated draws.
enum Stream : std::uint64_t {
  kSetStream = 1,
  kClassifierStream,
  kWholeFragmentStream,
  kWholeSpuriousStream,
  kCropFragmentStream,
  kCropSpuriousStream,
  kSpuriousSetStream,
};

}  // namespace detail

/// Noisy detector/classifier outputs for `scene`. Crop detections are
/// produced for the sets the pipeline would retain under `cfg`.
inline SlideInput perturb(const SyntheticScene& scene, const NoiseProfile& noise,
                          std::uint64_t noise_seed, const PipelineConfig& cfg = {}) {
  using namespace detail;
  noise.validate();
  const std::uint64_t sid = scene.seed;
  auto conf_true = [&](Rng& rng) {
    return rng.uniform(noise.true_confidence_lo, noise.true_confidence_hi);
  };
  auto conf_spurious = [&](Rng& rng) {
    return rng.uniform(noise.spurious_confidence_lo, noise.spurious_confidence_hi);
  };

  SlideInput input;
  input.slide_id = scene_slide_id(sid);
  input.thumb_width = kThumbnailSide;
  input.thumb_height = kThumbnailSide;

  // Which true set (or spurious set, offset by 1000) each set detection
  // came from; crop noise streams are keyed by this origin.
  std::map<std::string, std::uint64_t> origin;

  for (int s = 0; s < scene.n_sets; ++s) {
    Rng rng = Rng::derive({noise_seed, sid, kSetStream, std::uint64_t(s)});
    const double u = rng.uniform();
    const double conf = conf_true(rng);
    auto box = jitter_box(rng, scene.set_boxes[s], noise.box_jitter);
    if (u < noise.miss_rate || !box) continue;
    input.set_detections.push_back(
        Detection{DetectionKind::Set, *box, conf, set_source(s)});
    origin[set_source(s)] = std::uint64_t(s);
  }
  {
    Rng rng = Rng::derive({noise_seed, sid, kSpuriousSetStream});
    const int n = rng.poisson(noise.spurious_set_rate);
    for (int i = 0; i < n; ++i) {
      const auto box = random_box(rng, 0.1, 0.3);
      const std::string src = "spurious_set" + std::to_string(i);
      input.set_detections.push_back(
          Detection{DetectionKind::Set, box, conf_spurious(rng), src});
      origin[src] = 1000 + std::uint64_t(i);
    }
  }
  {
    Rng rng = Rng::derive({noise_seed, sid, kClassifierStream});
    input.classifier_set_count =
        flip_by_one(rng, std::min(scene.n_sets, 10), noise.classifier_error_rate);
    input.classifier_fragment_count =
        flip_by_one(rng, scene.true_label.value(), noise.classifier_error_rate);
  }

  for (int s = 0; s < scene.n_sets; ++s) {
    for (int j = 0; j < scene.n_fragments_per_set; ++j) {
      Rng rng = Rng::derive(
          {noise_seed, sid, kWholeFragmentStream, std::uint64_t(s), std::uint64_t(j)});
      const double u = rng.uniform();
      const double conf = conf_true(rng);
      auto box = jitter_box(rng, scene.fragment_boxes[s][j], noise.box_jitter);
      if (u < noise.miss_rate || !box) continue;
      input.fragment_detections.push_back(
          Detection{DetectionKind::Fragment, *box, conf, fragment_source(s, j)});
    }
  }
  {
    Rng rng = Rng::derive({noise_seed, sid, kWholeSpuriousStream});
    const int n = rng.poisson(noise.spurious_rate);
    for (int i = 0; i < n; ++i) {
      const auto box = random_box(rng, 0.01, 0.06);
      input.fragment_detections.push_back(Detection{
          DetectionKind::Fragment, box, conf_spurious(rng),
          "spurious_frag" + std::to_string(i)});
    }
  }

  const auto retained =
      prune_set_detections(input.set_detections, *input.classifier_set_count, cfg);
  std::vector<std::vector<Detection>> crops;
  if (!retained.empty()) {
    const auto regions = make_crop_regions(retained, input.slide_id,
                                           input.thumb_width, input.thumb_height, cfg);
    for (std::size_t k = 0; k < retained.size(); ++k) {
      const std::uint64_t from = origin.at(retained[k].source_id);
      auto crop = crop_fragments(
          scene, retained[k].box, regions[k],
          [&](int s, int j, const BoundingBox& f,
              const CropRegion& region) -> std::optional<Detection> {
            Rng rng = Rng::derive({noise_seed, sid, kCropFragmentStream, from,
                                   std::uint64_t(s), std::uint64_t(j)});
            const double u = rng.uniform();
            const double conf = conf_true(rng);
            auto box = jitter_box(rng, f, noise.box_jitter);
            if (u < noise.miss_rate || !box) return std::nullopt;
            auto mapped = region.to_crop(*box, input.thumb_width, input.thumb_height);
            if (!mapped) return std::nullopt;
            return Detection{DetectionKind::Fragment, *mapped, conf,
                             fragment_source(s, j)};
          });
      Rng rng = Rng::derive({noise_seed, sid, kCropSpuriousStream, from});
      const int n = rng.poisson(noise.spurious_rate);
      for (int i = 0; i < n; ++i) {
        crop.push_back(Detection{DetectionKind::Fragment, random_box(rng, 0.02, 0.1),
                                 conf_spurious(rng),
                                 "spurious_frag" + std::to_string(i)});
      }
      crops.push_back(std::move(crop));
    }
  }
  input.crop_fragment_detections = std::move(crops);
  return input;
}

/// 1024×1024 rendering: white background, each set a pale tinted region
/// with a darker border, fragments filled inside it.
inline Image render_thumbnail(const SyntheticScene& scene) {
  Image img(kThumbnailSide, kThumbnailSide, kWhite);
  constexpr Rgb kSetFill{246, 236, 242};
  constexpr Rgb kSetBorder{200, 170, 190};
  constexpr Rgb kTissue{178, 92, 140};
  const int side = kThumbnailSide;

  auto to_px = [&](const BoundingBox& b) {
    return CropRegion::pixel_rect_for(b, side, side);
  };
  for (const auto& set_box : scene.set_boxes) {
    const auto r = to_px(set_box);
    for (int y = r.y; y < r.y + r.height; ++y) {
      for (int x = r.x; x < r.x + r.width; ++x) {
        const bool border = x == r.x || y == r.y || x == r.x + r.width - 1 ||
                            y == r.y + r.height - 1;
        img.at(x, y) = border ? kSetBorder : kSetFill;
      }
    }
  }
  for (const auto& frags : scene.fragment_boxes) {
    for (std::size_t j = 0; j < frags.size(); ++j) {
      const auto& f = frags[j];
      const auto r = to_px(f);
      const double cx = f.center_x() * side;
      const double cy = f.center_y() * side;
      const double rx = 0.5 * f.width() * side;
      const double ry = 0.5 * f.height() * side;
      const double corner = 0.25 * std::min(rx, ry);
      for (int y = r.y; y < r.y + r.height; ++y) {
        for (int x = r.x; x < r.x + r.width; ++x) {
          const double px = x + 0.5 - cx;
          const double py = y + 0.5 - cy;
          bool inside = false;
          if (scene.fragment_shapes[j] == FragmentShape::Ellipse) {
            inside = (px * px) / (rx * rx) + (py * py) / (ry * ry) <= 1.0;
          } else {
            const double qx = std::max(std::abs(px) - (rx - corner), 0.0);
            const double qy = std::max(std::abs(py) - (ry - corner), 0.0);
            inside = std::abs(px) <= rx && std::abs(py) <= ry &&
                     qx * qx + qy * qy <= corner * corner;
          }
          if (inside) img.at(x, y) = kTissue;
        }
      }
    }
  }
  return img;
}

}  // namespace countpath
