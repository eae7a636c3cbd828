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

// Detection directory layout, one slide per file group:
//
//   <slide_id>.txt        whole-thumbnail sets (class 0) and fragments (class 1)
//   <slide_id>.cls        classifier outputs (`sets N`, `fragments N`)
//   <slide_id>.crop<k>.txt  fragments in the k-th retained set crop, k = 0, 1, ...
//
// Crop files are numbered in retained-set order.

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "countpath/detection_io.hpp"
#include "countpath/errors.hpp"
#include "countpath/image.hpp"
#include "countpath/pipeline.hpp"
#include "countpath/tables.hpp"

namespace countpath {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes through a temporary file and renames it into place.
inline void write_file(const fs::path& path, std::string_view data) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline fs::path crop_file(const fs::path& dir, const std::string& slide_id, std::size_t k) {
  return dir / (slide_id + ".crop" + std::to_string(k) + ".txt");
}

struct LoadedSlide {
  SlideInput input;
  int clamped_values = 0;
};

/// Reads the files `mode` needs for one slide. Missing required files are
/// ParseErrors naming the file.
inline LoadedSlide load_slide_input(const fs::path& dir, const std::string& slide_id,
                                    PipelineMode mode, int thumb_width = 1024,
                                    int thumb_height = 1024) {
  LoadedSlide out;
  auto& input = out.input;
  input.slide_id = slide_id;
  input.thumb_width = thumb_width;
  input.thumb_height = thumb_height;

  const fs::path main = dir / (slide_id + ".txt");
  const fs::path cls = dir / (slide_id + ".cls");
  auto require = [&](const fs::path& p) {
    if (!fs::exists(p)) throw ParseError(p.string(), 0, 0, "file not found");
  };
  if (mode != PipelineMode::ClassificationOnly) require(main);
  if (mode != PipelineMode::DetectionOnly) require(cls);

  if (fs::exists(main)) {
    auto parsed = parse_detection_file(read_file(main), main.string());
    out.clamped_values += parsed.clamped_values;
    for (auto& d : parsed.detections) {
      (d.kind == DetectionKind::Set ? input.set_detections : input.fragment_detections)
          .push_back(std::move(d));
    }
  }
  if (fs::exists(cls)) {
    const auto c = parse_classifier_file(read_file(cls), cls.string());
    input.classifier_set_count = c.sets;
    input.classifier_fragment_count = c.fragments;
  }
  std::vector<std::vector<Detection>> crops;
  for (std::size_t k = 0;; ++k) {
    const auto p = crop_file(dir, slide_id, k);
    if (!fs::exists(p)) break;
    auto parsed = parse_detection_file(read_file(p), p.string());
    out.clamped_values += parsed.clamped_values;
    for (const auto& d : parsed.detections) {
      if (d.kind != DetectionKind::Fragment) {
        throw ParseError(p.string(), 0, 0, "crop files may only hold fragments (class 1)");
      }
    }
    crops.push_back(std::move(parsed.detections));
  }
  input.crop_fragment_detections = std::move(crops);
  return out;
}

inline void write_slide_input(const fs::path& dir, const SlideInput& input) {
  fs::create_directories(dir);
  std::vector<Detection> whole = input.set_detections;
  whole.insert(whole.end(), input.fragment_detections.begin(),
               input.fragment_detections.end());
  write_file(dir / (input.slide_id + ".txt"), format_detection_file(whole));
  write_file(dir / (input.slide_id + ".cls"),
             format_classifier_file({input.classifier_set_count,
                                     input.classifier_fragment_count}));
  if (input.crop_fragment_detections) {
    const auto& crops = *input.crop_fragment_detections;
    for (std::size_t k = 0; k < crops.size(); ++k) {
      write_file(crop_file(dir, input.slide_id, k), format_detection_file(crops[k]));
    }
  }
}

/// Thumbnail size from the PNG header when the file exists, else 1024².
inline std::pair<int, int> thumbnail_size(const fs::path& path) {
  std::error_code ec;
  if (!path.empty() && fs::is_regular_file(path, ec)) {
    std::ifstream in(path, std::ios::binary);
    std::string head(24, '\0');
    in.read(head.data(), 24);
    if (auto dims = png_dimensions(head)) return *dims;
  }
  return {1024, 1024};
}

struct LoadedBatch {
  std::vector<SlideInput> inputs;
  int clamped_values = 0;
};

/// Every manifest slide, in manifest order. Relative thumbnail paths are
/// resolved against `thumbnail_root`.
inline LoadedBatch load_batch(const Manifest& manifest, const fs::path& detections_dir,
                              PipelineMode mode, const fs::path& thumbnail_root = {}) {
  if (!fs::is_directory(detections_dir)) {
    throw ContractViolation("detections directory not found: " + detections_dir.string());
  }
  LoadedBatch batch;
  for (const auto& e : manifest.entries) {
    fs::path thumb = e.thumbnail_path;
    if (!thumb.empty() && thumb.is_relative()) thumb = thumbnail_root / thumb;
    const auto [w, h] = thumbnail_size(thumb);
    auto loaded = load_slide_input(detections_dir, e.slide_id, mode, w, h);
    batch.clamped_values += loaded.clamped_values;
    batch.inputs.push_back(std::move(loaded.input));
  }
  return batch;
}

}  // namespace countpath
