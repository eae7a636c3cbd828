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

// Minimal RGB raster, crop-with-white-padding and PNG encoding.

#pragma once

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "countpath/errors.hpp"
#include "countpath/geometry.hpp"

namespace countpath {

struct Rgb {
  std::uint8_t r = 255;
  std::uint8_t g = 255;
  std::uint8_t b = 255;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kWhite{255, 255, 255};

class Image {
 public:
  Image(int width, int height, Rgb fill = kWhite)
      : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw ContractViolation("empty image");
    pixels_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }

  Rgb& at(int x, int y) { return pixels_[index(x, y)]; }
  const Rgb& at(int x, int y) const { return pixels_[index(x, y)]; }

  const std::vector<Rgb>& pixels() const { return pixels_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int width_;
  int height_;
  std::vector<Rgb> pixels_;
};

/// Cuts `region` out of `thumb`, scales it (nearest neighbour) to fit the
/// output square and pads the rest with white.
inline Image crop_image(const Image& thumb, const CropRegion& region) {
  const auto& rect = region.pixel_rect();
  if (rect.x < 0 || rect.y < 0 || rect.x + rect.width > thumb.width() ||
      rect.y + rect.height > thumb.height()) {
    throw ContractViolation("crop region outside the thumbnail");
  }
  Image out(region.output_side(), region.output_side(), kWhite);
  for (int y = 0; y < region.content_height(); ++y) {
    const int sy = std::min(rect.height - 1,
                            static_cast<int>((y + 0.5) * rect.height /
                                             region.content_height()));
    for (int x = 0; x < region.content_width(); ++x) {
      const int sx = std::min(rect.width - 1,
                              static_cast<int>((x + 0.5) * rect.width /
                                               region.content_width()));
      out.at(region.pad_left() + x, region.pad_top() + y) =
          thumb.at(rect.x + sx, rect.y + sy);
    }
  }
  return out;
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

inline void put_chunk(std::string& out, std::string_view type,
                      std::string_view data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  std::string body(type);
  body.append(data);
  out.append(body);
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()),
                         static_cast<uInt>(body.size()));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace detail

/// 8-bit RGB PNG, no interlacing, filter type 0 on every row.
inline std::string encode_png(const Image& img) {
  std::string raw;
  raw.reserve(static_cast<std::size_t>(img.height()) * (1 + 3 * img.width()));
  for (int y = 0; y < img.height(); ++y) {
    raw.push_back('\0');
    for (int x = 0; x < img.width(); ++x) {
      const auto& p = img.at(x, y);
      raw.push_back(static_cast<char>(p.r));
      raw.push_back(static_cast<char>(p.g));
      raw.push_back(static_cast<char>(p.b));
    }
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  std::string packed(packed_size, '\0');
  if (compress2(reinterpret_cast<Bytef*>(packed.data()), &packed_size,
                reinterpret_cast<const Bytef*>(raw.data()),
                static_cast<uLong>(raw.size()), Z_DEFAULT_COMPRESSION) != Z_OK) {
    throw Error("PNG compression failed");
  }
  packed.resize(packed_size);

  std::string png("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  detail::put_u32(ihdr, static_cast<std::uint32_t>(img.width()));
  detail::put_u32(ihdr, static_cast<std::uint32_t>(img.height()));
  ihdr.append({'\x08', '\x02', '\x00', '\x00', '\x00'});
  detail::put_chunk(png, "IHDR", ihdr);
  detail::put_chunk(png, "IDAT", packed);
  detail::put_chunk(png, "IEND", {});
  return png;
}

/// Width and height from a PNG header, or nullopt if `bytes` is not a PNG.
inline std::optional<std::pair<int, int>> png_dimensions(std::string_view bytes) {
  if (bytes.size() < 24 || bytes.substr(0, 8) != std::string_view("\x89PNG\r\n\x1a\n", 8) ||
      bytes.substr(12, 4) != "IHDR") {
    return std::nullopt;
  }
  auto u32 = [&](std::size_t at) {
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      v = (v << 8) | static_cast<unsigned char>(bytes[at + i]);
    }
    return v;
  };
  return std::pair<int, int>(static_cast<int>(u32(16)), static_cast<int>(u32(20)));
}

}  // namespace countpath
