// Copyright 2026 The ncpdrive Authors
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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ncpdrive/common.hpp"

// 8-bit RGB raster images and PNG encoding.
namespace ncpdrive::inline NCPD_PRECISION_NS {

struct Image
{
  std::size_t               height = 0;
  std::size_t               width  = 0;
  std::vector<std::uint8_t> rgb;  // height * width * 3, row-major

  Image() = default;
  Image(std::size_t h, std::size_t w, std::uint8_t fill = 0);

  bool empty() const noexcept
  {
    return rgb.empty();
  }
  std::uint8_t &at(std::size_t y, std::size_t x, std::size_t c)
  {
    return rgb[(y * width + x) * 3 + c];
  }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const
  {
    return rgb[(y * width + x) * 3 + c];
  }
  bool operator==(const Image &) const = default;
};

/// Mean of the BT.601 luma over all pixels.
double mean_luminance(const Image &image);

std::vector<std::uint8_t> encode_png(const Image &image);
/// Decodes any 8-bit PNG, converting grey/alpha/palette to RGB.
Image decode_png(std::span<const std::uint8_t> bytes);

void  write_png(const std::filesystem::path &path, const Image &image);
Image read_png(const std::filesystem::path &path);

/// Bilinear resampling with half-pixel centres, rounded to 8 bits.
Image resize(const Image &image, std::size_t height, std::size_t width);

}  // namespace ncpdrive
