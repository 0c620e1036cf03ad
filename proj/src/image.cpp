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

#include "ncpdrive/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

namespace ncpdrive::inline NCPD_PRECISION_NS {

Image::Image(std::size_t h, std::size_t w, std::uint8_t fill)
  : height(h)
  , width(w)
  , rgb(h * w * 3, fill)
{}

double mean_luminance(const Image &image)
{
  if (image.empty())
  {
    return 0.0;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < image.rgb.size(); i += 3)
  {
    total += 0.299 * image.rgb[i] + 0.587 * image.rgb[i + 1] + 0.114 * image.rgb[i + 2];
  }
  return total / static_cast<double>(image.height * image.width);
}

namespace {

struct WriteBuffer
{
  std::vector<std::uint8_t> bytes;
};

void write_callback(png_structp png, png_bytep data, png_size_t length)
{
  auto *buffer = static_cast<WriteBuffer *>(png_get_io_ptr(png));
  buffer->bytes.insert(buffer->bytes.end(), data, data + length);
}

struct ReadBuffer
{
  std::span<const std::uint8_t> bytes;
  std::size_t                   offset = 0;
};

void read_callback(png_structp png, png_bytep data, png_size_t length)
{
  auto *buffer = static_cast<ReadBuffer *>(png_get_io_ptr(png));
  if (buffer->offset + length > buffer->bytes.size())
  {
    png_error(png, "truncated PNG data");
  }
  std::memcpy(data, buffer->bytes.data() + buffer->offset, length);
  buffer->offset += length;
}

// libpng reports errors by longjmp; the message is kept for the C++ side.
struct ErrorSlot
{
  char message[256] = {};
};

[[noreturn]] void error_callback(png_structp png, png_const_charp message)
{
  auto *slot = static_cast<ErrorSlot *>(png_get_error_ptr(png));
  std::snprintf(slot->message, sizeof(slot->message), "%s", message);
  png_longjmp(png, 1);
}

void warning_callback(png_structp, png_const_charp) {}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image &image)
{
  if (image.empty())
  {
    throw FormatError("cannot encode an empty image");
  }
  ErrorSlot   slot;
  WriteBuffer buffer;
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, &slot, error_callback, warning_callback);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png)))
  {
    png_destroy_write_struct(&png, &info);
    throw FormatError(std::string("PNG: ") + slot.message);
  }
  png_set_write_fn(png, &buffer, write_callback, nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  // Fixed settings keep the encoded bytes reproducible.
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  for (std::size_t y = 0; y < image.height; ++y)
  {
    png_write_row(png, image.rgb.data() + y * image.width * 3);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return std::move(buffer.bytes);
}

Image decode_png(std::span<const std::uint8_t> bytes)
{
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
  {
    throw FormatError("not a PNG image");
  }
  ErrorSlot   slot;
  ReadBuffer  buffer{bytes, 0};
  Image       image;
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &slot, error_callback, warning_callback);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png)))
  {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(std::string("PNG: ") + slot.message);
  }
  png_set_read_fn(png, &buffer, read_callback);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  std::size_t const height = png_get_image_height(png, info);
  std::size_t const width  = png_get_image_width(png, info);
  if (png_get_rowbytes(png, info) != width * 3 || height * width > (std::size_t{1} << 26))
  {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("unsupported PNG layout");
  }
  image = Image(height, width);
  for (std::size_t y = 0; y < height; ++y)
  {
    png_read_row(png, image.rgb.data() + y * width * 3, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

void write_png(const std::filesystem::path &path, const Image &image)
{
  std::vector<std::uint8_t> const bytes = encode_png(image);
  std::ofstream                   out(path, std::ios::binary);
  out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out)
  {
    throw Error("cannot write " + path.string());
  }
}

Image read_png(const std::filesystem::path &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw Error("cannot open image " + path.string());
  }
  std::vector<std::uint8_t> const bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  try
  {
    return decode_png(bytes);
  }
  catch (const FormatError &e)
  {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Image resize(const Image &image, std::size_t height, std::size_t width)
{
  if (image.empty() || height == 0 || width == 0)
  {
    throw ShapeError("resize needs non-empty source and target sizes");
  }
  Image        out(height, width);
  double const sy = static_cast<double>(image.height) / static_cast<double>(height);
  double const sx = static_cast<double>(image.width) / static_cast<double>(width);
  for (std::size_t y = 0; y < height; ++y)
  {
    double const fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(image.height - 1));
    std::size_t const y0 = static_cast<std::size_t>(fy);
    std::size_t const y1 = std::min(y0 + 1, image.height - 1);
    double const      ty = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x)
    {
      double const fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(image.width - 1));
      std::size_t const x0 = static_cast<std::size_t>(fx);
      std::size_t const x1 = std::min(x0 + 1, image.width - 1);
      double const      tx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < 3; ++c)
      {
        double const top = image.at(y0, x0, c) + (image.at(y0, x1, c) - image.at(y0, x0, c)) * tx;
        double const bot = image.at(y1, x0, c) + (image.at(y1, x1, c) - image.at(y1, x0, c)) * tx;
        out.at(y, x, c)  = static_cast<std::uint8_t>(std::lround(top + (bot - top) * ty));
      }
    }
  }
  return out;
}

}  // namespace ncpdrive
