/* Copyright (c) 2026 The i2imix Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#pragma once

#include <png.h>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "i2imix/errors.hpp"
#include "i2imix/tensor.hpp"

namespace i2imix {

/// Which side of the translation an image belongs to. X = photos,
/// Y = color-coded semantic labels.
enum class Domain { X, Y };

/// 8-bit interleaved RGB image, the on-disk representation.
struct Image8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // h * w * 3, row-major, interleaved

  Image8() = default;
  Image8(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t& at(int y, int x, int c) {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int y, int x, int c) const {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  void set_pixel(int y, int x, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    at(y, x, 0) = r;
    at(y, x, 1) = g;
    at(y, x, 2) = b;
  }
};

namespace detail {
struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
}  // namespace detail

inline Image8 load_png8(const std::string& path) {
  std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open PNG for reading: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }

  Image8 img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("PNG decode error: " + path);
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);

  // Normalize anything we are handed to 8-bit RGB.
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
    png_set_strip_alpha(png);
  png_read_update_info(png, info);

  img = Image8(static_cast<int>(w), static_cast<int>(h));
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y)
    rows[y] = img.rgb.data() + static_cast<std::size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

inline void save_png8(const std::string& path, const Image8& img) {
  if (img.width <= 0 || img.height <= 0) throw InvalidInputError("empty image in save_png8");
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());

  std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open PNG for writing: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  std::vector<png_bytep> rows(img.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encode error: " + path);
  }

  png_init_io(png, fp.get());
  // Fixed settings keep output byte-identical for identical pixels.
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(img.rgb.data() + static_cast<std::size_t>(y) * img.width * 3);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// 8-bit [0,255] -> float CHW in [-1,1].
template <typename T = float>
Tensor<T> to_float_image(const Image8& img) {
  Tensor<T> t({3, img.height, img.width});
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        t.at(c, y, x) = static_cast<T>(static_cast<double>(img.at(y, x, c)) / 127.5 - 1.0);
  return t;
}

/// float CHW in [-1,1] -> 8-bit [0,255] (clamped, rounded).
template <typename T>
Image8 to_image8(const Tensor<T>& t) {
  if (t.rank() != 3 || t.dim(0) != 3) throw InvalidInputError("to_image8 expects a 3xHxW tensor");
  Image8 img(t.dim(2), t.dim(1));
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double v = (static_cast<double>(t.at(c, y, x)) + 1.0) * 127.5;
        v = std::clamp(v, 0.0, 255.0);
        img.at(y, x, c) = static_cast<std::uint8_t>(std::lround(v));
      }
  return img;
}

template <typename T = float>
Tensor<T> load_image(const std::string& path) {
  return to_float_image<T>(load_png8(path));
}

template <typename T>
void save_image(const std::string& path, const Tensor<T>& t) {
  save_png8(path, to_image8(t));
}

namespace detail {

// Catmull-Rom cubic kernel (a = -0.5), the common bicubic choice.
inline double cubic_weight(double t) {
  constexpr double a = -0.5;
  t = std::fabs(t);
  if (t < 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

template <typename T>
void resize_bicubic_axis(const T* src, int n_src, std::size_t src_stride, T* dst, int n_dst,
                         std::size_t dst_stride) {
  const double scale = static_cast<double>(n_src) / n_dst;
  for (int i = 0; i < n_dst; ++i) {
    const double center = (i + 0.5) * scale - 0.5;
    const int base = static_cast<int>(std::floor(center)) - 1;
    double acc = 0.0, wsum = 0.0;
    for (int k = 0; k < 4; ++k) {
      const int j = std::clamp(base + k, 0, n_src - 1);
      const double w = cubic_weight(center - (base + k));
      acc += w * static_cast<double>(src[static_cast<std::size_t>(j) * src_stride]);
      wsum += w;
    }
    dst[static_cast<std::size_t>(i) * dst_stride] = static_cast<T>(acc / wsum);
  }
}

}  // namespace detail

/// Separable bicubic resize of a CHW tensor. Values are clamped back into
/// [-1,1] because the cubic kernel overshoots near edges.
template <typename T>
Tensor<T> resize_bicubic(const Tensor<T>& src, int out_h, int out_w, bool clamp_unit = true) {
  if (src.rank() != 3) throw InvalidInputError("resize_bicubic expects CHW");
  if (out_h <= 0 || out_w <= 0) throw InvalidInputError("resize target must be positive");
  const int c = src.dim(0), h = src.dim(1), w = src.dim(2);
  if (out_h == h && out_w == w) return src;

  Tensor<T> mid({c, out_h, w});
  for (int ch = 0; ch < c; ++ch)
    for (int x = 0; x < w; ++x)
      detail::resize_bicubic_axis(src.ptr() + (static_cast<std::size_t>(ch) * h) * w + x, h,
                                  static_cast<std::size_t>(w),
                                  mid.ptr() + (static_cast<std::size_t>(ch) * out_h) * w + x, out_h,
                                  static_cast<std::size_t>(w));
  Tensor<T> out({c, out_h, out_w});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < out_h; ++y)
      detail::resize_bicubic_axis(mid.ptr() + (static_cast<std::size_t>(ch) * out_h + y) * w, w, 1,
                                  out.ptr() + (static_cast<std::size_t>(ch) * out_h + y) * out_w,
                                  out_w, 1);
  if (clamp_unit)
    for (auto& v : out.data) v = std::clamp(v, T(-1), T(1));
  return out;
}

/// Nearest-neighbor resize; preserves exact label colors.
template <typename T>
Tensor<T> resize_nearest(const Tensor<T>& src, int out_h, int out_w) {
  if (src.rank() != 3) throw InvalidInputError("resize_nearest expects CHW");
  if (out_h <= 0 || out_w <= 0) throw InvalidInputError("resize target must be positive");
  const int c = src.dim(0), h = src.dim(1), w = src.dim(2);
  if (out_h == h && out_w == w) return src;
  Tensor<T> out({c, out_h, out_w});
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const int yy = std::min(h - 1, static_cast<int>((y + 0.5) * sy));
    for (int x = 0; x < out_w; ++x) {
      const int xx = std::min(w - 1, static_cast<int>((x + 0.5) * sx));
      for (int ch = 0; ch < c; ++ch) out.at(ch, y, x) = src.at(ch, yy, xx);
    }
  }
  return out;
}

}  // namespace i2imix
