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

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "i2imix/image.hpp"

namespace i2imix {

// Tiny dependency-free chart renderer for the CLI's --plot output: a metric
// vs paired-count line chart with a 5x7 bitmap glyph set for labels.

namespace plotdetail {

// 5x7 glyphs for digits, '.', '-' and a few letters.
inline const std::uint8_t* glyph(char c) {
  static const std::uint8_t digits[13][7] = {
      {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E},  // 0
      {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},  // 1
      {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F},  // 2
      {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},  // 3
      {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02},  // 4
      {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},  // 5
      {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E},  // 6
      {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},  // 7
      {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E},  // 8
      {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},  // 9
      {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C},  // .
      {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00},  // -
      {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00},  // space
  };
  if (c >= '0' && c <= '9') return digits[c - '0'];
  if (c == '.') return digits[10];
  if (c == '-') return digits[11];
  return digits[12];
}

}  // namespace plotdetail

class Canvas {
 public:
  Canvas(int w, int h) : img_(w, h) {
    for (auto& v : img_.rgb) v = 250;
  }

  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (x < 0 || y < 0 || x >= img_.width || y >= img_.height) return;
    img_.set_pixel(y, x, r, g, b);
  }

  void line(int x0, int y0, int x1, int y1, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
      set(x0, y0, r, g, b);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  void dot(int x, int y, int radius, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    for (int yy = -radius; yy <= radius; ++yy)
      for (int xx = -radius; xx <= radius; ++xx)
        if (xx * xx + yy * yy <= radius * radius) set(x + xx, y + yy, r, g, b);
  }

  void text(int x, int y, const std::string& s, std::uint8_t r = 40, std::uint8_t g = 40,
            std::uint8_t b = 40) {
    for (char c : s) {
      const std::uint8_t* rows = plotdetail::glyph(c);
      for (int gy = 0; gy < 7; ++gy)
        for (int gx = 0; gx < 5; ++gx)
          if (rows[gy] & (1 << (4 - gx))) set(x + gx, y + gy, r, g, b);
      x += 6;
    }
  }

  void save(const std::string& path) const { save_png8(path, img_); }

 private:
  Image8 img_;
};

/// Metric value vs paired-sample count, one marker per run, sorted by count.
inline void plot_metric_vs_paired(const std::vector<std::pair<int, double>>& points,
                                  const std::string& metric_name, const std::string& path) {
  std::vector<std::pair<int, double>> pts = points;
  std::sort(pts.begin(), pts.end());
  const int w = 480, h = 320, ml = 56, mr = 16, mt = 16, mb = 40;
  Canvas canvas(w, h);

  canvas.line(ml, h - mb, w - mr, h - mb, 40, 40, 40);
  canvas.line(ml, mt, ml, h - mb, 40, 40, 40);

  int max_count = 1;
  for (const auto& [count, value] : pts) max_count = std::max(max_count, count);
  auto px = [&](int count) {
    return ml + static_cast<int>((w - ml - mr - 10) * (static_cast<double>(count) / max_count));
  };
  auto py = [&](double value) {
    value = std::clamp(value, 0.0, 1.0);
    return h - mb - static_cast<int>((h - mt - mb) * value);
  };

  for (int tick = 0; tick <= 4; ++tick) {
    const double v = tick / 4.0;
    char label[8];
    std::snprintf(label, sizeof(label), "%.2f", v);
    canvas.line(ml - 3, py(v), ml, py(v), 40, 40, 40);
    canvas.text(ml - 34, py(v) - 3, label);
  }
  for (const auto& [count, value] : pts) {
    char label[8];
    std::snprintf(label, sizeof(label), "%d", count);
    canvas.line(px(count), h - mb, px(count), h - mb + 3, 40, 40, 40);
    canvas.text(px(count) - 3, h - mb + 6, label);
  }

  for (std::size_t i = 1; i < pts.size(); ++i)
    canvas.line(px(pts[i - 1].first), py(pts[i - 1].second), px(pts[i].first),
                py(pts[i].second), 30, 90, 200);
  for (const auto& [count, value] : pts) {
    canvas.dot(px(count), py(value), 3, 200, 60, 30);
    char label[16];
    std::snprintf(label, sizeof(label), "%.3f", value);
    canvas.text(px(count) + 5, py(value) - 8, label);
  }
  (void)metric_name;
  canvas.save(path);
}

}  // namespace i2imix
