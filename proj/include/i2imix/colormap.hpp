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

#include <array>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "i2imix/errors.hpp"

namespace i2imix {

/// Class id -> RGB color table used for encoding label images and for
/// nearest-color decoding. File format: one `class_id R G B name` row per
/// class, `#` comments allowed.
struct ColorMap {
  struct Entry {
    int class_id = 0;
    std::array<std::uint8_t, 3> rgb{0, 0, 0};
    std::string name;
  };

  std::vector<Entry> classes;

  int n_classes() const { return static_cast<int>(classes.size()); }

  void validate() const {
    if (classes.empty()) throw ConfigError("colormap has no classes");
    std::set<std::array<std::uint8_t, 3>> colors;
    for (int i = 0; i < n_classes(); ++i) {
      if (classes[static_cast<std::size_t>(i)].class_id != i)
        throw ConfigError("colormap class ids must be contiguous from 0");
      if (!colors.insert(classes[static_cast<std::size_t>(i)].rgb).second)
        throw ConfigError("colormap colors must be distinct");
    }
  }

  const std::array<std::uint8_t, 3>& color(int class_id) const {
    return classes.at(static_cast<std::size_t>(class_id)).rgb;
  }

  static ColorMap load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open colormap: " + path);
    ColorMap cm;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream row(line);
      Entry e;
      int r, g, b;
      if (!(row >> e.class_id >> r >> g >> b)) throw IoError("bad colormap row: " + line);
      row >> e.name;
      e.rgb = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
               static_cast<std::uint8_t>(b)};
      cm.classes.push_back(std::move(e));
    }
    cm.validate();
    return cm;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write colormap: " + path);
    for (const auto& e : classes)
      out << e.class_id << " " << int(e.rgb[0]) << " " << int(e.rgb[1]) << " " << int(e.rgb[2])
          << " " << (e.name.empty() ? "class" + std::to_string(e.class_id) : e.name) << "\n";
  }
};

/// The 19-class Cityscapes-protocol colormap (train-id ordering).
inline ColorMap cityscapes_colormap() {
  ColorMap cm;
  auto add = [&cm](int id, int r, int g, int b, const char* name) {
    cm.classes.push_back({id,
                          {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
                           static_cast<std::uint8_t>(b)},
                          name});
  };
  add(0, 128, 64, 128, "road");
  add(1, 244, 35, 232, "sidewalk");
  add(2, 70, 70, 70, "building");
  add(3, 102, 102, 156, "wall");
  add(4, 190, 153, 153, "fence");
  add(5, 153, 153, 153, "pole");
  add(6, 250, 170, 30, "traffic_light");
  add(7, 220, 220, 0, "traffic_sign");
  add(8, 107, 142, 35, "vegetation");
  add(9, 152, 251, 152, "terrain");
  add(10, 70, 130, 180, "sky");
  add(11, 220, 20, 60, "person");
  add(12, 255, 0, 0, "rider");
  add(13, 0, 0, 142, "car");
  add(14, 0, 0, 70, "truck");
  add(15, 0, 60, 100, "bus");
  add(16, 0, 80, 100, "train");
  add(17, 0, 0, 230, "motorcycle");
  add(18, 119, 11, 32, "bicycle");
  return cm;
}

/// Compact colormap for the synthetic shapes dataset.
inline ColorMap toy_colormap() {
  ColorMap cm;
  auto add = [&cm](int id, int r, int g, int b, const char* name) {
    cm.classes.push_back({id,
                          {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
                           static_cast<std::uint8_t>(b)},
                          name});
  };
  add(0, 0, 0, 0, "background");
  add(1, 220, 20, 20, "circle");
  add(2, 20, 220, 20, "square");
  add(3, 20, 20, 220, "triangle");
  add(4, 220, 220, 20, "bar");
  return cm;
}

}  // namespace i2imix
