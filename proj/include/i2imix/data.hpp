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
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "i2imix/colormap.hpp"
#include "i2imix/errors.hpp"
#include "i2imix/image.hpp"
#include "i2imix/rng.hpp"
#include "i2imix/tensor.hpp"

namespace i2imix {

// Dataset manifests, the balanced epoch scheduler, augmentation, the fake
// image history pool and the synthetic shapes dataset.

struct PairedEntry {
  std::string id;
  std::string path_x;
  std::string path_y;
};

struct UnpairedEntry {
  std::string id;
  std::string path;
};

/// Declarative listing of paired and unpaired samples. Paths are relative to
/// the manifest file's directory.
struct DatasetManifest {
  std::filesystem::path base_dir;
  std::string colormap_path;  // optional, relative to base_dir
  std::vector<PairedEntry> paired;
  std::vector<UnpairedEntry> unpaired_x;
  std::vector<UnpairedEntry> unpaired_y;

  std::string resolve(const std::string& rel) const { return (base_dir / rel).string(); }

  bool empty() const { return paired.empty() && unpaired_x.empty() && unpaired_y.empty(); }

  void validate_ids() const {
    std::set<std::string> ids;
    auto insert = [&ids](const std::string& id) {
      if (id.empty()) throw InvalidInputError("manifest: empty sample id");
      if (!ids.insert(id).second) throw InvalidInputError("manifest: duplicate sample id " + id);
    };
    for (const auto& p : paired) insert(p.id);
    for (const auto& u : unpaired_x) insert(u.id);
    for (const auto& u : unpaired_y) insert(u.id);
  }

  void validate_files() const {
    auto check = [this](const std::string& rel, const std::string& id) {
      if (!std::filesystem::exists(base_dir / rel))
        throw IoError("manifest sample " + id + ": missing file " + (base_dir / rel).string());
    };
    for (const auto& p : paired) {
      check(p.path_x, p.id);
      check(p.path_y, p.id);
    }
    for (const auto& u : unpaired_x) check(u.path, u.id);
    for (const auto& u : unpaired_y) check(u.path, u.id);
    if (!colormap_path.empty()) check(colormap_path, "<colormap>");
  }

  const PairedEntry& paired_by_id(const std::string& id) const {
    for (const auto& p : paired)
      if (p.id == id) return p;
    throw InvalidInputError("manifest has no paired sample with id " + id);
  }

  static DatasetManifest load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw IoError("manifest parse error in " + path + ": " + e.what());
    }
    DatasetManifest m;
    m.base_dir = std::filesystem::absolute(std::filesystem::path(path)).parent_path();
    m.colormap_path = j.value("colormap", "");
    for (const auto& e : j.value("paired", nlohmann::json::array()))
      m.paired.push_back({e.at("id").get<std::string>(), e.at("x").get<std::string>(),
                          e.at("y").get<std::string>()});
    for (const auto& e : j.value("unpaired_x", nlohmann::json::array()))
      m.unpaired_x.push_back({e.at("id").get<std::string>(), e.at("path").get<std::string>()});
    for (const auto& e : j.value("unpaired_y", nlohmann::json::array()))
      m.unpaired_y.push_back({e.at("id").get<std::string>(), e.at("path").get<std::string>()});
    m.validate_ids();
    return m;
  }

  void save(const std::string& path) const {
    nlohmann::json j;
    if (!colormap_path.empty()) j["colormap"] = colormap_path;
    j["paired"] = nlohmann::json::array();
    for (const auto& p : paired)
      j["paired"].push_back({{"id", p.id}, {"x", p.path_x}, {"y", p.path_y}});
    j["unpaired_x"] = nlohmann::json::array();
    for (const auto& u : unpaired_x)
      j["unpaired_x"].push_back({{"id", u.id}, {"path", u.path}});
    j["unpaired_y"] = nlohmann::json::array();
    for (const auto& u : unpaired_y)
      j["unpaired_y"].push_back({{"id", u.id}, {"path", u.path}});
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
  }
};

// ---------------------------------------------------------------------------
// Epoch scheduling

struct BatchDesc {
  bool paired = false;
  std::string pair_id;        // set when paired
  std::string x_id, y_id;     // set when unpaired
};

struct EpochSchedule {
  std::vector<BatchDesc> entries;
  std::uint64_t seed = 0;
};

/// Balanced mode replicates each paired id floor(U/P) or ceil(U/P) times so
/// paired occurrences total exactly U (the first U mod P ids in manifest
/// order take the extra copy), then shuffles paired and unpaired entries
/// jointly. Unbalanced mode lists each paired sample once. Unpaired X/Y
/// streams are shuffled independently; if their lengths differ the shorter
/// one cycles.
inline EpochSchedule build_epoch_schedule(const DatasetManifest& manifest, std::uint64_t seed,
                                          bool balanced) {
  const std::size_t p = manifest.paired.size();
  const std::size_t ux = manifest.unpaired_x.size();
  const std::size_t uy = manifest.unpaired_y.size();
  if (p == 0 && (ux == 0 || uy == 0))
    throw InvalidInputError("cannot build schedule from an empty dataset");

  EpochSchedule schedule;
  schedule.seed = seed;
  Rng rng(seed);

  std::size_t u = 0;
  if (ux > 0 && uy > 0) {
    u = std::max(ux, uy);
    std::vector<std::size_t> xi(ux), yi(uy);
    for (std::size_t i = 0; i < ux; ++i) xi[i] = i;
    for (std::size_t i = 0; i < uy; ++i) yi[i] = i;
    rng.shuffle(xi);
    rng.shuffle(yi);
    for (std::size_t i = 0; i < u; ++i) {
      BatchDesc b;
      b.paired = false;
      b.x_id = manifest.unpaired_x[xi[i % ux]].id;
      b.y_id = manifest.unpaired_y[yi[i % uy]].id;
      schedule.entries.push_back(std::move(b));
    }
  }

  if (p > 0) {
    // With no unpaired data the schedule degenerates to supervised training:
    // each pair once per epoch.
    const std::size_t total_paired = (u > 0 && balanced) ? u : p;
    for (std::size_t i = 0; i < p; ++i) {
      std::size_t copies = 1;
      if (u > 0 && balanced) copies = total_paired / p + (i < total_paired % p ? 1 : 0);
      for (std::size_t c = 0; c < copies; ++c) {
        BatchDesc b;
        b.paired = true;
        b.pair_id = manifest.paired[i].id;
        schedule.entries.push_back(std::move(b));
      }
    }
  }

  rng.shuffle(schedule.entries);
  return schedule;
}

// ---------------------------------------------------------------------------
// Augmentation

struct AugmentConfig {
  int load_size = 286;
  int crop_size = 256;

  void validate() const {
    if (crop_size < 1 || load_size < 1) throw ConfigError("augment sizes must be positive");
    if (crop_size > load_size)
      throw ConfigError("crop_size " + std::to_string(crop_size) + " exceeds load_size " +
                        std::to_string(load_size));
  }
};

/// One sampled geometric transform. Paired samples share the same params so
/// both domain images stay pixel-aligned.
struct AugmentParams {
  int crop_y = 0;
  int crop_x = 0;
  bool flip = false;

  static AugmentParams sample(const AugmentConfig& cfg, Rng& rng) {
    cfg.validate();
    AugmentParams p;
    const int slack = cfg.load_size - cfg.crop_size;
    p.crop_y = slack > 0 ? rng.uniform_int(0, slack) : 0;
    p.crop_x = slack > 0 ? rng.uniform_int(0, slack) : 0;
    p.flip = rng.bernoulli(0.5);
    return p;
  }
};

/// Resize to load_size (bicubic for photos, nearest for label images so
/// exact class colors survive), crop, horizontal flip.
template <typename T>
Tensor<T> apply_augment(const Tensor<T>& img, const AugmentConfig& cfg, const AugmentParams& p,
                        Domain domain) {
  cfg.validate();
  if (img.rank() != 3) throw InvalidInputError("apply_augment expects CHW");
  Tensor<T> resized = domain == Domain::Y ? resize_nearest(img, cfg.load_size, cfg.load_size)
                                          : resize_bicubic(img, cfg.load_size, cfg.load_size);
  Tensor<T> out({img.dim(0), cfg.crop_size, cfg.crop_size});
  for (int c = 0; c < img.dim(0); ++c)
    for (int y = 0; y < cfg.crop_size; ++y)
      for (int x = 0; x < cfg.crop_size; ++x) {
        const int sx = p.flip ? cfg.crop_size - 1 - x : x;
        out.at(c, y, x) = resized.at(c, p.crop_y + y, p.crop_x + sx);
      }
  return out;
}

template <typename T>
Tensor<T> augment(const Tensor<T>& img, const AugmentConfig& cfg, Rng& rng,
                  Domain domain = Domain::X) {
  return apply_augment(img, cfg, AugmentParams::sample(cfg, rng), domain);
}

// ---------------------------------------------------------------------------
// Fake-image history pool

/// Bounded buffer of previously generated fakes used to update the
/// discriminators. While filling it returns the fresh image; once full it
/// returns the fresh image with probability 0.5, otherwise swaps it against
/// a random stored one.
template <typename T>
class ImagePool {
 public:
  explicit ImagePool(std::size_t capacity = 50) : capacity_(capacity) {}

  Tensor<T> query(const Tensor<T>& fresh, Rng& rng) {
    if (capacity_ == 0) return fresh;
    if (stored_.size() < capacity_) {
      stored_.push_back(fresh);
      return fresh;
    }
    if (rng.bernoulli(0.5)) return fresh;
    const std::size_t idx = static_cast<std::size_t>(rng.uniform_index(stored_.size()));
    Tensor<T> out = std::move(stored_[idx]);
    stored_[idx] = fresh;
    return out;
  }

  std::size_t size() const { return stored_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::vector<Tensor<T>>& contents() const { return stored_; }
  void restore(std::vector<Tensor<T>> contents) {
    if (contents.size() > capacity_) throw InvalidInputError("pool restore exceeds capacity");
    stored_ = std::move(contents);
  }

 private:
  std::size_t capacity_;
  std::vector<Tensor<T>> stored_;
};

// ---------------------------------------------------------------------------
// Synthetic shapes dataset

namespace toy {

constexpr int kMinImageSize = 16;
constexpr int kNumShapeTypes = 4;  // circle, square, triangle, bar -> classes 1..4

struct Shape {
  int type = 0;  // 0 circle, 1 square, 2 triangle, 3 bar
  double cx = 0, cy = 0, r = 0;
};

struct Scene {
  double illum = 1.0;
  Shape primary;
  Shape secondary;
};

inline Scene sample_scene(Rng& rng, int size) {
  Scene s;
  s.illum = rng.uniform(0.85, 1.15);
  s.primary.type = rng.uniform_int(0, kNumShapeTypes - 1);
  s.primary.cx = rng.uniform(0.30, 0.70) * size;
  s.primary.cy = rng.uniform(0.30, 0.70) * size;
  s.primary.r = rng.uniform(0.22, 0.38) * size;
  s.secondary.type = rng.uniform_int(0, kNumShapeTypes - 1);
  s.secondary.cx = rng.uniform(0.15, 0.85) * size;
  s.secondary.cy = rng.uniform(0.15, 0.85) * size;
  s.secondary.r = rng.uniform(0.08, 0.14) * size;
  return s;
}

inline bool shape_contains(const Shape& s, double x, double y, int size) {
  switch (s.type) {
    case 0: {  // circle
      const double dx = x - s.cx, dy = y - s.cy;
      return dx * dx + dy * dy <= s.r * s.r;
    }
    case 1:  // square
      return std::fabs(x - s.cx) <= s.r * 0.9 && std::fabs(y - s.cy) <= s.r * 0.9;
    case 2: {  // upward triangle
      const double x0 = s.cx, y0 = s.cy - s.r;
      const double x1 = s.cx - s.r, y1 = s.cy + 0.8 * s.r;
      const double x2 = s.cx + s.r, y2 = s.cy + 0.8 * s.r;
      auto edge = [x, y](double ax, double ay, double bx, double by) {
        return (bx - ax) * (y - ay) - (by - ay) * (x - ax);
      };
      const double e0 = edge(x0, y0, x1, y1), e1 = edge(x1, y1, x2, y2), e2 = edge(x2, y2, x0, y0);
      return (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
    }
    case 3:  // full-width horizontal bar
      return std::fabs(y - s.cy) <= s.r * 0.8 && x >= 0 && x < size;
    default:
      return false;
  }
}

// Photo-domain base colors; deliberately different from the label colors so
// the translation is a real recoloring task.
inline std::array<double, 3> photo_color(int type) {
  switch (type) {
    case 0: return {205, 95, 55};
    case 1: return {70, 160, 85};
    case 2: return {80, 100, 200};
    default: return {205, 185, 75};
  }
}

/// Flat color-coded label render; contains only exact colormap colors.
inline Image8 render_labels(const Scene& s, int size, const ColorMap& cm) {
  Image8 img(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      int cls = 0;
      if (shape_contains(s.primary, x + 0.5, y + 0.5, size)) cls = s.primary.type + 1;
      if (shape_contains(s.secondary, x + 0.5, y + 0.5, size)) cls = s.secondary.type + 1;
      const auto& c = cm.color(cls);
      img.set_pixel(y, x, c[0], c[1], c[2]);
    }
  return img;
}

/// Shaded, noisy photo-domain render of the same scene.
inline Image8 render_photo(const Scene& s, int size, Rng& rng) {
  Image8 img(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double fx = x + 0.5, fy = y + 0.5;
      double r, g, b;
      const double t = static_cast<double>(y) / std::max(1, size - 1);
      r = 120.0 + (95.0 - 120.0) * t;
      g = 140.0 + (85.0 - 140.0) * t;
      b = 165.0 + (70.0 - 165.0) * t;
      const Shape* hit = nullptr;
      if (shape_contains(s.primary, fx, fy, size)) hit = &s.primary;
      if (shape_contains(s.secondary, fx, fy, size)) hit = &s.secondary;
      if (hit) {
        const auto base = photo_color(hit->type);
        const double shade =
            0.78 + 0.45 * std::clamp(((fx - hit->cx) + (fy - hit->cy)) / (4.0 * hit->r) + 0.5,
                                     0.0, 1.0) * 0.5;
        r = base[0] * shade;
        g = base[1] * shade;
        b = base[2] * shade;
      }
      const double noise = rng.normal(0.0, 6.0);
      auto q = [&](double v) {
        return static_cast<std::uint8_t>(std::clamp(v * s.illum + noise, 0.0, 255.0));
      };
      img.set_pixel(y, x, q(r), q(g), q(b));
    }
  return img;
}

}  // namespace toy

/// Procedurally generates the desk-scale shapes dataset: domain X holds
/// shaded noisy renders, domain Y flat color-coded label images. Writes the
/// PNGs, the colormap and a manifest under out_dir; byte-identical output
/// for identical arguments.
inline DatasetManifest synth_toy_dataset(int n_paired, int n_unpaired, int image_size,
                                         std::uint64_t seed, const std::string& out_dir) {
  if (image_size < toy::kMinImageSize)
    throw ConfigError("image_size must be >= " + std::to_string(toy::kMinImageSize));
  if (n_paired < 0 || n_unpaired < 0) throw ConfigError("sample counts must be nonnegative");
  if (n_paired + n_unpaired == 0) throw ConfigError("dataset must contain at least one sample");

  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "x");
  fs::create_directories(fs::path(out_dir) / "y");

  const ColorMap cm = toy_colormap();
  cm.save((fs::path(out_dir) / "colormap.txt").string());

  DatasetManifest manifest;
  manifest.base_dir = fs::absolute(out_dir);
  manifest.colormap_path = "colormap.txt";

  char name[64];
  for (int i = 0; i < n_paired; ++i) {
    // Independent stream per sample: the unpaired sets are identical across
    // datasets that differ only in n_paired (and vice versa).
    Rng rng(mix_seed(seed, fnv1a("toy_pair"), static_cast<std::uint64_t>(i)));
    const toy::Scene scene = toy::sample_scene(rng, image_size);
    std::snprintf(name, sizeof(name), "pair_%04d", i);
    PairedEntry e;
    e.id = name;
    e.path_x = std::string("x/") + name + ".png";
    e.path_y = std::string("y/") + name + ".png";
    save_png8(manifest.resolve(e.path_x), toy::render_photo(scene, image_size, rng));
    save_png8(manifest.resolve(e.path_y), toy::render_labels(scene, image_size, cm));
    manifest.paired.push_back(std::move(e));
  }
  for (int i = 0; i < n_unpaired; ++i) {
    Rng rng(mix_seed(seed, fnv1a("toy_ux"), static_cast<std::uint64_t>(i)));
    const toy::Scene scene = toy::sample_scene(rng, image_size);
    std::snprintf(name, sizeof(name), "ux_%04d", i);
    UnpairedEntry e;
    e.id = name;
    e.path = std::string("x/") + name + ".png";
    save_png8(manifest.resolve(e.path), toy::render_photo(scene, image_size, rng));
    manifest.unpaired_x.push_back(std::move(e));
  }
  for (int i = 0; i < n_unpaired; ++i) {
    Rng rng(mix_seed(seed, fnv1a("toy_uy"), static_cast<std::uint64_t>(i)));
    const toy::Scene scene = toy::sample_scene(rng, image_size);
    std::snprintf(name, sizeof(name), "uy_%04d", i);
    UnpairedEntry e;
    e.id = name;
    e.path = std::string("y/") + name + ".png";
    save_png8(manifest.resolve(e.path), toy::render_labels(scene, image_size, cm));
    manifest.unpaired_y.push_back(std::move(e));
  }

  manifest.save((fs::path(out_dir) / "manifest.json").string());
  return manifest;
}

}  // namespace i2imix
