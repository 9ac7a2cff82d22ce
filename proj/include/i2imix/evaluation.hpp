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

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "i2imix/colormap.hpp"
#include "i2imix/data.hpp"
#include "i2imix/errors.hpp"
#include "i2imix/image.hpp"
#include "i2imix/tensor.hpp"

namespace i2imix {

// Scoring protocols for translated outputs: segmentation metrics via
// nearest-color label decoding, and the per-pixel color-threshold accuracy
// used for map-style targets.

/// HxW class indices. -1 marks ignore/void pixels (ground truth only).
using ClassMap = Tensor<std::int32_t>;

constexpr std::int32_t kIgnoreClass = -1;

/// Segmentation scores plus the confusion matrix they derive from
/// (confusion[gt * n + pred], counts).
struct SegMetrics {
  double pixel_accuracy = 0.0;
  double mean_class_accuracy = 0.0;
  double mean_iou = 0.0;
  int n_classes = 0;
  std::vector<std::int64_t> confusion;
  std::vector<double> per_class_accuracy;  // NaN for classes absent from gt
  std::vector<double> per_class_iou;
};

/// Per pixel, the class whose colormap color is nearest in RGB Euclidean
/// distance (on the 0-255 scale); ties go to the lowest class id.
template <typename T>
ClassMap decode_labels_nearest_color(const Tensor<T>& image, const ColorMap& colormap) {
  colormap.validate();
  if (image.rank() != 3 || image.dim(0) != 3)
    throw InvalidInputError("decode_labels_nearest_color expects a 3xHxW image");
  const int h = image.dim(1), w = image.dim(2);
  ClassMap out({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double r = (static_cast<double>(image.at(0, y, x)) + 1.0) * 127.5;
      const double g = (static_cast<double>(image.at(1, y, x)) + 1.0) * 127.5;
      const double b = (static_cast<double>(image.at(2, y, x)) + 1.0) * 127.5;
      int best = 0;
      double best_d = std::numeric_limits<double>::max();
      for (const auto& cls : colormap.classes) {
        const double dr = r - cls.rgb[0], dg = g - cls.rgb[1], db = b - cls.rgb[2];
        const double d = dr * dr + dg * dg + db * db;
        if (d < best_d) {
          best_d = d;
          best = cls.class_id;
        }
      }
      out.data[static_cast<std::size_t>(y) * w + x] = best;
    }
  return out;
}

/// Render a class map back to colors; inverse of nearest-color decoding for
/// exact colormap images.
inline Tensor<float> encode_labels(const ClassMap& classes, const ColorMap& colormap) {
  const int h = classes.dim(0), w = classes.dim(1);
  Tensor<float> img({3, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto& c = colormap.color(classes.data[static_cast<std::size_t>(y) * w + x]);
      for (int ch = 0; ch < 3; ++ch)
        img.at(ch, y, x) = static_cast<float>(c[ch] / 127.5 - 1.0);
    }
  return img;
}

/// Predictions are resized to the ground-truth resolution (bicubic, as a
/// color image) before decoding.
template <typename T>
Tensor<T> resize_for_eval(const Tensor<T>& pred, int target_h, int target_w) {
  return resize_bicubic(pred, target_h, target_w);
}

/// Pixel accuracy, mean class accuracy and mean IoU:
///   pixel acc = sum_i n_ii / sum_i t_i
///   mean acc  = (1/n_cl) sum_i n_ii / t_i
///   mean IoU  = (1/n_cl) sum_i n_ii / (t_i + sum_j n_ji - n_ii)
/// averaged over classes present in the ground truth; ignore-labeled ground
/// truth pixels are excluded from all counts.
inline SegMetrics segmentation_metrics(const ClassMap& pred, const ClassMap& gt, int n_classes) {
  require_same_shape(pred, gt, "segmentation_metrics");
  if (n_classes < 1) throw InvalidInputError("segmentation_metrics: n_classes must be >= 1");

  SegMetrics m;
  m.n_classes = n_classes;
  m.confusion.assign(static_cast<std::size_t>(n_classes) * n_classes, 0);
  for (std::size_t i = 0; i < gt.numel(); ++i) {
    const std::int32_t g = gt.data[i];
    if (g == kIgnoreClass) continue;
    const std::int32_t p = pred.data[i];
    if (g < 0 || g >= n_classes || p < 0 || p >= n_classes)
      throw InvalidInputError("segmentation_metrics: class id out of range");
    ++m.confusion[static_cast<std::size_t>(g) * n_classes + p];
  }

  std::int64_t total = 0, correct = 0;
  m.per_class_accuracy.assign(static_cast<std::size_t>(n_classes),
                              std::numeric_limits<double>::quiet_NaN());
  m.per_class_iou.assign(static_cast<std::size_t>(n_classes),
                         std::numeric_limits<double>::quiet_NaN());
  double acc_sum = 0.0, iou_sum = 0.0;
  int present = 0;
  for (int c = 0; c < n_classes; ++c) {
    std::int64_t t_c = 0, pred_c = 0;
    for (int j = 0; j < n_classes; ++j) {
      t_c += m.confusion[static_cast<std::size_t>(c) * n_classes + j];
      pred_c += m.confusion[static_cast<std::size_t>(j) * n_classes + c];
    }
    const std::int64_t n_cc = m.confusion[static_cast<std::size_t>(c) * n_classes + c];
    total += t_c;
    correct += n_cc;
    if (t_c == 0) continue;  // absent from ground truth: excluded from means
    ++present;
    const double acc = static_cast<double>(n_cc) / static_cast<double>(t_c);
    const double iou = static_cast<double>(n_cc) / static_cast<double>(t_c + pred_c - n_cc);
    m.per_class_accuracy[static_cast<std::size_t>(c)] = acc;
    m.per_class_iou[static_cast<std::size_t>(c)] = iou;
    acc_sum += acc;
    iou_sum += iou;
  }
  if (total == 0) throw InvalidInputError("segmentation_metrics: no valid ground-truth pixels");
  m.pixel_accuracy = static_cast<double>(correct) / static_cast<double>(total);
  m.mean_class_accuracy = acc_sum / present;
  m.mean_iou = iou_sum / present;
  return m;
}

/// Fraction of pixels whose maximum per-channel absolute difference on the
/// 0-255 scale is strictly below the threshold (default 20).
template <typename T>
double maps_pixel_accuracy(const Tensor<T>& pred, const Tensor<T>& gt, double threshold = 20.0) {
  require_same_shape(pred, gt, "maps_pixel_accuracy");
  if (pred.rank() != 3 || pred.dim(0) != 3)
    throw InvalidInputError("maps_pixel_accuracy expects 3xHxW images");
  const int h = pred.dim(1), w = pred.dim(2);
  std::int64_t good = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double max_diff = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double a = (static_cast<double>(pred.at(c, y, x)) + 1.0) * 127.5;
        const double b = (static_cast<double>(gt.at(c, y, x)) + 1.0) * 127.5;
        max_diff = std::max(max_diff, std::fabs(a - b));
      }
      if (max_diff < threshold) ++good;
    }
  return static_cast<double>(good) / (static_cast<double>(h) * w);
}

// ---------------------------------------------------------------------------
// Dataset-level evaluation

enum class EvalProtocol { Segmentation, Maps };

inline EvalProtocol parse_protocol(const std::string& s) {
  if (s == "segmentation") return EvalProtocol::Segmentation;
  if (s == "maps") return EvalProtocol::Maps;
  throw ConfigError("unknown evaluation protocol: " + s);
}

struct EvalRow {
  std::string id;
  double pixel_accuracy = 0.0;
  double mean_class_accuracy = 0.0;  // segmentation only
  double mean_iou = 0.0;             // segmentation only
};

struct EvalReport {
  std::string protocol;
  int n_images = 0;
  std::vector<EvalRow> rows;
  EvalRow aggregate;  // arithmetic mean of the per-image rows
  nlohmann::json extra;

  void save(const std::string& path) const {
    nlohmann::json j;
    j["protocol"] = protocol;
    j["n_images"] = n_images;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rows) {
      nlohmann::json row = {{"id", r.id}, {"pixel_accuracy", r.pixel_accuracy}};
      if (protocol == "segmentation") {
        row["mean_class_accuracy"] = r.mean_class_accuracy;
        row["mean_iou"] = r.mean_iou;
      }
      j["rows"].push_back(std::move(row));
    }
    j["aggregate"] = {{"pixel_accuracy", aggregate.pixel_accuracy}};
    if (protocol == "segmentation") {
      j["aggregate"]["mean_class_accuracy"] = aggregate.mean_class_accuracy;
      j["aggregate"]["mean_iou"] = aggregate.mean_iou;
    }
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write report: " + path);
    out << j.dump(2) << "\n";
  }
};

/// One translated prediction per manifest paired entry, scored by the
/// selected protocol against the Y-side ground truth. `translate_fn` maps an
/// X-domain image to a Y-domain prediction (identity for oracle checks).
inline EvalReport evaluate(
    const std::function<Tensor<float>(const Tensor<float>&)>& translate_fn,
    const DatasetManifest& manifest, EvalProtocol protocol, const ColorMap& colormap,
    double maps_threshold = 20.0) {
  if (manifest.paired.empty())
    throw InvalidInputError("evaluation manifest lists no paired samples");
  if (protocol == EvalProtocol::Segmentation) colormap.validate();

  EvalReport report;
  report.protocol = protocol == EvalProtocol::Segmentation ? "segmentation" : "maps";
  double sum_pa = 0.0, sum_ma = 0.0, sum_iou = 0.0;
  for (const auto& entry : manifest.paired) {
    const Tensor<float> x = load_image(manifest.resolve(entry.path_x));
    const Tensor<float> gt = load_image(manifest.resolve(entry.path_y));
    Tensor<float> pred = translate_fn(x);
    if (pred.dim(1) != gt.dim(1) || pred.dim(2) != gt.dim(2))
      pred = resize_for_eval(pred, gt.dim(1), gt.dim(2));

    EvalRow row;
    row.id = entry.id;
    if (protocol == EvalProtocol::Segmentation) {
      const ClassMap pc = decode_labels_nearest_color(pred, colormap);
      const ClassMap gc = decode_labels_nearest_color(gt, colormap);
      const SegMetrics m = segmentation_metrics(pc, gc, colormap.n_classes());
      row.pixel_accuracy = m.pixel_accuracy;
      row.mean_class_accuracy = m.mean_class_accuracy;
      row.mean_iou = m.mean_iou;
    } else {
      row.pixel_accuracy = maps_pixel_accuracy(pred, gt, maps_threshold);
    }
    sum_pa += row.pixel_accuracy;
    sum_ma += row.mean_class_accuracy;
    sum_iou += row.mean_iou;
    report.rows.push_back(std::move(row));
  }
  report.n_images = static_cast<int>(report.rows.size());
  report.aggregate.id = "aggregate";
  report.aggregate.pixel_accuracy = sum_pa / report.n_images;
  report.aggregate.mean_class_accuracy = sum_ma / report.n_images;
  report.aggregate.mean_iou = sum_iou / report.n_images;
  return report;
}

}  // namespace i2imix
