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
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "i2imix/checkpoint.hpp"
#include "i2imix/data.hpp"
#include "i2imix/errors.hpp"
#include "i2imix/image.hpp"
#include "i2imix/networks.hpp"
#include "i2imix/rng.hpp"

namespace i2imix {

// Budget-constrained selection of the samples worth annotating: embed every
// candidate with a fixed backbone, k-means-cluster the embeddings with
// k = budget, and take each cluster's medoid (the member with least mean
// distance to the rest of its cluster).

/// One embedding row per sample, dataset order.
struct FeatureMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  FeatureMatrix() = default;
  FeatureMatrix(int r, int c) : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, 0.0) {}

  double* row(int i) { return values.data() + static_cast<std::size_t>(i) * cols; }
  const double* row(int i) const { return values.data() + static_cast<std::size_t>(i) * cols; }

  void validate() const {
    if (rows < 0 || cols <= 0) throw InvalidInputError("feature matrix must have cols > 0");
    if (values.size() != static_cast<std::size_t>(rows) * cols)
      throw InvalidInputError("feature matrix storage inconsistent with dims");
    for (double v : values)
      if (!std::isfinite(v)) throw InvalidInputError("feature matrix contains non-finite values");
  }
};

struct ClusterAssignment {
  std::vector<int> labels;          // per sample, in [0, k)
  FeatureMatrix centroids;          // k x cols
  std::vector<double> wss_history;  // within-cluster sum of squares per Lloyd iteration
  int iterations = 0;

  int k() const { return centroids.rows; }
};

struct SelectedSample {
  std::string id;
  int index = -1;  // position in the candidate list
  int cluster = -1;
  double mean_distance = 0.0;
};

struct SelectionResult {
  std::string strategy;  // "kmedoids" | "random"
  std::uint64_t seed = 0;
  int budget = 0;
  std::vector<SelectedSample> selected;

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    out.reserve(selected.size());
    for (const auto& s : selected) out.push_back(s.id);
    return out;
  }

  void save(const std::string& path) const {
    nlohmann::json j;
    j["strategy"] = strategy;
    j["seed"] = seed;
    j["budget"] = budget;
    j["selected"] = nlohmann::json::array();
    for (const auto& s : selected)
      j["selected"].push_back({{"id", s.id},
                               {"index", s.index},
                               {"cluster", s.cluster},
                               {"mean_distance", s.mean_distance}});
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write selection manifest: " + path);
    out << j.dump(2) << "\n";
  }

  static SelectionResult load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open selection manifest: " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw IoError("selection manifest parse error: " + std::string(e.what()));
    }
    SelectionResult r;
    r.strategy = j.at("strategy").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.budget = j.at("budget").get<int>();
    for (const auto& e : j.at("selected"))
      r.selected.push_back({e.at("id").get<std::string>(), e.value("index", -1),
                            e.at("cluster").get<int>(), e.at("mean_distance").get<double>()});
    return r;
  }
};

// ---------------------------------------------------------------------------
// Embedding backbones

/// Pluggable image embedding. Implementations must be deterministic for
/// fixed weights and inputs.
class EmbeddingBackbone {
 public:
  virtual ~EmbeddingBackbone() = default;
  virtual int dim() const = 0;
  virtual std::vector<double> embed(const Tensor<float>& image_chw) const = 0;
};

/// Test backbone: a fixed seeded linear projection W*flatten(resize(x)) + b.
/// Lets the whole suite run without any pretrained weights. Images are
/// bicubic-resized to input_size x input_size on the [-1,1] scale before
/// projection (a configuration choice, not protocol ground truth).
class RandomProjectionBackbone : public EmbeddingBackbone {
 public:
  RandomProjectionBackbone(int out_dim, int input_size, std::uint64_t seed)
      : out_dim_(out_dim), input_size_(input_size) {
    if (out_dim < 1 || input_size < 1) throw ConfigError("backbone dims must be positive");
    Rng rng(mix_seed(seed, fnv1a("random_projection")));
    const std::size_t in_dim = static_cast<std::size_t>(input_size) * input_size * 3;
    const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
    weights_.resize(static_cast<std::size_t>(out_dim) * in_dim);
    for (auto& w : weights_) w = rng.normal(0.0, scale);
    bias_.resize(static_cast<std::size_t>(out_dim));
    for (auto& b : bias_) b = rng.normal(0.0, 1.0);
  }

  int dim() const override { return out_dim_; }
  int input_size() const { return input_size_; }
  const std::vector<double>& bias() const { return bias_; }
  const std::vector<double>& weights() const { return weights_; }

  std::vector<double> embed(const Tensor<float>& image_chw) const override {
    if (image_chw.rank() != 3 || image_chw.dim(0) != 3)
      throw ConfigError("backbone expects 3xHxW images, got " + image_chw.shape_str());
    Tensor<float> x = resize_bicubic(image_chw, input_size_, input_size_);
    const std::size_t in_dim = x.numel();
    std::vector<double> out(bias_);
    for (int o = 0; o < out_dim_; ++o) {
      const double* wrow = weights_.data() + static_cast<std::size_t>(o) * in_dim;
      double acc = 0.0;
      for (std::size_t i = 0; i < in_dim; ++i) acc += wrow[i] * x.data[i];
      out[static_cast<std::size_t>(o)] += acc;
    }
    return out;
  }

 private:
  int out_dim_;
  int input_size_;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

/// Production adapter: a small convolutional classifier whose penultimate
/// activations (global-average-pooled features of the last conv stage) are
/// the embedding. Weights load from a checkpoint written by this library;
/// without one the stack is seeded random, which still yields a usable
/// (if weaker) diversity signal.
class CnnBackbone : public EmbeddingBackbone {
 public:
  CnnBackbone(int input_size, int base_width, int n_stages, std::uint64_t seed,
              const std::string& weights_path = "")
      : input_size_(input_size) {
    if (input_size < 8 || base_width < 1 || n_stages < 1)
      throw ConfigError("invalid CnnBackbone configuration");
    Rng rng(mix_seed(seed, fnv1a("cnn_backbone")));
    int prev = 3;
    for (int i = 0; i < n_stages; ++i) {
      const int width = base_width << std::min(i, 3);
      net_.emplace<Conv2d<float>>(prev, width, 3, 2, 1, rng);
      net_.emplace<InstanceNorm2d<float>>(width);
      net_.emplace<ReLU<float>>();
      prev = width;
    }
    dim_ = prev;
    if (!weights_path.empty()) {
      Checkpoint ck = Checkpoint::load(weights_path);
      NamedParams<float> params;
      net_.collect_params("backbone", params);
      for (auto& [name, param] : params) param->value = ck.get<float>(name);
    }
  }

  int dim() const override { return dim_; }

  std::vector<double> embed(const Tensor<float>& image_chw) const override {
    if (image_chw.rank() != 3 || image_chw.dim(0) != 3)
      throw ConfigError("backbone expects 3xHxW images, got " + image_chw.shape_str());
    Tensor<float> x = resize_bicubic(image_chw, input_size_, input_size_);
    Tensor<float> feat = net_.infer(x);
    std::vector<double> out(static_cast<std::size_t>(dim_), 0.0);
    const std::size_t n = static_cast<std::size_t>(feat.dim(1)) * feat.dim(2);
    for (int c = 0; c < dim_; ++c) {
      double acc = 0.0;
      const float* p = feat.ptr() + c * n;
      for (std::size_t i = 0; i < n; ++i) acc += p[i];
      out[static_cast<std::size_t>(c)] = acc / static_cast<double>(n);
    }
    return out;
  }

 private:
  int input_size_;
  int dim_ = 0;
  Sequential<float> net_;
};

// ---------------------------------------------------------------------------
// Operations

inline FeatureMatrix extract_features(const std::vector<Tensor<float>>& images,
                                      const EmbeddingBackbone& backbone) {
  if (images.empty()) throw InvalidInputError("extract_features: empty image list");
  FeatureMatrix f(static_cast<int>(images.size()), backbone.dim());
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::vector<double> row = backbone.embed(images[i]);
    std::copy(row.begin(), row.end(), f.row(static_cast<int>(i)));
  }
  f.validate();
  return f;
}

namespace detail {

inline double sq_dist(const double* a, const double* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

// Nearest centroid, ties to the lowest index.
inline int nearest_centroid(const double* p, const FeatureMatrix& centroids) {
  int best = 0;
  double best_d = sq_dist(p, centroids.row(0), centroids.cols);
  for (int c = 1; c < centroids.rows; ++c) {
    const double d = sq_dist(p, centroids.row(c), centroids.cols);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding. Deterministic given the seed;
/// empty clusters are repaired by promoting the point farthest from its
/// centroid; converges on centroid shift < tol or max_iters.
inline ClusterAssignment kmeans_cluster(const FeatureMatrix& features, int k, std::uint64_t seed,
                                        double tol = 1e-6, int max_iters = 300) {
  features.validate();
  const int n = features.rows, d = features.cols;
  if (k <= 0) throw InvalidInputError("kmeans: budget k must be positive");
  if (k > n) throw InvalidInputError("kmeans: budget k exceeds number of samples");

  ClusterAssignment out;
  out.centroids = FeatureMatrix(k, d);
  out.labels.assign(static_cast<std::size_t>(n), 0);
  Rng rng(mix_seed(seed, fnv1a("kmeans++")));

  // k-means++ seeding.
  std::vector<int> chosen;
  std::vector<double> min_d(static_cast<std::size_t>(n), std::numeric_limits<double>::max());
  chosen.push_back(static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n))));
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const double dd =
          detail::sq_dist(features.row(i), features.row(chosen.back()), d);
      min_d[static_cast<std::size_t>(i)] = std::min(min_d[static_cast<std::size_t>(i)], dd);
      total += min_d[static_cast<std::size_t>(i)];
    }
    int next = -1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += min_d[static_cast<std::size_t>(i)];
        if (acc >= target) {
          next = i;
          break;
        }
      }
      if (next < 0) next = n - 1;
    }
    if (next < 0 || min_d[static_cast<std::size_t>(next)] == 0.0) {
      // All remaining mass sits on already-chosen (duplicate) points; take
      // the first not-yet-chosen index for determinism.
      for (int i = 0; i < n && next < 0; ++i)
        if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) next = i;
    }
    chosen.push_back(next);
  }
  for (int c = 0; c < k; ++c)
    std::copy(features.row(chosen[static_cast<std::size_t>(c)]),
              features.row(chosen[static_cast<std::size_t>(c)]) + d, out.centroids.row(c));

  std::vector<double> sums(static_cast<std::size_t>(k) * d);
  std::vector<int> counts(static_cast<std::size_t>(k));
  for (int iter = 0; iter < max_iters; ++iter) {
    // Assignment step (with empty-cluster repair).
    double wss = 0.0;
    for (int repair = 0;; ++repair) {
      std::fill(counts.begin(), counts.end(), 0);
      wss = 0.0;
      for (int i = 0; i < n; ++i) {
        const int c = detail::nearest_centroid(features.row(i), out.centroids);
        out.labels[static_cast<std::size_t>(i)] = c;
        ++counts[static_cast<std::size_t>(c)];
        wss += detail::sq_dist(features.row(i), out.centroids.row(c), d);
      }
      int empty = -1;
      for (int c = 0; c < k && empty < 0; ++c)
        if (counts[static_cast<std::size_t>(c)] == 0) empty = c;
      if (empty < 0 || repair >= k) break;
      // Promote the point farthest from its centroid to the empty slot.
      int far_idx = 0;
      double far_d = -1.0;
      for (int i = 0; i < n; ++i) {
        if (counts[static_cast<std::size_t>(out.labels[static_cast<std::size_t>(i)])] <= 1)
          continue;
        const double dd = detail::sq_dist(features.row(i),
                                          out.centroids.row(out.labels[static_cast<std::size_t>(i)]), d);
        if (dd > far_d) {
          far_d = dd;
          far_idx = i;
        }
      }
      std::copy(features.row(far_idx), features.row(far_idx) + d, out.centroids.row(empty));
    }
    out.wss_history.push_back(wss);
    out.iterations = iter + 1;

    // Update step.
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      const int c = out.labels[static_cast<std::size_t>(i)];
      ++counts[static_cast<std::size_t>(c)];
      const double* row = features.row(i);
      double* sum = sums.data() + static_cast<std::size_t>(c) * d;
      for (int j = 0; j < d; ++j) sum[j] += row[j];
    }
    double shift = 0.0;
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) continue;
      double* centroid = out.centroids.row(c);
      const double* sum = sums.data() + static_cast<std::size_t>(c) * d;
      double sq = 0.0;
      for (int j = 0; j < d; ++j) {
        const double updated = sum[j] / counts[static_cast<std::size_t>(c)];
        const double delta = updated - centroid[j];
        sq += delta * delta;
        centroid[j] = updated;
      }
      shift = std::max(shift, std::sqrt(sq));
    }
    if (shift < tol) break;
  }
  return out;
}

/// Per cluster, the member with least mean Euclidean distance to the other
/// members; ties break to the lowest sample index; singletons report 0.
/// `ids` supplies the sample names (defaults to stringified indices).
inline SelectionResult select_medoids(const FeatureMatrix& features,
                                      const ClusterAssignment& assignment,
                                      const std::vector<std::string>& ids = {}) {
  features.validate();
  const int n = features.rows, k = assignment.k();
  if (static_cast<int>(assignment.labels.size()) != n)
    throw InvalidInputError("select_medoids: assignment does not match features");
  if (!ids.empty() && static_cast<int>(ids.size()) != n)
    throw InvalidInputError("select_medoids: ids do not match features");
  std::vector<std::vector<int>> members(static_cast<std::size_t>(k));
  for (int i = 0; i < n; ++i) {
    const int c = assignment.labels[static_cast<std::size_t>(i)];
    if (c < 0 || c >= k) throw InvalidInputError("select_medoids: cluster index out of range");
    members[static_cast<std::size_t>(c)].push_back(i);
  }

  SelectionResult result;
  result.strategy = "kmedoids";
  result.budget = k;
  for (int c = 0; c < k; ++c) {
    const auto& m = members[static_cast<std::size_t>(c)];
    if (m.empty()) throw InvalidInputError("select_medoids: empty cluster " + std::to_string(c));
    int best = m[0];
    double best_mean = 0.0;
    if (m.size() > 1) {
      best_mean = std::numeric_limits<double>::max();
      for (int candidate : m) {
        double acc = 0.0;
        for (int other : m) {
          if (other == candidate) continue;
          acc += std::sqrt(detail::sq_dist(features.row(candidate), features.row(other),
                                           features.cols));
        }
        const double mean = acc / static_cast<double>(m.size() - 1);
        if (mean < best_mean) {  // strict: first (lowest) index wins ties
          best_mean = mean;
          best = candidate;
        }
      }
    }
    SelectedSample s;
    s.index = best;
    s.id = ids.empty() ? std::to_string(best) : ids[static_cast<std::size_t>(best)];
    s.cluster = c;
    s.mean_distance = best_mean;
    result.selected.push_back(std::move(s));
  }
  return result;
}

/// Full pipeline over the manifest's paired candidates: embed their
/// photo-domain images, cluster with k = min(budget, N), pick medoids.
/// strategy "random" instead samples uniformly without replacement.
inline SelectionResult select_paired_samples(const DatasetManifest& manifest, int budget,
                                             const EmbeddingBackbone& backbone,
                                             std::uint64_t seed,
                                             const std::string& strategy = "kmedoids") {
  if (manifest.paired.empty())
    throw InvalidInputError("selection requires paired candidates in the manifest");
  if (budget < 1) throw InvalidInputError("selection budget must be >= 1");
  const int n = static_cast<int>(manifest.paired.size());
  const int k = std::min(budget, n);

  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(n));
  for (const auto& p : manifest.paired) ids.push_back(p.id);

  if (strategy == "random") {
    Rng rng(mix_seed(seed, fnv1a("random_selection")));
    auto picks = rng.sample_without_replacement(static_cast<std::size_t>(n),
                                                static_cast<std::size_t>(k));
    SelectionResult result;
    result.strategy = "random";
    result.seed = seed;
    result.budget = budget;
    for (std::size_t idx : picks)
      result.selected.push_back({ids[idx], static_cast<int>(idx), -1, 0.0});
    return result;
  }
  if (strategy != "kmedoids")
    throw ConfigError("unknown selection strategy: " + strategy);

  std::vector<Tensor<float>> images;
  images.reserve(static_cast<std::size_t>(n));
  for (const auto& p : manifest.paired) images.push_back(load_image(manifest.resolve(p.path_x)));

  const FeatureMatrix features = extract_features(images, backbone);
  const ClusterAssignment assignment = kmeans_cluster(features, k, seed);
  SelectionResult result = select_medoids(features, assignment, ids);
  result.seed = seed;
  result.budget = budget;
  return result;
}

}  // namespace i2imix
