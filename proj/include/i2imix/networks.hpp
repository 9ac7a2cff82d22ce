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
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "i2imix/layers.hpp"
#include "i2imix/rng.hpp"

namespace i2imix {

/// Resnet translation generator: two stride-2 downsampling convolutions,
/// n residual blocks, two stride-1/2 upsampling convolutions, tanh output.
struct GeneratorConfig {
  int input_channels = 3;
  int output_channels = 3;
  int base_width = 64;
  int n_residual_blocks = 9;
  bool norm_affine = false;

  void validate() const {
    if (input_channels < 1 || output_channels < 1)
      throw ConfigError("generator channel counts must be >= 1");
    if (base_width < 1) throw ConfigError("generator base_width must be >= 1");
    if (n_residual_blocks < 1) throw ConfigError("generator n_residual_blocks must be >= 1");
  }
};

/// PatchGAN discriminator: n_layers stride-2 blocks, one stride-1 block,
/// 1-channel logit map head. n_layers = 3 with 4x4 kernels gives the
/// classic 70x70 receptive field.
struct DiscriminatorConfig {
  int input_channels = 3;
  int base_width = 64;
  int n_layers = 3;
  bool use_norm = true;
  bool norm_affine = false;

  void validate() const {
    if (input_channels < 1) throw ConfigError("discriminator input_channels must be >= 1");
    if (base_width < 1) throw ConfigError("discriminator base_width must be >= 1");
    if (n_layers < 1) throw ConfigError("discriminator n_layers must be >= 1");
  }

  static constexpr int kKernel = 4;

  /// (kernel, stride) of every conv in input-to-output order.
  std::vector<std::pair<int, int>> layer_stack() const {
    std::vector<std::pair<int, int>> stack;
    for (int i = 0; i < n_layers; ++i) stack.emplace_back(kKernel, 2);
    stack.emplace_back(kKernel, 1);
    stack.emplace_back(kKernel, 1);  // 1-channel head
    return stack;
  }
};

/// Theoretical receptive field of one output unit of a conv stack given as
/// (kernel, stride) pairs in input-to-output order:
/// r_{l-1} = (r_l - 1) * stride_l + kernel_l.
inline int receptive_field(const std::vector<std::pair<int, int>>& kernel_stride) {
  int r = 1;
  for (auto it = kernel_stride.rbegin(); it != kernel_stride.rend(); ++it)
    r = (r - 1) * it->second + it->first;
  return r;
}

inline int receptive_field(const DiscriminatorConfig& cfg) {
  cfg.validate();
  return receptive_field(cfg.layer_stack());
}

template <typename T>
class ResnetGenerator {
 public:
  ResnetGenerator(const GeneratorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    Rng rng(seed);
    const int w = cfg.base_width;
    net_.template emplace<ReflectionPad2d<T>>(3);
    net_.template emplace<Conv2d<T>>(cfg.input_channels, w, 7, 1, 0, rng);
    net_.template emplace<InstanceNorm2d<T>>(w, cfg.norm_affine);
    net_.template emplace<ReLU<T>>();
    net_.template emplace<Conv2d<T>>(w, 2 * w, 3, 2, 1, rng);
    net_.template emplace<InstanceNorm2d<T>>(2 * w, cfg.norm_affine);
    net_.template emplace<ReLU<T>>();
    net_.template emplace<Conv2d<T>>(2 * w, 4 * w, 3, 2, 1, rng);
    net_.template emplace<InstanceNorm2d<T>>(4 * w, cfg.norm_affine);
    net_.template emplace<ReLU<T>>();
    for (int i = 0; i < cfg.n_residual_blocks; ++i)
      net_.template emplace<ResidualBlock<T>>(4 * w, rng, cfg.norm_affine);
    net_.template emplace<ConvTranspose2d<T>>(4 * w, 2 * w, 3, 2, 1, 1, rng);
    net_.template emplace<InstanceNorm2d<T>>(2 * w, cfg.norm_affine);
    net_.template emplace<ReLU<T>>();
    net_.template emplace<ConvTranspose2d<T>>(2 * w, w, 3, 2, 1, 1, rng);
    net_.template emplace<InstanceNorm2d<T>>(w, cfg.norm_affine);
    net_.template emplace<ReLU<T>>();
    net_.template emplace<ReflectionPad2d<T>>(3);
    net_.template emplace<Conv2d<T>>(w, cfg.output_channels, 7, 1, 0, rng);
    net_.template emplace<Tanh<T>>();
  }

  const GeneratorConfig& config() const { return cfg_; }

  void check_input(const Tensor<T>& x) const {
    if (x.rank() != 3 || x.dim(0) != cfg_.input_channels)
      throw InvalidInputError("generator input must be " + std::to_string(cfg_.input_channels) +
                              "xHxW, got " + x.shape_str());
    if (x.dim(1) < 4 || x.dim(2) < 4 || x.dim(1) % 4 != 0 || x.dim(2) % 4 != 0)
      throw InvalidInputError("generator input H and W must be multiples of 4, got " +
                              x.shape_str());
  }

  Tensor<T> forward(const Tensor<T>& x, Tape<T>& tape) const {
    check_input(x);
    return net_.forward(x, tape);
  }

  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape) { return net_.backward(gy, tape); }

  Tensor<T> infer(const Tensor<T>& x) const {
    check_input(x);
    return net_.infer(x);
  }

  NamedParams<T> named_params(const std::string& prefix) {
    NamedParams<T> out;
    net_.collect_params(prefix, out);
    return out;
  }

 private:
  GeneratorConfig cfg_;
  Sequential<T> net_;
};

template <typename T>
class PatchDiscriminator {
 public:
  PatchDiscriminator(const DiscriminatorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    Rng rng(seed);
    const int k = DiscriminatorConfig::kKernel;
    int prev = cfg.input_channels;
    int width = cfg.base_width;
    for (int i = 0; i < cfg.n_layers; ++i) {
      width = cfg.base_width * std::min(1 << i, 8);
      net_.template emplace<Conv2d<T>>(prev, width, k, 2, 1, rng);
      if (i > 0 && cfg.use_norm) net_.template emplace<InstanceNorm2d<T>>(width, cfg.norm_affine);
      net_.template emplace<LeakyReLU<T>>(T(0.2));
      prev = width;
    }
    width = cfg.base_width * std::min(1 << cfg.n_layers, 8);
    net_.template emplace<Conv2d<T>>(prev, width, k, 1, 1, rng);
    if (cfg.use_norm) net_.template emplace<InstanceNorm2d<T>>(width, cfg.norm_affine);
    net_.template emplace<LeakyReLU<T>>(T(0.2));
    net_.template emplace<Conv2d<T>>(width, 1, k, 1, 1, rng);
  }

  const DiscriminatorConfig& config() const { return cfg_; }

  /// Raw (non-transformed) logit map; no sigmoid, per the relativistic
  /// formulation.
  Tensor<T> forward(const Tensor<T>& x, Tape<T>& tape) const {
    if (x.rank() != 3 || x.dim(0) != cfg_.input_channels)
      throw InvalidInputError("discriminator input must be " +
                              std::to_string(cfg_.input_channels) + "xHxW, got " + x.shape_str());
    return net_.forward(x, tape);
  }

  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape) { return net_.backward(gy, tape); }

  Tensor<T> infer(const Tensor<T>& x) const {
    Tape<T> scratch;
    return forward(x, scratch);
  }

  NamedParams<T> named_params(const std::string& prefix) {
    NamedParams<T> out;
    net_.collect_params(prefix, out);
    return out;
  }

 private:
  DiscriminatorConfig cfg_;
  Sequential<T> net_;
};

template <typename T>
ResnetGenerator<T> build_generator(const GeneratorConfig& cfg, std::uint64_t seed) {
  return ResnetGenerator<T>(cfg, seed);
}

template <typename T>
PatchDiscriminator<T> build_discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed) {
  return PatchDiscriminator<T>(cfg, seed);
}

/// Inference-mode translation, shape-preserving and deterministic.
template <typename T>
Tensor<T> translate(const ResnetGenerator<T>& g, const Tensor<T>& x) {
  return g.infer(x);
}

}  // namespace i2imix
