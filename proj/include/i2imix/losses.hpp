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

#include "i2imix/tensor.hpp"

namespace i2imix {

// The four objective components and their weighted sum. All losses are
// written as quantities to be MINIMIZED; the adversarial terms are the
// negated log-likelihoods of the relativistic discriminator
// D_rel(a, b) = sigmoid(C(a) - C(b)), evaluated as the numerically stable
// softplus of the logit difference. Expectations are means over the
// discriminator's spatial logit map (batch size is 1 throughout).

/// Weights (lambda1..lambda4) of GAN, cycle, identity and paired-L1 terms.
struct LossWeights {
  double lambda1 = 1.0;    // adversarial
  double lambda2 = 10.0;   // cycle consistency
  double lambda3 = 10.0;   // identity
  double lambda4 = 150.0;  // paired L1 reconstruction

  void validate() const {
    if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0 || lambda4 < 0)
      throw ConfigError("loss weights must be nonnegative");
  }
};

/// Per-step components. `total` is the generator-side objective.
struct LossReport {
  double gan_g = 0.0;
  double gan_d = 0.0;
  double cycle = 0.0;
  double identity = 0.0;
  double l1_paired = 0.0;
  double total = 0.0;
  bool is_paired = false;

  bool all_finite() const {
    return std::isfinite(gan_g) && std::isfinite(gan_d) && std::isfinite(cycle) &&
           std::isfinite(identity) && std::isfinite(l1_paired) && std::isfinite(total);
  }
};

namespace detail {

inline double softplus(double z) {
  // max(z,0) + log1p(exp(-|z|)); exact ln 2 at z = 0.
  return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z)));
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace detail

/// Discriminator side: mean of -log sigmoid(c_real - c_fake).
template <typename T>
T relativistic_d_loss(const Tensor<T>& c_real, const Tensor<T>& c_fake) {
  require_same_shape(c_real, c_fake, "relativistic_d_loss");
  if (c_real.numel() == 0) throw InvalidInputError("relativistic_d_loss: empty logit map");
  double acc = 0.0;
  for (std::size_t i = 0; i < c_real.numel(); ++i)
    acc += detail::softplus(-(static_cast<double>(c_real.data[i]) - c_fake.data[i]));
  return static_cast<T>(acc / static_cast<double>(c_real.numel()));
}

/// Gradients of relativistic_d_loss scaled by `scale`, added into the
/// optional output tensors (which must be pre-shaped or empty).
template <typename T>
T relativistic_d_loss_grad(const Tensor<T>& c_real, const Tensor<T>& c_fake, Tensor<T>* d_real,
                           Tensor<T>* d_fake, T scale = T(1)) {
  require_same_shape(c_real, c_fake, "relativistic_d_loss_grad");
  if (c_real.numel() == 0) throw InvalidInputError("relativistic_d_loss_grad: empty logit map");
  if (d_real && d_real->numel() == 0) *d_real = Tensor<T>(c_real.shape);
  if (d_fake && d_fake->numel() == 0) *d_fake = Tensor<T>(c_fake.shape);
  const double inv_n = 1.0 / static_cast<double>(c_real.numel());
  double acc = 0.0;
  for (std::size_t i = 0; i < c_real.numel(); ++i) {
    const double d = static_cast<double>(c_real.data[i]) - c_fake.data[i];
    acc += detail::softplus(-d);
    const double g = -detail::sigmoid(-d) * inv_n;  // dL/d(c_real_i)
    if (d_real) d_real->data[i] += static_cast<T>(scale * g);
    if (d_fake) d_fake->data[i] -= static_cast<T>(scale * g);
  }
  return static_cast<T>(acc * inv_n);
}

/// Generator side: mean of -log sigmoid(c_fake - c_real). Exactly the
/// discriminator loss with the arguments swapped.
template <typename T>
T relativistic_g_loss(const Tensor<T>& c_real, const Tensor<T>& c_fake) {
  return relativistic_d_loss(c_fake, c_real);
}

template <typename T>
T relativistic_g_loss_grad(const Tensor<T>& c_real, const Tensor<T>& c_fake, Tensor<T>* d_real,
                           Tensor<T>* d_fake, T scale = T(1)) {
  return relativistic_d_loss_grad(c_fake, c_real, d_fake, d_real, scale);
}

/// Mean absolute error.
template <typename T>
T l1_mean(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "l1_mean");
  if (a.numel() == 0) throw InvalidInputError("l1_mean: empty tensors");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    acc += std::fabs(static_cast<double>(a.data[i]) - b.data[i]);
  return static_cast<T>(acc / static_cast<double>(a.numel()));
}

/// Value of l1_mean(a, b) plus its gradient w.r.t. `a`, scaled by `scale`.
template <typename T>
T l1_mean_grad(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& da, T scale = T(1)) {
  require_same_shape(a, b, "l1_mean_grad");
  if (a.numel() == 0) throw InvalidInputError("l1_mean_grad: empty tensors");
  if (da.numel() == 0) da = Tensor<T>(a.shape);
  const T g = scale / static_cast<T>(a.numel());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    acc += std::fabs(d);
    if (d > 0)
      da.data[i] += g;
    else if (d < 0)
      da.data[i] -= g;
  }
  return static_cast<T>(acc / static_cast<double>(a.numel()));
}

/// L1(x_cyc, x) + L1(y_cyc, y): both reconstruction directions.
template <typename T>
T cycle_loss(const Tensor<T>& x, const Tensor<T>& x_cyc, const Tensor<T>& y,
             const Tensor<T>& y_cyc) {
  return l1_mean(x_cyc, x) + l1_mean(y_cyc, y);
}

/// L1(G_YX(x), x) + L1(G_XY(y), y): generators fed their own output domain.
template <typename T>
T identity_loss(const Tensor<T>& x, const Tensor<T>& g_yx_of_x, const Tensor<T>& y,
                const Tensor<T>& g_xy_of_y) {
  return l1_mean(g_yx_of_x, x) + l1_mean(g_xy_of_y, y);
}

/// L1(fake_y, y) + L1(fake_x, x): supervised term for paired batches.
template <typename T>
T paired_l1_loss(const Tensor<T>& fake_y, const Tensor<T>& y, const Tensor<T>& fake_x,
                 const Tensor<T>& x) {
  return l1_mean(fake_y, y) + l1_mean(fake_x, x);
}

/// lambda1*gan_g + lambda2*cycle + lambda3*identity (+ lambda4*l1 if paired).
inline double total_generator_loss(double gan_g, double cycle, double identity, double l1_paired,
                                   const LossWeights& w, bool is_paired) {
  w.validate();
  double total = w.lambda1 * gan_g + w.lambda2 * cycle + w.lambda3 * identity;
  if (is_paired) total += w.lambda4 * l1_paired;
  return total;
}

}  // namespace i2imix
