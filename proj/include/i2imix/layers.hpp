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

#include <Eigen/Core>

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "i2imix/rng.hpp"
#include "i2imix/tensor.hpp"

namespace i2imix {

// Minimal reverse-mode stack for small convolutional nets, CHW single-sample
// tensors. Each forward pass records per-layer context onto a caller-owned
// Tape, so one network can run several concurrent passes per training step
// (cycle, identity, adversarial) and be backpropagated per pass in any order.
// Parameter gradients accumulate across passes until zero_grad().

template <typename T>
struct TapeEntry {
  virtual ~TapeEntry() = default;
};

template <typename T>
using Tape = std::vector<std::unique_ptr<TapeEntry<T>>>;

template <typename T>
struct Param {
  Tensor<T> value;
  Tensor<T> grad;

  explicit Param(std::vector<int> shape) : value(shape), grad(std::move(shape)) {}
  void zero_grad() { grad.zero(); }
};

template <typename T>
using NamedParams = std::vector<std::pair<std::string, Param<T>*>>;

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  /// Run the layer, appending whatever backward() will need to `tape`.
  virtual Tensor<T> forward(const Tensor<T>& x, Tape<T>& tape) const = 0;

  /// Consume this layer's tape entry (tape.back()), accumulate parameter
  /// gradients and return the gradient w.r.t. the layer input.
  virtual Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape) = 0;

  virtual void collect_params(const std::string& prefix, NamedParams<T>& out) {}

  /// Inference without gradient recording.
  Tensor<T> infer(const Tensor<T>& x) const {
    Tape<T> scratch;
    return forward(x, scratch);
  }
};

namespace detail {

inline int conv_out_dim(int in, int kernel, int stride, int pad) {
  const int span = in + 2 * pad - kernel;
  if (span < 0) throw InvalidInputError("conv input smaller than kernel (including padding)");
  return span / stride + 1;
}

// im2col for zero-padded convolution: (C*K*K) x (OH*OW), row-major.
template <typename T>
void im2col(const T* x, int c, int h, int w, int k, int stride, int pad, int oh, int ow,
            T* cols) {
  for (int ch = 0; ch < c; ++ch) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        T* row = cols + ((static_cast<std::size_t>(ch) * k + ki) * k + kj) *
                            (static_cast<std::size_t>(oh) * ow);
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ki;
          if (iy < 0 || iy >= h) {
            std::fill(row, row + ow, T(0));
            row += ow;
            continue;
          }
          const T* src = x + (static_cast<std::size_t>(ch) * h + iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kj;
            *row++ = (ix < 0 || ix >= w) ? T(0) : src[ix];
          }
        }
      }
    }
  }
}

// Scatter-add inverse of im2col.
template <typename T>
void col2im(const T* cols, int c, int h, int w, int k, int stride, int pad, int oh, int ow,
            T* x) {
  std::fill(x, x + static_cast<std::size_t>(c) * h * w, T(0));
  for (int ch = 0; ch < c; ++ch) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const T* row = cols + ((static_cast<std::size_t>(ch) * k + ki) * k + kj) *
                                  (static_cast<std::size_t>(oh) * ow);
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ki;
          if (iy < 0 || iy >= h) {
            row += ow;
            continue;
          }
          T* dst = x + (static_cast<std::size_t>(ch) * h + iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kj;
            if (ix >= 0 && ix < w) dst[ix] += row[ox];
          }
          row += ow;
        }
      }
    }
  }
}

template <typename T>
struct SavedInput : TapeEntry<T> {
  Tensor<T> x;
  explicit SavedInput(Tensor<T> v) : x(std::move(v)) {}
};

template <typename T>
std::unique_ptr<TapeEntry<T>> save_input(const Tensor<T>& x) {
  return std::make_unique<SavedInput<T>>(x);
}

template <typename T>
const Tensor<T>& saved_input(Tape<T>& tape) {
  return static_cast<SavedInput<T>*>(tape.back().get())->x;
}

}  // namespace detail

template <typename T>
class Conv2d : public Layer<T> {
 public:
  Conv2d(int in_c, int out_c, int kernel, int stride, int pad, Rng& rng, T init_std = T(0.02))
      : in_c_(in_c),
        out_c_(out_c),
        kernel_(kernel),
        stride_(stride),
        pad_(pad),
        weight_({out_c, in_c, kernel, kernel}),
        bias_({out_c}) {
    for (auto& v : weight_.value.data) v = static_cast<T>(rng.normal(0.0, init_std));
  }

  Tensor<T> forward(const Tensor<T>& x, Tape<T>& tape) const override {
    check_input(x);
    const int h = x.dim(1), w = x.dim(2);
    const int oh = detail::conv_out_dim(h, kernel_, stride_, pad_);
    const int ow = detail::conv_out_dim(w, kernel_, stride_, pad_);
    Tensor<T> cols({in_c_ * kernel_ * kernel_, oh * ow});
    detail::im2col(x.ptr(), in_c_, h, w, kernel_, stride_, pad_, oh, ow, cols.ptr());

    Tensor<T> y({out_c_, oh, ow});
    ConstMatMap<T> wmat(weight_.value.ptr(), out_c_, in_c_ * kernel_ * kernel_);
    ConstMatMap<T> cmat(cols.ptr(), cols.dim(0), cols.dim(1));
    MatMap<T> ymat(y.ptr(), out_c_, oh * ow);
    ymat.noalias() = wmat * cmat;
    for (int oc = 0; oc < out_c_; ++oc) ymat.row(oc).array() += bias_.value.data[oc];

    tape.push_back(detail::save_input(x));
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape) override {
    const Tensor<T>& x = detail::saved_input(tape);
    const int h = x.dim(1), w = x.dim(2);
    const int oh = gy.dim(1), ow = gy.dim(2);

    Tensor<T> cols({in_c_ * kernel_ * kernel_, oh * ow});
    detail::im2col(x.ptr(), in_c_, h, w, kernel_, stride_, pad_, oh, ow, cols.ptr());

    ConstMatMap<T> gymat(gy.ptr(), out_c_, oh * ow);
    ConstMatMap<T> cmat(cols.ptr(), cols.dim(0), cols.dim(1));
    MatMap<T> gwmat(weight_.grad.ptr(), out_c_, in_c_ * kernel_ * kernel_);
    gwmat.noalias() += gymat * cmat.transpose();
    for (int oc = 0; oc < out_c_; ++oc) bias_.grad.data[oc] += gymat.row(oc).sum();

    Tensor<T> gcols({in_c_ * kernel_ * kernel_, oh * ow});
    ConstMatMap<T> wmat(weight_.value.ptr(), out_c_, in_c_ * kernel_ * kernel_);
    MatMap<T> gcmat(gcols.ptr(), gcols.dim(0), gcols.dim(1));
    gcmat.noalias() = wmat.transpose() * gymat;

    Tensor<T> gx({in_c_, h, w});
    detail::col2im(gcols.ptr(), in_c_, h, w, kernel_, stride_, pad_, oh, ow, gx.ptr());
    tape.pop_back();
    return gx;
  }

  void collect_params(const std::string& prefix, NamedParams<T>& out) override {
    out.emplace_back(prefix + ".weight", &weight_);
    out.emplace_back(prefix + ".bias", &bias_);
  }

 private:
  void check_input(const Tensor<T>& x) const {
    if (x.rank() != 3 || x.dim(0) != in_c_)
      throw InvalidInputError("Conv2d: expected " + std::to_string(in_c_) + "xHxW, got " +
                              x.shape_str());
  }

  int in_c_, out_c_, kernel_, stride_, pad_;
  Param<T> weight_;
  Param<T> bias_;
};

/// Fractionally-strided (transposed) convolution; the standard upsampling
/// decoder block. Weight layout (in, out, kh, kw).
template <typename T>
class ConvTranspose2d : public Layer<T> {
 public:
  ConvTranspose2d(int in_c, int out_c, int kernel, int stride, int pad, int out_pad, Rng& rng,
                  T init_std = T(0.02))
      : in_c_(in_c),
        out_c_(out_c),
        kernel_(kernel),
        stride_(stride),
        pad_(pad),
        out_pad_(out_pad),
        weight_({in_c, out_c, kernel, kernel}),
        bias_({out_c}) {
    for (auto& v : weight_.value.data) v = static_cast<T>(rng.normal(0.0, init_std));
  }

  Tensor<T> forward(const Tensor<T>& x, Tape<T>& tape) const override {
    if (x.rank() != 3 || x.dim(0) != in_c_)
      throw InvalidInputError("ConvTranspose2d: bad input " + x.shape_str());
    const int h = x.dim(1), w = x.dim(2);
    const int oh = (h - 1) * stride_ - 2 * pad_ + kernel_ + out_pad_;
    const int ow = (w - 1) * stride_ - 2 * pad_ + kernel_ + out_pad_;

    // cols = W^T * x, then scatter back onto the (oh, ow) grid.
    Tensor<T> cols({out_c_ * kernel_ * kernel_, h * w});
    ConstMatMap<T> wmat(weight_.value.ptr(), in_c_, out_c_ * kernel_ * kernel_);
    ConstMatMap<T> xmat(x.ptr(), in_c_, h * w);
    MatMap<T> cmat(cols.ptr(), cols.dim(0), cols.dim(1));
    cmat.noalias() = wmat.transpose() * xmat;

    Tensor<T> y({out_c_, oh, ow});
    detail::col2im(cols.ptr(), out_c_, oh, ow, kernel_, stride_, pad_, h, w, y.ptr());
    MatMap<T> ymat(y.ptr(), out_c_, oh * ow);
    for (int oc = 0; oc < out_c_; ++oc) ymat.row(oc).array() += bias_.value.data[oc];

    tape.push_back(detail::save_input(x));
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape) override {
    const Tensor<T>& x = detail::saved_input(tape);
    const int h = x.dim(1), w = x.dim(2);
    const int oh = gy.dim(1), ow = gy.dim(2);

    Tensor<T> gcols({out_c_ * kernel_ * kernel_, h * w});
    detail::im2col(gy.ptr(), out_c_, oh, ow, kernel_, stride_, pad_, h, w, gcols.ptr());

    ConstMatMap<T> gcmat(gcols.ptr(), gcols.dim(0), gcols.dim(1));
    ConstMatMap<T> xmat(x.ptr(), in_c_, h * w);
    MatMap<T> gwmat(weight_.grad.ptr(), in_c_, out_c_ * kernel_ * kernel_);
    gwmat.noalias() += xmat * gcmat.transpose();

    ConstMatMap<T> gymat(gy.ptr(), out_c_, oh * ow);
    for (int oc = 0; oc < out_c_; ++oc) bias_.grad.data[oc] += gymat.row(oc).sum();

    Tensor<T> gx({in_c_, h, w});
    ConstMatMap<T> wmat(weight_.value.ptr(), in_c_, out_c_ * kernel_ * kernel_);
    MatMap<T> gxmat(gx.ptr(), in_c_, h * w);
    gxmat.noalias() = wmat * gcmat;
    tape.pop_back();
    return gx;
  }

  void collect_params(const std::string& prefix, NamedParams<T>& out) override {
    out.emplace_back(prefix + ".weight", &weight_);
    out.emplace_back(prefix + ".bias", &bias_);
  }

 private:
  int in_c_, out_c_, kernel_, stride_, pad_, out_pad_;
  Param<T> weight_;
  Param<T> bias_;
};

/// Per-channel normalization over spatial dims, optional affine scale/shift.
template <typename T>
class InstanceNorm2d : public Layer<T> {
 public:
  explicit InstanceNorm2d(int channels, bool affine = false, T eps = T(1e-5))
      : channels_(channels), affine_(affine), eps_(eps), gamma_({channels}), beta_({channels}) {
    gamma_.value.fill(T(1));
  }

  Tensor<T> forward(const Tensor<T>& x, Tape<T>& tape) const override {
    if (x.rank() != 3 || x.dim(0) != channels_)
      throw InvalidInputError("InstanceNorm2d: bad input " + x.shape_str());
    const int h = x.dim(1), w = x.dim(2);
    const std::size_t n = static_cast<std::size_t>(h) * w;

    auto entry = std::make_unique<Entry>();
    entry->xhat = Tensor<T>({channels_, h, w});
    entry->inv_std.resize(channels_);

    Tensor<T> y({channels_, h, w});
    for (int c = 0; c < channels_; ++c) {
      const T* xs = x.ptr() + c * n;
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += xs[i];
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = xs[i] - mean;
        var += d * d;
      }
      var /= static_cast<double>(n);
      const T inv_std = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps_)));
      entry->inv_std[c] = inv_std;
      T* xh = entry->xhat.ptr() + c * n;
      T* ys = y.ptr() + c * n;
      const T g = affine_ ? gamma_.value.data[c] : T(1);
      const T b = affine_ ? beta_.value.data[c] : T(0);
      for (std::size_t i = 0; i < n; ++i) {
        xh[i] = static_cast<T>((xs[i] - mean) * inv_std);
        ys[i] = g * xh[i] + b;
      }
    }
    tape.push_back(std::move(entry));
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape) override {
    auto* entry = static_cast<Entry*>(tape.back().get());
    const int h = gy.dim(1), w = gy.dim(2);
    const std::size_t n = static_cast<std::size_t>(h) * w;

    Tensor<T> gx({channels_, h, w});
    for (int c = 0; c < channels_; ++c) {
      const T* g = gy.ptr() + c * n;
      const T* xh = entry->xhat.ptr() + c * n;
      const T gamma = affine_ ? gamma_.value.data[c] : T(1);
      double sum_g = 0.0, sum_gx = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        sum_g += g[i];
        sum_gx += static_cast<double>(g[i]) * xh[i];
      }
      if (affine_) {
        gamma_.grad.data[c] += static_cast<T>(sum_gx);
        beta_.grad.data[c] += static_cast<T>(sum_g);
      }
      const double mean_g = sum_g / static_cast<double>(n);
      const double mean_gx = sum_gx / static_cast<double>(n);
      const T s = gamma * entry->inv_std[c];
      T* out = gx.ptr() + c * n;
      for (std::size_t i = 0; i < n; ++i)
        out[i] = static_cast<T>(s * (g[i] - mean_g - xh[i] * mean_gx));
    }
    tape.pop_back();
    return gx;
  }

  void collect_params(const std::string& prefix, NamedParams<T>& out) override {
    if (affine_) {
      out.emplace_back(prefix + ".gamma", &gamma_);
      out.emplace_back(prefix + ".beta", &beta_);
    }
  }

 private:
  struct Entry : TapeEntry<T> {
    Tensor<T> xhat;
    std::vector<T> inv_std;
  };

  int channels_;
  bool affine_;
  T eps_;
  Param<T> gamma_;
  Param<T> beta_;
};

template <typename T>
class ReLU : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Tape<T>& tape) const override {
    Tensor<T> y = x;
    for (auto& v : y.data)
      if (v < T(0)) v = T(0);
    tape.push_back(detail::save_input(y));
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape) override {
    const Tensor<T>& y = detail::saved_input(tape);
    Tensor<T> gx = gy;
    for (std::size_t i = 0; i < gx.data.size(); ++i)
      if (y.data[i] <= T(0)) gx.data[i] = T(0);
    tape.pop_back();
    return gx;
  }
};

template <typename T>
class LeakyReLU : public Layer<T> {
 public:
  explicit LeakyReLU(T slope = T(0.2)) : slope_(slope) {}

  Tensor<T> forward(const Tensor<T>& x, Tape<T>& tape) const override {
    Tensor<T> y = x;
    for (auto& v : y.data)
      if (v < T(0)) v *= slope_;
    tape.push_back(detail::save_input(x));
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape) override {
    const Tensor<T>& x = detail::saved_input(tape);
    Tensor<T> gx = gy;
    for (std::size_t i = 0; i < gx.data.size(); ++i)
      if (x.data[i] < T(0)) gx.data[i] *= slope_;
    tape.pop_back();
    return gx;
  }

 private:
  T slope_;
};

template <typename T>
class Tanh : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Tape<T>& tape) const override {
    Tensor<T> y = x;
    for (auto& v : y.data) v = std::tanh(v);
    tape.push_back(detail::save_input(y));
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape) override {
    const Tensor<T>& y = detail::saved_input(tape);
    Tensor<T> gx = gy;
    for (std::size_t i = 0; i < gx.data.size(); ++i)
      gx.data[i] *= (T(1) - y.data[i] * y.data[i]);
    tape.pop_back();
    return gx;
  }
};

/// Mirror padding. For degenerate maps smaller than the pad width the
/// reflected index is clamped to the valid range, which keeps tiny probe
/// inputs (4x4 generators) well-defined.
template <typename T>
class ReflectionPad2d : public Layer<T> {
 public:
  explicit ReflectionPad2d(int pad) : pad_(pad) {}

  Tensor<T> forward(const Tensor<T>& x, Tape<T>& tape) const override {
    if (x.rank() != 3) throw InvalidInputError("ReflectionPad2d expects CHW");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor<T> y({c, h + 2 * pad_, w + 2 * pad_});
    for (int ch = 0; ch < c; ++ch)
      for (int yy = 0; yy < h + 2 * pad_; ++yy) {
        const int sy = reflect(yy - pad_, h);
        for (int xx = 0; xx < w + 2 * pad_; ++xx) y.at(ch, yy, xx) = x.at(ch, sy, reflect(xx - pad_, w));
      }
    auto entry = std::make_unique<Entry>();
    entry->h = h;
    entry->w = w;
    tape.push_back(std::move(entry));
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape) override {
    auto* entry = static_cast<Entry*>(tape.back().get());
    const int c = gy.dim(0), h = entry->h, w = entry->w;
    Tensor<T> gx({c, h, w});
    for (int ch = 0; ch < c; ++ch)
      for (int yy = 0; yy < gy.dim(1); ++yy) {
        const int sy = reflect(yy - pad_, h);
        for (int xx = 0; xx < gy.dim(2); ++xx)
          gx.at(ch, sy, reflect(xx - pad_, w)) += gy.at(ch, yy, xx);
      }
    tape.pop_back();
    return gx;
  }

 private:
  struct Entry : TapeEntry<T> {
    int h = 0, w = 0;
  };

  static int reflect(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
      if (i < 0) i = -i;
      if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
  }

  int pad_;
};

template <typename T>
class Sequential : public Layer<T> {
 public:
  Sequential() = default;

  Sequential& add(std::unique_ptr<Layer<T>> layer) {
    layers_.push_back(std::move(layer));
    return *this;
  }

  template <typename L, typename... Args>
  Sequential& emplace(Args&&... args) {
    layers_.push_back(std::make_unique<L>(std::forward<Args>(args)...));
    return *this;
  }

  Tensor<T> forward(const Tensor<T>& x, Tape<T>& tape) const override {
    Tensor<T> cur = x;
    for (const auto& layer : layers_) cur = layer->forward(cur, tape);
    return cur;
  }

  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape) override {
    Tensor<T> cur = gy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur, tape);
    return cur;
  }

  void collect_params(const std::string& prefix, NamedParams<T>& out) override {
    for (std::size_t i = 0; i < layers_.size(); ++i)
      layers_[i]->collect_params(prefix + "." + std::to_string(i), out);
  }

  std::size_t size() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

/// y = x + body(x). The skip is linear so the block itself records nothing;
/// the body's entries live on the same tape.
template <typename T>
class ResidualBlock : public Layer<T> {
 public:
  explicit ResidualBlock(int channels, Rng& rng, bool norm_affine = false) {
    body_.template emplace<ReflectionPad2d<T>>(1);
    body_.template emplace<Conv2d<T>>(channels, channels, 3, 1, 0, rng);
    body_.template emplace<InstanceNorm2d<T>>(channels, norm_affine);
    body_.template emplace<ReLU<T>>();
    body_.template emplace<ReflectionPad2d<T>>(1);
    body_.template emplace<Conv2d<T>>(channels, channels, 3, 1, 0, rng);
    body_.template emplace<InstanceNorm2d<T>>(channels, norm_affine);
  }

  Tensor<T> forward(const Tensor<T>& x, Tape<T>& tape) const override {
    Tensor<T> y = body_.forward(x, tape);
    y += x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape) override {
    Tensor<T> gx = body_.backward(gy, tape);
    gx += gy;
    return gx;
  }

  void collect_params(const std::string& prefix, NamedParams<T>& out) override {
    body_.collect_params(prefix + ".body", out);
  }

 private:
  Sequential<T> body_;
};

}  // namespace i2imix
