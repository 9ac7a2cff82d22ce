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
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "i2imix/errors.hpp"

namespace i2imix {

/// Dense row-major tensor of rank <= 4. Images are stored CHW, conv weights
/// (out, in, kh, kw). Deliberately minimal; the heavy math lives in the layer
/// implementations which map the flat storage into Eigen matrices.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(count(shape), T(0)) {}
  Tensor(std::vector<int> s, T fill_value) : shape(std::move(s)), data(count(shape), fill_value) {}

  static std::size_t count(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      if (d < 0) throw InvalidInputError("tensor dimension must be nonnegative");
      n *= static_cast<std::size_t>(d);
    }
    return s.empty() ? 0 : n;
  }

  std::size_t numel() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  // CHW accessors
  T& at(int c, int h, int w) {
    return data[(static_cast<std::size_t>(c) * shape[1] + h) * shape[2] + w];
  }
  T at(int c, int h, int w) const {
    return data[(static_cast<std::size_t>(c) * shape[1] + h) * shape[2] + w];
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }
  void zero() { fill(T(0)); }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  Tensor& operator+=(const Tensor& other) {
    if (!same_shape(other)) throw InvalidInputError("tensor shape mismatch in +=");
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += other.data[i];
    return *this;
  }

  Tensor& operator*=(T s) {
    for (auto& v : data) v *= s;
    return *this;
  }

  void add_scaled(const Tensor& other, T s) {
    if (!same_shape(other)) throw InvalidInputError("tensor shape mismatch in add_scaled");
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += s * other.data[i];
  }

  bool all_finite() const {
    for (const auto& v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ")";
    return os.str();
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* where) {
  if (!a.same_shape(b))
    throw InvalidInputError(std::string(where) + ": shape mismatch " + a.shape_str() + " vs " +
                            b.shape_str());
}

}  // namespace i2imix
