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

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "i2imix/rng.hpp"
#include "i2imix/tensor.hpp"

namespace testsupport {

inline i2imix::Tensor<double> random_tensor(std::vector<int> shape, i2imix::Rng& rng,
                                            double lo = -1.0, double hi = 1.0) {
  i2imix::Tensor<double> t(std::move(shape));
  for (auto& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

inline i2imix::Tensor<float> random_tensor_f(std::vector<int> shape, i2imix::Rng& rng,
                                             double lo = -1.0, double hi = 1.0) {
  i2imix::Tensor<float> t(std::move(shape));
  for (auto& v : t.data) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

/// Central finite difference against an analytic derivative; the acceptance
/// tolerance is rel < 1e-4 with a small absolute floor for near-zero grads.
struct GradCheckResult {
  double max_rel_error = 0.0;
  int checked = 0;
  bool ok = true;
};

inline bool grad_matches(double analytic, double numeric, double rel_tol = 1e-4,
                         double abs_tol = 1e-7) {
  const double err = std::fabs(analytic - numeric);
  return err <= rel_tol * std::max(std::fabs(analytic), std::fabs(numeric)) + abs_tol;
}

/// Probes `n_probes` coordinates of `values` against d(loss)/d(values[i])
/// from `analytic_grad`, recomputing `loss_fn` at +/- h.
inline GradCheckResult finite_difference_check(std::vector<double*> values,
                                               std::vector<double> analytic_grad,
                                               const std::function<double()>& loss_fn,
                                               int n_probes, i2imix::Rng& rng, double h = 1e-5,
                                               double rel_tol = 1e-4) {
  GradCheckResult result;
  for (int p = 0; p < n_probes; ++p) {
    const std::size_t idx =
        static_cast<std::size_t>(rng.uniform_index(static_cast<std::uint64_t>(values.size())));
    double* slot = values[idx];
    const double saved = *slot;
    *slot = saved + h;
    const double up = loss_fn();
    *slot = saved - h;
    const double down = loss_fn();
    *slot = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = analytic_grad[idx];
    const double err = std::fabs(analytic - numeric);
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-7});
    result.max_rel_error = std::max(result.max_rel_error, err / denom);
    if (!grad_matches(analytic, numeric, rel_tol)) result.ok = false;
    ++result.checked;
  }
  return result;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    base_ = std::filesystem::temp_directory_path() /
            ("i2imix_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(base_);
    std::filesystem::create_directories(base_);
  }
  ~TempDir() { std::filesystem::remove_all(base_); }
  std::string path(const std::string& rel = "") const {
    return rel.empty() ? base_.string() : (base_ / rel).string();
  }

 private:
  std::filesystem::path base_;
};

}  // namespace testsupport
