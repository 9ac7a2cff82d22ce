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

#include <catch2/catch_amalgamated.hpp>

#include "i2imix/layers.hpp"
#include "test_support.hpp"

using namespace i2imix;
using testsupport::random_tensor;

namespace {

// Scalar probe loss: sum(output * R) for a fixed random R.
template <typename LayerT>
void check_layer_gradients(LayerT& layer, const std::vector<int>& in_shape, std::uint64_t seed,
                           int n_probes = 40) {
  Rng rng(seed);
  Tensor<double> x = random_tensor(in_shape, rng);
  Tape<double> probe_tape;
  Tensor<double> y0 = layer.forward(x, probe_tape);
  probe_tape.clear();
  Tensor<double> r = random_tensor(y0.shape, rng);

  auto loss_fn = [&]() {
    const Tensor<double> y = layer.infer(x);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) acc += y.data[i] * r.data[i];
    return acc;
  };

  // Analytic gradients for input and all params.
  NamedParams<double> params;
  layer.collect_params("p", params);
  for (auto& [name, p] : params) p->zero_grad();
  Tape<double> tape;
  layer.forward(x, tape);
  Tensor<double> gx = layer.backward(r, tape);

  std::vector<double*> slots;
  std::vector<double> analytic;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    slots.push_back(&x.data[i]);
    analytic.push_back(gx.data[i]);
  }
  for (auto& [name, p] : params)
    for (std::size_t i = 0; i < p->value.numel(); ++i) {
      slots.push_back(&p->value.data[i]);
      analytic.push_back(p->grad.data[i]);
    }

  auto result =
      testsupport::finite_difference_check(slots, analytic, loss_fn, n_probes, rng, 1e-6);
  INFO("max rel error " << result.max_rel_error);
  CHECK(result.ok);
}

}  // namespace

TEST_CASE("conv2d matches a direct convolution", "[layers]") {
  Rng rng(7);
  Conv2d<double> conv(2, 3, 3, 1, 1, rng);
  Tensor<double> x = random_tensor({2, 5, 5}, rng);
  Tensor<double> y = conv.infer(x);
  REQUIRE(y.shape == std::vector<int>{3, 5, 5});

  NamedParams<double> params;
  conv.collect_params("c", params);
  const Tensor<double>& w = params[0].second->value;
  const Tensor<double>& b = params[1].second->value;
  // direct evaluation at a few positions
  for (auto [oc, oy, ox] : {std::array<int, 3>{0, 0, 0}, {1, 2, 3}, {2, 4, 4}}) {
    double acc = b.data[oc];
    for (int ic = 0; ic < 2; ++ic)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const int iy = oy - 1 + ky, ix = ox - 1 + kx;
          if (iy < 0 || iy >= 5 || ix < 0 || ix >= 5) continue;
          acc += w.data[((oc * 2 + ic) * 3 + ky) * 3 + kx] * x.at(ic, iy, ix);
        }
    CHECK_THAT(y.at(oc, oy, ox), Catch::Matchers::WithinAbs(acc, 1e-12));
  }
}

TEST_CASE("layer gradients match finite differences", "[layers][gradcheck]") {
  Rng init(0);
  SECTION("conv stride 1") {
    Conv2d<double> layer(2, 3, 3, 1, 1, init);
    check_layer_gradients(layer, {2, 6, 6}, 11);
  }
  SECTION("conv stride 2") {
    Conv2d<double> layer(3, 4, 4, 2, 1, init);
    check_layer_gradients(layer, {3, 8, 8}, 12);
  }
  SECTION("conv transpose stride 2") {
    ConvTranspose2d<double> layer(3, 2, 3, 2, 1, 1, init);
    check_layer_gradients(layer, {3, 5, 5}, 13);
  }
  SECTION("instance norm") {
    InstanceNorm2d<double> layer(3, false);
    check_layer_gradients(layer, {3, 5, 5}, 14);
  }
  SECTION("instance norm affine") {
    InstanceNorm2d<double> layer(3, true);
    check_layer_gradients(layer, {3, 5, 5}, 15);
  }
  SECTION("relu") {
    ReLU<double> layer;
    check_layer_gradients(layer, {2, 4, 4}, 16);
  }
  SECTION("leaky relu") {
    LeakyReLU<double> layer(0.2);
    check_layer_gradients(layer, {2, 4, 4}, 17);
  }
  SECTION("tanh") {
    Tanh<double> layer;
    check_layer_gradients(layer, {2, 4, 4}, 18);
  }
  SECTION("reflection pad") {
    ReflectionPad2d<double> layer(2);
    check_layer_gradients(layer, {2, 5, 5}, 19);
  }
  SECTION("residual block") {
    ResidualBlock<double> layer(4, init);
    check_layer_gradients(layer, {4, 6, 6}, 20);
  }
}

TEST_CASE("conv transpose doubles spatial size with stride 2", "[layers]") {
  Rng rng(3);
  ConvTranspose2d<double> up(4, 2, 3, 2, 1, 1, rng);
  Tensor<double> x = random_tensor({4, 7, 9}, rng);
  Tensor<double> y = up.infer(x);
  CHECK(y.shape == std::vector<int>{2, 14, 18});
}

TEST_CASE("instance norm output has zero mean unit variance per channel", "[layers]") {
  Rng rng(4);
  InstanceNorm2d<double> norm(2, false);
  Tensor<double> x = random_tensor({2, 8, 8}, rng, -3.0, 5.0);
  Tensor<double> y = norm.infer(x);
  for (int c = 0; c < 2; ++c) {
    double mean = 0.0, var = 0.0;
    for (int i = 0; i < 64; ++i) mean += y.data[c * 64 + i];
    mean /= 64.0;
    for (int i = 0; i < 64; ++i) {
      const double d = y.data[c * 64 + i] - mean;
      var += d * d;
    }
    var /= 64.0;
    CHECK_THAT(mean, Catch::Matchers::WithinAbs(0.0, 1e-9));
    CHECK_THAT(var, Catch::Matchers::WithinAbs(1.0, 1e-3));
  }
}

TEST_CASE("reflection pad mirrors without repeating the edge", "[layers]") {
  ReflectionPad2d<double> pad(1);
  Tensor<double> x({1, 2, 3});
  // rows: [1 2 3; 4 5 6]
  for (int i = 0; i < 6; ++i) x.data[static_cast<std::size_t>(i)] = i + 1;
  Tensor<double> y = pad.infer(x);
  REQUIRE(y.shape == std::vector<int>{1, 4, 5});
  // middle row reflects left/right: [2 1 2 3 2]
  CHECK(y.at(0, 1, 0) == 2.0);
  CHECK(y.at(0, 1, 1) == 1.0);
  CHECK(y.at(0, 1, 4) == 2.0);
  // top row reflects the second row
  CHECK(y.at(0, 0, 1) == 4.0);
}

TEST_CASE("parameter gradients accumulate across passes", "[layers]") {
  Rng rng(5);
  Conv2d<double> conv(1, 1, 3, 1, 1, rng);
  Tensor<double> x = random_tensor({1, 4, 4}, rng);

  NamedParams<double> params;
  conv.collect_params("c", params);
  for (auto& [name, p] : params) p->zero_grad();

  Tape<double> t1, t2;
  Tensor<double> y1 = conv.forward(x, t1);
  Tensor<double> y2 = conv.forward(x, t2);
  Tensor<double> ones(y1.shape, 1.0);
  conv.backward(ones, t2);
  const double after_one = params[0].second->grad.data[0];
  conv.backward(ones, t1);
  CHECK_THAT(params[0].second->grad.data[0], Catch::Matchers::WithinRel(2.0 * after_one, 1e-12));
}
