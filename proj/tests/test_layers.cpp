#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "layer_fd_check.hpp"
#include "meegnet/layers.hpp"
#include "meegnet/rng.hpp"
#include "meegnet/tensor.hpp"

using namespace meegnet;

namespace {

Tensor<double> row_tensor(const std::vector<double>& vals) {
  Tensor<double> x({1, 1, 1, static_cast<int>(vals.size())});
  std::copy(vals.begin(), vals.end(), x.data());
  return x;
}

}  // namespace

TEST_CASE("temporal conv, same padding, even kernel pads right") {
  ConvTemporal<double> conv(1, 1, 2);
  conv.kernels() = {1.0, 1.0};
  auto y = conv.forward(row_tensor({1, 2, 3}), Mode::infer);
  REQUIRE(y.shape() == std::vector<int>{1, 1, 1, 3});
  CHECK(y[0] == 3.0);
  CHECK(y[1] == 5.0);
  CHECK(y[2] == 3.0);
}

TEST_CASE("temporal conv, odd kernel center tap is identity") {
  ConvTemporal<double> conv(1, 1, 3);
  conv.kernels() = {0.0, 1.0, 0.0};
  auto y = conv.forward(row_tensor({4, -1, 7, 2}), Mode::infer);
  CHECK(y[0] == 4.0);
  CHECK(y[1] == -1.0);
  CHECK(y[2] == 7.0);
  CHECK(y[3] == 2.0);
}

TEST_CASE("temporal conv preserves width and multiplies filters") {
  ConvTemporal<float> conv(8, 1, 250);
  Tensor<float> x({2, 1, 16, 500});
  auto y = conv.forward(x, Mode::infer);
  REQUIRE(y.shape() == std::vector<int>{2, 8, 16, 500});
}

TEST_CASE("temporal conv is linear in its input") {
  Rng rng(21);
  ConvTemporal<double> conv(2, 1, 5);
  for (auto& k : conv.kernels()) k = rng.normal();
  auto x1 = testing::random_input({1, 1, 2, 9}, 1);
  auto x2 = testing::random_input({1, 1, 2, 9}, 2);
  const double a = 1.7, b = -0.3;
  Tensor<double> mix(x1.shape());
  for (std::size_t i = 0; i < static_cast<std::size_t>(mix.numel()); ++i)
    mix[i] = a * x1[i] + b * x2[i];
  auto y1 = conv.forward(x1, Mode::infer);
  auto y2 = conv.forward(x2, Mode::infer);
  auto ym = conv.forward(mix, Mode::infer);
  for (std::size_t i = 0; i < static_cast<std::size_t>(ym.numel()); ++i)
    REQUIRE(std::abs(ym[i] - (a * y1[i] + b * y2[i])) < 1e-12);
}

TEST_CASE("temporal conv optional bias shifts every sample") {
  ConvTemporal<double> conv(2, 1, 3, /*with_bias=*/true);
  conv.bias() = {1.5, -2.0};
  auto y = conv.forward(testing::random_input({1, 1, 2, 4}, 3), Mode::infer);
  for (int e = 0; e < 2; ++e)
    for (int t = 0; t < 4; ++t) {
      CHECK(y.at(0, 0, e, t) == 1.5);
      CHECK(y.at(0, 1, e, t) == -2.0);
    }
}

TEST_CASE("temporal conv rejects mismatched channels") {
  ConvTemporal<double> conv(1, 2, 3);
  Tensor<double> x({1, 1, 2, 8});
  REQUIRE_THROWS_AS(conv.forward(x, Mode::infer), ShapeError);
  REQUIRE_THROWS_AS(ConvTemporal<double>(0, 1, 3), ConfigError);
}

TEST_CASE("depthwise conv selects and sums electrode rows") {
  // two input channels, three electrodes, multiplier 1
  DepthwiseConv<double> dw(2, 1, 3);
  REQUIRE(dw.out_channels() == 2);
  Tensor<double> x({1, 2, 3, 2});
  // channel 0 rows: [1,2],[3,4],[5,6]; channel 1 rows: [10,20],[30,40],[50,60]
  double v = 1;
  for (int e = 0; e < 3; ++e)
    for (int t = 0; t < 2; ++t) x.at(0, 0, e, t) = v++;
  for (int e = 0; e < 3; ++e)
    for (int t = 0; t < 2; ++t) x.at(0, 1, e, t) = 10 * (2 * e + t + 1);
  // kernel for channel 0 selects electrode row 1; channel 1 sums all rows
  dw.kernels() = {0, 1, 0, 1, 1, 1};
  auto y = dw.forward(x, Mode::infer);
  REQUIRE(y.shape() == std::vector<int>{1, 2, 1, 2});
  CHECK(y.at(0, 0, 0, 0) == 3.0);
  CHECK(y.at(0, 0, 0, 1) == 4.0);
  CHECK(y.at(0, 1, 0, 0) == 90.0);   // 10+30+50
  CHECK(y.at(0, 1, 0, 1) == 120.0);  // 20+40+60
}

TEST_CASE("depthwise conv multiplier expands channels") {
  DepthwiseConv<double> dw(2, 2, 4);
  REQUIRE(dw.out_channels() == 4);
  Tensor<double> x({3, 2, 4, 5});
  auto y = dw.forward(x, Mode::infer);
  REQUIRE(y.shape() == std::vector<int>{3, 4, 1, 5});
}

TEST_CASE("depthwise conv demands the full electrode extent") {
  DepthwiseConv<double> dw(1, 1, 4);
  Tensor<double> x({1, 1, 3, 5});  // only 3 electrodes, kernel spans 4
  REQUIRE_THROWS_AS(dw.forward(x, Mode::infer), ShapeError);
}

TEST_CASE("separable conv with delta depth kernels and identity mixing is identity") {
  SeparableConv<double> sep(2, 2, 3);
  sep.depth_kernels() = {0, 1, 0, 0, 1, 0};
  sep.point_weights() = {1, 0, 0, 1};
  auto x = testing::random_input({2, 2, 1, 6}, 7);
  auto y = sep.forward(x, Mode::infer);
  REQUIRE(y.shape() == x.shape());
  for (std::size_t i = 0; i < static_cast<std::size_t>(x.numel()); ++i) REQUIRE(y[i] == x[i]);
}

TEST_CASE("separable conv pointwise stage mixes channels") {
  SeparableConv<double> sep(2, 2, 1);
  sep.depth_kernels() = {1, 1};
  sep.point_weights() = {0, 1, 1, 0};  // swap the two channels
  auto x = testing::random_input({1, 2, 1, 4}, 9);
  auto y = sep.forward(x, Mode::infer);
  for (int t = 0; t < 4; ++t) {
    REQUIRE(y.at(0, 0, 0, t) == x.at(0, 1, 0, t));
    REQUIRE(y.at(0, 1, 0, t) == x.at(0, 0, 0, t));
  }
}

TEST_CASE("separable conv requires a collapsed electrode axis") {
  SeparableConv<double> sep(2, 2, 3);
  Tensor<double> x({1, 2, 4, 6});
  REQUIRE_THROWS_AS(sep.forward(x, Mode::infer), ShapeError);
}

TEST_CASE("batch norm infer is the affine map from moving statistics") {
  // gamma=2, beta=1, mean=0, var=1 maps 1 -> 3 as epsilon -> 0
  BatchNorm<double> bn(1, 1e-12);
  bn.gamma() = {2.0};
  bn.beta() = {1.0};
  Tensor<double> x({1, 1, 1, 1});
  x[0] = 1.0;
  auto y = bn.forward(x, Mode::infer);
  REQUIRE(std::abs(y[0] - 3.0) < 1e-9);
}

TEST_CASE("batch norm infer with unit statistics is identity") {
  BatchNorm<double> bn(2, 1e-15);
  auto x = testing::random_input({2, 2, 1, 3}, 4);
  auto y = bn.forward(x, Mode::infer);
  for (std::size_t i = 0; i < static_cast<std::size_t>(x.numel()); ++i)
    REQUIRE(std::abs(y[i] - x[i]) < 1e-12);
}

TEST_CASE("batch norm train on constant input returns beta") {
  BatchNorm<double> bn(1);
  bn.beta() = {0.7};
  Tensor<double> x({2, 1, 1, 4});
  for (std::size_t i = 0; i < 8; ++i) x[i] = 5.0;
  auto y = bn.forward(x, Mode::train);
  for (std::size_t i = 0; i < 8; ++i) REQUIRE(std::abs(y[i] - 0.7) < 1e-15);
}

TEST_CASE("batch norm train normalizes and updates moving statistics") {
  BatchNorm<double> bn(1, 1e-3, 0.99);
  Tensor<double> x({1, 1, 1, 2});
  x[0] = 1.0;
  x[1] = 3.0;  // batch mean 2, biased variance 1
  auto y = bn.forward(x, Mode::train);
  REQUIRE(std::abs(y[0] + y[1]) < 1e-12);  // centered
  REQUIRE(std::abs(bn.moving_mean()[0] - 0.02) < 1e-12);          // 0.99*0 + 0.01*2
  REQUIRE(std::abs(bn.moving_var()[0] - 1.0) < 1e-12);            // 0.99*1 + 0.01*1

  // with gamma=1 the normalized spread is 1/sqrt(1+eps)
  REQUIRE(std::abs((y[1] - y[0]) / 2.0 - 1.0 / std::sqrt(1.0 + 1e-3)) < 1e-12);
}

TEST_CASE("batch norm rejects bad hyperparameters") {
  REQUIRE_THROWS_AS(BatchNorm<double>(1, 0.0), ConfigError);
  REQUIRE_THROWS_AS(BatchNorm<double>(1, -1e-3), ConfigError);
  REQUIRE_THROWS_AS(BatchNorm<double>(1, 1e-3, 1.0), ConfigError);
  REQUIRE_THROWS_AS(BatchNorm<double>(1, 1e-3, 0.0), ConfigError);
}

TEST_CASE("elu values and smoothness") {
  Elu<double> elu;
  Tensor<double> x({1, 1, 1, 5});
  x[0] = 0.0;
  x[1] = 2.0;
  x[2] = -1.0;
  x[3] = 1e-8;
  x[4] = -1e-8;
  auto y = elu.forward(x, Mode::train);
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 2.0);
  CHECK(std::abs(y[2] - (-0.6321205588285576784)) < 1e-15);

  Tensor<double> ones(x.shape());
  for (std::size_t i = 0; i < 5; ++i) ones[i] = 1.0;
  auto d = elu.backward(ones);
  CHECK(d[0] == 1.0);
  CHECK(d[1] == 1.0);
  CHECK(std::abs(d[2] - 0.3678794411714423216) < 1e-15);
  // derivative is continuous through zero
  CHECK(std::abs(d[3] - 1.0) < 1e-7);
  CHECK(std::abs(d[4] - 1.0) < 1e-7);
}

TEST_CASE("average pool worked example and floor semantics") {
  AvgPool<double> pool(4);
  auto y = pool.forward(row_tensor({1, 2, 3, 4}), Mode::infer);
  REQUIRE(y.shape() == std::vector<int>{1, 1, 1, 1});
  CHECK(y[0] == 2.5);

  // the model's two stages: 500 -> 125 -> 15 with remainder 5 dropped
  Tensor<double> wide({1, 1, 1, 500});
  auto p1 = AvgPool<double>(4).forward(wide, Mode::infer);
  REQUIRE(p1.shape().back() == 125);
  auto p2 = AvgPool<double>(8).forward(p1, Mode::infer);
  REQUIRE(p2.shape().back() == 15);

  REQUIRE_THROWS_AS(AvgPool<double>(5).forward(row_tensor({1, 2}), Mode::infer), ShapeError);
  REQUIRE_THROWS_AS(AvgPool<double>(0), ConfigError);
}

TEST_CASE("average pool preserves the mean when the width divides evenly") {
  auto x = testing::random_input({2, 3, 1, 24}, 17);
  AvgPool<double> pool(4);
  auto y = pool.forward(x, Mode::infer);
  for (int b = 0; b < 2; ++b)
    for (int c = 0; c < 3; ++c) {
      double mx = 0, my = 0;
      for (int t = 0; t < 24; ++t) mx += x.at(b, c, 0, t);
      for (int t = 0; t < 6; ++t) my += y.at(b, c, 0, t);
      REQUIRE(std::abs(mx / 24 - my / 6) < 1e-12);
    }
}

TEST_CASE("average pool backward spreads gradient evenly, remainder gets none") {
  AvgPool<double> pool(4);
  auto x = row_tensor({1, 2, 3, 4, 5, 6});  // width 6: one window + remainder 2
  auto y = pool.forward(x, Mode::train);
  REQUIRE(y.shape().back() == 1);
  Tensor<double> g(y.shape());
  g[0] = 1.0;
  auto gi = pool.backward(g);
  for (int t = 0; t < 4; ++t) CHECK(gi[static_cast<std::size_t>(t)] == 0.25);
  CHECK(gi[4] == 0.0);
  CHECK(gi[5] == 0.0);
}

TEST_CASE("dropout train mean stays near one and infer is the bitwise identity") {
  const int n = 100000;
  Tensor<float> x({1, 1, 1, n});
  for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = 1.0f;

  Dropout<float> drop(0.5, 1234);
  auto y = drop.forward(x, Mode::train);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const float v = y[static_cast<std::size_t>(i)];
    REQUIRE((v == 0.0f || v == 2.0f));  // inverted scaling by 1/(1-rate)
    sum += v;
  }
  REQUIRE(std::abs(sum / n - 1.0) < 0.05);

  auto yi = drop.forward(x, Mode::infer);
  for (int i = 0; i < n; ++i) REQUIRE(yi[static_cast<std::size_t>(i)] == x[static_cast<std::size_t>(i)]);
}

TEST_CASE("dropout reseed replays the identical mask") {
  Dropout<double> drop(0.25, 99);
  auto x = testing::random_input({1, 2, 1, 64}, 5);
  auto y1 = drop.forward(x, Mode::train);
  drop.reseed();
  auto y2 = drop.forward(x, Mode::train);
  for (std::size_t i = 0; i < static_cast<std::size_t>(x.numel()); ++i) REQUIRE(y1[i] == y2[i]);
}

TEST_CASE("dropout backward masks gradients exactly like the forward pass") {
  Dropout<double> drop(0.5, 7);
  auto x = testing::random_input({1, 1, 1, 128}, 8);
  auto y = drop.forward(x, Mode::train);
  Tensor<double> g(x.shape());
  for (std::size_t i = 0; i < 128; ++i) g[i] = 1.0;
  auto gi = drop.backward(g);
  for (std::size_t i = 0; i < 128; ++i) {
    if (y[i] == 0.0 && x[i] != 0.0)
      REQUIRE(gi[i] == 0.0);
    else
      REQUIRE(gi[i] == 2.0);
  }
}

TEST_CASE("dropout validates its rate") {
  REQUIRE_THROWS_AS(Dropout<double>(1.0), ConfigError);
  REQUIRE_THROWS_AS(Dropout<double>(-0.1), ConfigError);
  Dropout<double> none(0.0);
  auto x = testing::random_input({1, 1, 1, 8}, 3);
  auto y = none.forward(x, Mode::train);
  for (std::size_t i = 0; i < 8; ++i) REQUIRE(y[i] == x[i]);
}

TEST_CASE("dense sigmoid fixed points") {
  DenseSigmoid<double> dense(240, 16);
  Tensor<double> x({1, 240});
  auto y = dense.forward(x, Mode::infer);  // all-zero weights and input
  for (int o = 0; o < 16; ++o) REQUIRE(y.at(0, o) == 0.5);

  std::fill(dense.bias().begin(), dense.bias().end(), 100.0);
  auto ysat = dense.forward(x, Mode::infer);
  for (int o = 0; o < 16; ++o) REQUIRE(ysat.at(0, o) > 0.9999);

  std::fill(dense.bias().begin(), dense.bias().end(), 0.0);
  std::fill(dense.weights().begin(), dense.weights().end(), 1.0 / 240.0);
  Tensor<double> ones({1, 240});
  for (std::size_t i = 0; i < 240; ++i) ones[i] = 1.0;
  auto ysig = dense.forward(ones, Mode::infer);
  for (int o = 0; o < 16; ++o)
    REQUIRE(std::abs(ysig.at(0, o) - 0.7310585786300048793) < 1e-12);
}

TEST_CASE("dense sigmoid rejects mismatched input") {
  DenseSigmoid<double> dense(10, 2);
  Tensor<double> x({1, 11});
  REQUIRE_THROWS_AS(dense.forward(x, Mode::infer), ShapeError);
}

TEST_CASE("per-layer finite-difference gradients agree below 1e-5") {
  {
    ConvTemporal<double> conv(3, 2, 4, /*with_bias=*/true);
    auto err = testing::layer_fd_max_rel_error(conv, testing::random_input({2, 2, 3, 7}, 11), 101);
    INFO("conv " << err);
    REQUIRE(err < 1e-5);
  }
  {
    DepthwiseConv<double> dw(2, 2, 3);
    auto err = testing::layer_fd_max_rel_error(dw, testing::random_input({2, 2, 3, 5}, 12), 102);
    INFO("depthwise " << err);
    REQUIRE(err < 1e-5);
  }
  {
    SeparableConv<double> sep(3, 2, 4);
    auto err = testing::layer_fd_max_rel_error(sep, testing::random_input({2, 3, 1, 6}, 13), 103);
    INFO("separable " << err);
    REQUIRE(err < 1e-5);
  }
  {
    BatchNorm<double> bn(2);
    auto err = testing::layer_fd_max_rel_error(bn, testing::random_input({3, 2, 2, 4}, 14), 104);
    INFO("batch_norm " << err);
    REQUIRE(err < 1e-5);
  }
  {
    DenseSigmoid<double> dense(5, 2);
    auto err = testing::layer_fd_max_rel_error(dense, testing::random_input({3, 5}, 15), 105);
    INFO("dense " << err);
    REQUIRE(err < 1e-5);
  }
}
