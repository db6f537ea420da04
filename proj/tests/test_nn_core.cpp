// Copyright 2026 The phasefuse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "doctest.h"
#include "checks.hpp"
#include "oracles.hpp"

#include "phasefuse/nn/adam.hpp"
#include "phasefuse/nn/grad_check.hpp"

#include <cmath>

using namespace phasefuse;
using namespace phasefuse::nn;

namespace {

Tensor4<double> randn(Index n, Index c, Index h, Index w, std::uint64_t seed, double mean = 0.0) {
  Rng rng(seed);
  Tensor4<double> t(n, c, h, w);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = rng.normal(mean, 1.0);
  return t;
}

void randomize(Module<double>& m, std::uint64_t seed) {
  Rng rng(seed);
  m.reset_parameters(rng);
}

double max_abs_diff(const Tensor4<double>& a, const Tensor4<double>& b) {
  REQUIRE(a.shape() == b.shape());
  return (a.data() - b.data()).cwiseAbs().maxCoeff();
}

GradCheckReport fd(Module<double>& m, const Tensor4<double>& x) {
  GradCheckOptions opt;
  opt.coords_per_tensor = 1000;
  return grad_check_module(m, x, opt);
}

// Per-channel mean and population variance.
std::pair<Vector, Vector> channel_stats(const Tensor4<double>& y) {
  Vector mean = Vector::Zero(y.c()), var = Vector::Zero(y.c());
  const double count = double(y.n() * y.plane_size());
  for (Index c = 0; c < y.c(); ++c) {
    for (Index n = 0; n < y.n(); ++n) mean[c] += y.plane(n, c).sum();
    mean[c] /= count;
    for (Index n = 0; n < y.n(); ++n) var[c] += (y.plane(n, c).array() - mean[c]).square().sum();
    var[c] /= count;
  }
  return {mean, var};
}

}  // namespace

TEST_CASE("conv2d: 1x1 identity kernel reproduces the input") {
  Conv2d<double> conv(1, 1, pointwise());
  conv.weight().value.setOnes();
  const auto x = randn(2, 1, 4, 5, 1);
  CHECK(max_abs_diff(conv.forward(x, Mode::eval), x) == 0.0);
}

TEST_CASE("conv2d: all-ones 3x3 kernel on ones gives 9 in the interior") {
  Conv2d<double> conv(1, 1, same3x3());
  conv.weight().value.setOnes();
  Tensor4<double> x(1, 1, 5, 5);
  x.data().setOnes();
  const auto y = conv.forward(x, Mode::eval);
  CHECK(y(0, 0, 2, 2) == 9.0);
  CHECK(y(0, 0, 0, 0) == 4.0);
}

TEST_CASE("conv2d: matches the six-loop reference") {
  struct Case {
    int cin, cout, kh, kw, sh, sw, ph, pw;
    Index h, w;
  };
  const Case cases[] = {{2, 3, 3, 3, 1, 1, 1, 1, 7, 6}, {3, 2, 3, 3, 1, 2, 1, 1, 5, 9}, {1, 4, 3, 1, 2, 1, 1, 0, 8, 5},
                        {2, 2, 1, 1, 1, 1, 0, 0, 4, 4}, {1, 1, 5, 3, 2, 3, 2, 1, 9, 11}};
  std::uint64_t seed = 10;
  for (const auto& c : cases) {
    ConvGeometry g{c.kh, c.kw, c.sh, c.sw, c.ph, c.pw};
    Conv2d<double> conv(c.cin, c.cout, g, true);
    randomize(conv, seed);
    const auto x = randn(2, c.cin, c.h, c.w, ++seed);
    const std::vector<double> w(conv.weight().value.data(), conv.weight().value.data() + conv.weight().size());
    const std::vector<double> b(conv.bias().value.data(), conv.bias().value.data() + conv.bias().size());
    const auto want = oracle::conv2d_direct(x, w, b, c.cout, c.kh, c.kw, c.sh, c.sw, c.ph, c.pw);
    CHECK(max_abs_diff(conv.forward(x, Mode::eval), want) < 1e-12);
  }
}

TEST_CASE("conv2d: backward") {
  Conv2d<double> conv(3, 2, same3x3(), true);
  randomize(conv, 3);
  const auto x = randn(2, 3, 5, 5, 4);
  const auto y = conv.forward(x, Mode::train);

  SUBCASE("zero upstream gradient gives zero gradients") {
    zero_grad(conv);
    const auto gx = conv.backward(Tensor4<double>(y.shape()));
    CHECK(gx.data().isZero(0.0));
    CHECK(conv.weight().grad.isZero(0.0));
    CHECK(conv.bias().grad.isZero(0.0));
  }
  SUBCASE("bias gradient is the per-channel sum of the upstream gradient") {
    zero_grad(conv);
    const auto g = randn(2, 2, 5, 5, 5);
    conv.backward(g);
    for (Index c = 0; c < 2; ++c) {
      const double want = g.plane(0, c).sum() + g.plane(1, c).sum();
      CHECK(conv.bias().grad[c] == doctest::Approx(want).epsilon(1e-14));
    }
  }
  SUBCASE("finite differences") {
    CHECK(fd(conv, x).max_rel_error < 1e-6);
  }
}

TEST_CASE("batchnorm: training output is standardized, then affine") {
  BatchNorm2d<double> bn(3);
  const auto x = randn(4, 3, 5, 6, 6, 2.0);
  auto [m, v] = channel_stats(bn.forward(x, Mode::train));
  CHECK(m.cwiseAbs().maxCoeff() < 1e-6);
  CHECK((v.array() - 1.0).abs().maxCoeff() < 1e-4);  // eps = 1e-5 shrinks the variance slightly

  bn.gamma().value.setConstant(2.0);
  bn.beta().value.setConstant(3.0);
  std::tie(m, v) = channel_stats(bn.forward(x, Mode::train));
  CHECK((m.array() - 3.0).abs().maxCoeff() < 1e-6);
  CHECK((v.array().sqrt() - 2.0).abs().maxCoeff() < 1e-4);
}

TEST_CASE("batchnorm: running statistics and eval mode") {
  BatchNorm2d<double> bn(2);
  const auto x = randn(3, 2, 4, 4, 7, 5.0);
  bn.forward(x, Mode::train);
  CHECK(bn.running_mean()[0] == doctest::Approx(0.1 * channel_stats(x).first[0]));
  const auto y = bn.forward(x, Mode::eval);
  CHECK(y.shape() == x.shape());
  Tensor4<double> tiny(1, 2, 1, 1);
  CHECK_THROWS_AS(bn.forward(tiny, Mode::train), DataError);
}

TEST_CASE("batchnorm: finite differences") {
  BatchNorm2d<double> bn(3);
  bn.gamma().value << 1.5, 0.7, -1.1;
  bn.beta().value << 0.1, -0.2, 0.3;
  CHECK(fd(bn, randn(2, 3, 4, 5, 8)).max_rel_error < 1e-5);
}

TEST_CASE("adaptive pool: identity, 513 to 60, constants") {
  const auto x = randn(2, 1, 3, 7, 9);
  AdaptiveAvgPool2d<double> same(3, 7);
  CHECK(max_abs_diff(same.forward(x, Mode::eval), x) == 0.0);
  AdaptiveAvgPool2d<double> lfcc(-1, 60);
  Tensor4<double> wide(1, 1, 400, 513);
  wide.data().setConstant(2.5);
  const auto y = lfcc.forward(wide, Mode::eval);
  CHECK(y.shape() == Shape4{1, 1, 400, 60});
  CHECK((y.data().array() - 2.5).abs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(AdaptiveAvgPool2d<double>(-1, 0), ConfigError);
  AdaptiveAvgPool2d<double> grow(-1, 8);
  CHECK_THROWS_AS(grow.forward(x, Mode::eval), DataError);
}

TEST_CASE("pointwise layers") {
  Tensor4<double> x(1, 3, 1, 1);
  x.data() << -1.0, 0.0, 2.0;
  ReLU<double> relu;
  const auto r = relu.forward(x, Mode::eval);
  CHECK(r.data() == (Vector(3) << 0.0, 0.0, 2.0).finished());
  Sigmoid<double> sig;
  Tensor4<double> z(1, 1, 1, 1);
  CHECK(sig.forward(z, Mode::eval).data()[0] == 0.5);
  Linear<double> fc(3, 3);
  const Matrix eye = Matrix::Identity(3, 3);
  fc.weight().value = Eigen::Map<const Vector>(eye.data(), 9);
  CHECK(max_abs_diff(fc.forward(x, Mode::eval), x) == 0.0);
}

TEST_CASE("se block: saturated gate is the identity; gate sees channel means only") {
  SEBlock<double> se(4, 2);
  se.fc2().bias().value.setConstant(50.0);  // sigmoid(50) rounds to 1
  const auto x = randn(2, 4, 3, 3, 11);
  CHECK(max_abs_diff(se.forward(x, Mode::eval), x) == 0.0);

  randomize(se, 12);
  auto a = x, b = x;
  for (Index n = 0; n < 2; ++n) {
    for (Index c = 0; c < 4; ++c) {
      const double mean = x.plane(n, c).mean();
      a.plane(n, c).setConstant(mean);
      b.plane(n, c).setConstant(mean);
      b(n, c, 0, 0) += 1.0;  // same mean, different layout
      b(n, c, 1, 1) -= 1.0;
    }
  }
  se.forward(a, Mode::eval);
  const Tensor4<double> gate_a = se.last_gate();
  se.forward(b, Mode::eval);
  CHECK(max_abs_diff(gate_a, se.last_gate()) < 1e-15);
}

TEST_CASE("se block: finite differences") {
  SEBlock<double> se(8, 4);
  randomize(se, 13);
  CHECK(fd(se, randn(2, 8, 3, 4, 14)).max_rel_error < 1e-5);
}

TEST_CASE("res2net: zero convolutions leave the residual path") {
  Res2NetBlock<double> block(8, 8, 4, 4);
  randomize(block, 15);
  auto coll = collect_all(block);
  for (auto& p : coll.params) {
    if (p.name.find("conv.weight") != std::string::npos || p.name.find("se.") != std::string::npos) {
      p.param->value.setZero();
    }
  }
  auto x = randn(2, 8, 5, 5, 16);
  x.data() = x.data().cwiseAbs();
  CHECK(max_abs_diff(block.forward(x, Mode::train), x) == 0.0);
  CHECK(block.se().last_gate().data().isConstant(0.5));
}

TEST_CASE("res2net: matches an explicit split-transform-merge with tied weights") {
  for (Index s : {2, 3, 4}) {
    Res2NetBlock<double> block(12, 12, s, 4);
    randomize(block, 17 + s);
    const auto x = randn(2, 12, 5, 4, 18);
    const auto got = block.forward(x, Mode::train);

    const Index gw = 12 / s;
    const auto r = block.reduce().forward(x, Mode::train);
    Tensor4<double> cat(r.shape()), prev;
    for (Index i = 0; i < s; ++i) {
      Tensor4<double> xi(2, gw, 5, 4);
      for (Index n = 0; n < 2; ++n) {
        for (Index c = 0; c < gw; ++c) xi.plane(n, c) = r.plane(n, i * gw + c);
      }
      Tensor4<double> yi = xi;
      if (i + 1 < s) {
        if (i > 0) xi.data() += prev.data();
        yi = block.unit(static_cast<std::size_t>(i)).forward(xi, Mode::train);
        prev = yi;
      }
      for (Index n = 0; n < 2; ++n) {
        for (Index c = 0; c < gw; ++c) cat.plane(n, i * gw + c) = yi.plane(n, c);
      }
    }
    auto want = block.se().forward(block.expand().forward(cat, Mode::train), Mode::train);
    want.data() = (want.data() + x.data()).cwiseMax(0.0);
    CHECK(max_abs_diff(got, want) < 1e-12);
  }
}

TEST_CASE("res2net: shape preserved for every valid width and scale") {
  for (Index w : {4, 6, 8, 12, 16}) {
    for (Index s = 2; s <= w; ++s) {
      if (w % s) continue;
      Res2NetBlock<double> block(10, w, s, 4);
      randomize(block, 19);
      CHECK(block.forward(randn(2, 10, 3, 5, 20), Mode::train).shape() == Shape4{2, 10, 3, 5});
    }
  }
  CHECK_THROWS_AS(Res2NetBlock<double>(8, 6, 4, 4), ConfigError);
  CHECK_THROWS_AS(Res2NetBlock<double>(8, 8, 1, 4), ConfigError);
}

TEST_CASE("res2net: finite differences on 2x8x6x6") {
  Res2NetBlock<double> block(8, 8, 4, 4);
  randomize(block, 21);
  CHECK(fd(block, randn(2, 8, 6, 6, 22)).max_rel_error < 1e-5);
}

TEST_CASE("softmax cross-entropy") {
  Tensor4<double> z(2, 2, 1, 1);
  const std::vector<int> labels{0, 1};
  CHECK(softmax_xent<double>(z, labels, nullptr) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  Tensor4<double> sat(1, 2, 1, 1);
  sat.data() << -30.0, 30.0;
  const std::vector<int> bona{1};
  CHECK(softmax_xent<double>(sat, bona, nullptr) < 1e-20);

  // Finite differences on random logits.
  auto logits = randn(3, 2, 1, 1, 23);
  const std::vector<int> y{1, 0, 1};
  Tensor4<double> grad;
  softmax_xent<double>(logits, y, &grad);
  for (Index i = 0; i < logits.size(); ++i) {
    const double orig = logits.data()[i], eps = 1e-5;
    logits.data()[i] = orig + eps;
    const double up = softmax_xent<double>(logits, y, nullptr);
    logits.data()[i] = orig - eps;
    const double down = softmax_xent<double>(logits, y, nullptr);
    logits.data()[i] = orig;
    const double numeric = (up - down) / (2 * eps);
    CHECK(std::abs(numeric - grad.data()[i]) / std::max(std::abs(numeric), 1e-7) < 1e-8);
  }
  CHECK_THROWS_AS(softmax_xent<double>(z, std::vector<int>{0, 2}, nullptr), DataError);
}

TEST_CASE("adam: first step, zero gradient, elementwise independence") {
  Parameter<double> p({3});
  p.value.setOnes();
  p.grad.setOnes();
  std::vector<ParamRef<double>> params{{"p", &p}};
  auto st = make_adam(params, AdamConfig{});
  adam_step(params, st);
  // First step moves every coordinate by about lr against the sign.
  CHECK(p.value[0] == doctest::Approx(0.999).epsilon(1e-9));
  CHECK(p.value[0] == p.value[1]);
  CHECK(p.value[1] == p.value[2]);

  Parameter<double> q({2});
  q.value << 0.3, -0.4;
  std::vector<ParamRef<double>> qs{{"q", &q}};
  AdamConfig no_wd;
  no_wd.weight_decay = 0.0;
  auto sq = make_adam(qs, no_wd);
  for (int i = 0; i < 5; ++i) adam_step(qs, sq);
  CHECK(q.value == (Vector(2) << 0.3, -0.4).finished());

  AdamConfig bad;
  bad.beta1 = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("grad check: linear layer is exact to 1e-9") {
  Linear<double> fc(6, 4);
  randomize(fc, 24);
  CHECK(fd(fc, randn(3, 6, 1, 1, 25)).max_rel_error < 1e-9);
}

TEST_CASE("grad check: every layer type and the mutation control") {
  for (const auto& c : oracle::layer_grad_checks(3)) {
    INFO(c.name << " worst at " << c.detail);
    CHECK(c.value < oracle::kGradCheckTol);
  }
  CHECK(oracle::mutation_control(3).value > oracle::kMutationFloor);
}

TEST_CASE("parameter counts") {
  Conv2d<double> conv(1, 4, same3x3(), true);
  CHECK(param_count(conv) == 40);
  Sequential<double> empty;
  CHECK(param_count(empty) == 0);
}
