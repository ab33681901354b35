// Copyright 2026 The rftag Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "../support/gradient_suite.hpp"
#include "rftag/autodiff/adam.hpp"
#include "rftag/autodiff/ops.hpp"
#include "rftag/error.hpp"

namespace rftag::ad {
namespace {

using rftag::testing::random_array;

// Direct-summation convolution oracle.
Array<double> naive_conv(const Array<double>& x, const Array<double>& w,
                         Pair stride, Pair pad) {
  const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const auto o = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const auto oh = (h + 2 * pad[0] - kh) / stride[0] + 1;
  const auto ow = (wd + 2 * pad[1] - kw) / stride[1] + 1;
  Array<double> out(Shape{n, o, oh, ow});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t oc = 0; oc < o; ++oc)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          double acc = 0;
          for (std::size_t ic = 0; ic < c; ++ic)
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) {
                const long iy = long(y * stride[0] + i) - long(pad[0]);
                const long ix = long(xx * stride[1] + j) - long(pad[1]);
                if (iy < 0 || ix < 0 || iy >= long(h) || ix >= long(wd))
                  continue;
                acc += x.at(b, ic, iy, ix) * w.at(oc, ic, i, j);
              }
          out.at(b, oc, y, xx) = acc;
        }
  return out;
}

TEST(Conv2d, IdentityKernelReturnsInput) {
  auto x = Tensor<double>::constant(Array<double>({1, 1, 3, 3}, 1.0));
  auto w = Tensor<double>::constant(Array<double>({1, 1, 1, 1}, 1.0));
  auto y = conv2d<double>(nullptr, x, w, {});
  EXPECT_EQ(y.value(), x.value());
}

TEST(Conv2d, OnesKernelSumsWindow) {
  auto x = Tensor<double>::constant(Array<double>({1, 1, 4, 4}, 1.0));
  auto w = Tensor<double>::constant(Array<double>({1, 1, 3, 3}, 1.0));
  auto y = conv2d<double>(nullptr, x, w, {});
  auto expected = naive_conv(x.value(), w.value(), {1, 1}, {0, 0});
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(expected[i], 9.0);
    EXPECT_EQ(y.value()[i], 9.0);
  }
}

TEST(Conv2d, OutputShapeFormula) {
  auto x = Tensor<double>::constant(Array<double>({2, 3, 8, 8}, 0.5));
  auto w = Tensor<double>::constant(Array<double>({4, 3, 3, 3}, 0.1));
  auto y = conv2d<double>(nullptr, x, w, {}, {{2, 2}, {1, 1}});
  EXPECT_EQ(y.shape(), (Shape{2, 4, 4, 4}));
}

TEST(Conv2d, MatchesNaiveOracleWithBias) {
  std::mt19937_64 rng(3);
  auto x = Tensor<double>::constant(random_array({2, 3, 7, 5}, rng));
  auto w = Tensor<double>::constant(random_array({4, 3, 3, 2}, rng));
  auto b = Tensor<double>::constant(random_array({4}, rng));
  auto y = conv2d<double>(nullptr, x, w, b, {{2, 1}, {1, 1}});
  auto expected = naive_conv(x.value(), w.value(), {2, 1}, {1, 1});
  ASSERT_EQ(y.shape(), expected.shape());
  const std::size_t plane = expected.dim(2) * expected.dim(3);
  for (std::size_t i = 0; i < expected.numel(); ++i) {
    const std::size_t oc = (i / plane) % 4;
    EXPECT_NEAR(y.value()[i], expected[i] + b.value()[oc], 1e-12);
  }
}

TEST(Conv2d, ChannelMismatchNamesBothShapes) {
  auto x = Tensor<double>::constant(Array<double>({1, 2, 4, 4}));
  auto w = Tensor<double>::constant(Array<double>({1, 3, 3, 3}));
  try {
    conv2d<double>(nullptr, x, w, {});
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[1x2x4x4]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[1x3x3x3]"), std::string::npos) << msg;
  }
}

TEST(Conv2d, KernelLargerThanPaddedInputRejected) {
  auto x = Tensor<double>::constant(Array<double>({1, 1, 2, 2}));
  auto w = Tensor<double>::constant(Array<double>({1, 1, 5, 1}));
  EXPECT_THROW(conv2d<double>(nullptr, x, w, {}, {{1, 1}, {1, 0}}),
               ValidationError);
}

TEST(Conv2d, IsLinearInInput) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    auto w = Tensor<double>::constant(random_array({3, 2, 3, 3}, rng));
    auto xa = random_array({2, 2, 6, 5}, rng);
    auto xb = random_array({2, 2, 6, 5}, rng);
    const double a = 1.7, b = -0.6;
    Array<double> mixed(xa.shape());
    for (std::size_t i = 0; i < mixed.numel(); ++i) {
      mixed[i] = a * xa[i] + b * xb[i];
    }
    const Conv2dParams p{{2, 1}, {1, 1}};
    auto ym = conv2d<double>(nullptr, Tensor<double>(mixed), w, {}, p);
    auto ya = conv2d<double>(nullptr, Tensor<double>(xa), w, {}, p);
    auto yb = conv2d<double>(nullptr, Tensor<double>(xb), w, {}, p);
    for (std::size_t i = 0; i < ym.numel(); ++i) {
      EXPECT_NEAR(ym.value()[i], a * ya.value()[i] + b * yb.value()[i], 1e-10);
    }
  }
}

TEST(BatchNorm, ConstantChannelNormalizesToZero) {
  Array<double> x({2, 2, 3, 3});
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t i = 0; i < 9; ++i) x.at(b, c, i / 3, i % 3) = c + 4.0;
  auto gamma = Tensor<double>::constant(Array<double>({2}, 1.0));
  auto beta = Tensor<double>::constant(Array<double>({2}, 0.0));
  auto st = BatchNormState<double>::empty(2);
  auto y = batchnorm2d<double>(nullptr, Tensor<double>(x), gamma, beta, st,
                               Mode::kTrain);
  for (double v : y.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(BatchNorm, AffineDefinition) {
  std::mt19937_64 rng(5);
  auto x = random_array({3, 1, 2, 2}, rng);
  double mu = 0, var = 0;
  for (double v : x.data()) mu += v;
  mu /= 12;
  for (double v : x.data()) var += (v - mu) * (v - mu);
  var /= 12;
  auto gamma = Tensor<double>::constant(Array<double>({1}, 2.0));
  auto beta = Tensor<double>::constant(Array<double>({1}, 1.0));
  auto st = BatchNormState<double>::empty(1);
  auto y = batchnorm2d<double>(nullptr, Tensor<double>(x), gamma, beta, st,
                               Mode::kTrain, {.eps = 1e-5});
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_NEAR(y.value()[i], 2 * (x[i] - mu) / std::sqrt(var + 1e-5) + 1,
                1e-12);
  }
}

TEST(BatchNorm, OutputMomentsMatchAffineParameters) {
  std::mt19937_64 rng(9);
  auto x = random_array({2, 3, 4, 4}, rng, -3, 5);
  auto gamma = Tensor<double>::constant(Array<double>({3}, {0.5, 1.5, 2.0}));
  auto beta = Tensor<double>::constant(Array<double>({3}, {-1.0, 0.0, 0.25}));
  auto st = BatchNormState<double>::empty(3);
  auto y = batchnorm2d<double>(nullptr, Tensor<double>(x), gamma, beta, st,
                               Mode::kTrain, {.eps = 1e-12});
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0, var = 0;
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t i = 0; i < 16; ++i) mean += y.value().at(b, c, i / 4, i % 4);
    mean /= 32;
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t i = 0; i < 16; ++i) {
        const double d = y.value().at(b, c, i / 4, i % 4) - mean;
        var += d * d;
      }
    var /= 32;
    EXPECT_NEAR(mean, beta.value()[c], 1e-6);
    EXPECT_NEAR(var, gamma.value()[c] * gamma.value()[c], 1e-4);
  }
}

TEST(BatchNorm, EvalWithoutStatisticsIsAnError) {
  auto x = Tensor<double>::constant(Array<double>({1, 1, 2, 2}, 1.0));
  auto gamma = Tensor<double>::constant(Array<double>({1}, 1.0));
  auto beta = Tensor<double>::constant(Array<double>({1}, 0.0));
  auto st = BatchNormState<double>::empty(1);
  EXPECT_THROW(batchnorm2d<double>(nullptr, x, gamma, beta, st, Mode::kEval),
               ValidationError);
  batchnorm2d<double>(nullptr, x, gamma, beta, st, Mode::kTrain);
  EXPECT_NO_THROW(
      batchnorm2d<double>(nullptr, x, gamma, beta, st, Mode::kEval));
}

TEST(BatchNorm, CumulativeAverageWithoutMomentum) {
  auto gamma = Tensor<double>::constant(Array<double>({1}, 1.0));
  auto beta = Tensor<double>::constant(Array<double>({1}, 0.0));
  auto st = BatchNormState<double>::empty(1);
  for (double v : {1.0, 2.0, 6.0}) {
    auto x = Tensor<double>::constant(Array<double>({1, 1, 1, 2}, {v, v}));
    batchnorm2d<double>(nullptr, x, gamma, beta, st, Mode::kTrain,
                        {.momentum = std::nullopt});
  }
  EXPECT_DOUBLE_EQ(st.running_mean[0], 3.0);
  EXPECT_DOUBLE_EQ(st.running_var[0], 0.0);
}

TEST(Elementwise, ReluAndSigmoidValues) {
  auto x = Tensor<double>::constant(Array<double>({3}, {-1, 0, 2}));
  EXPECT_EQ(relu<double>(nullptr, x).value(), Array<double>({3}, {0, 0, 2}));
  auto z = Tensor<double>::constant(Array<double>({2}, {0, std::log(3.0)}));
  auto s = sigmoid<double>(nullptr, z);
  EXPECT_DOUBLE_EQ(s.value()[0], 0.5);
  EXPECT_NEAR(s.value()[1], 0.75, 1e-15);
}

TEST(Elementwise, SigmoidIsFiniteForLargeInputs) {
  auto z = Tensor<float>::constant(Array<float>({2}, {-1000.f, 1000.f}));
  auto s = sigmoid<float>(nullptr, z);
  EXPECT_EQ(s.value()[0], 0.f);
  EXPECT_EQ(s.value()[1], 1.f);
}

TEST(Pool2d, WindowValues) {
  auto x = Tensor<double>::constant(Array<double>({1, 1, 2, 2}, {1, 2, 3, 4}));
  EXPECT_EQ(pool2d<double>(nullptr, x, PoolKind::kMax).value()[0], 4.0);
  EXPECT_EQ(pool2d<double>(nullptr, x, PoolKind::kAvg).value()[0], 2.5);
  auto c = Tensor<double>::constant(Array<double>({2, 3, 5, 7}, 1.25));
  auto g = pool2d<double>(nullptr, c, PoolKind::kGlobalAvg);
  EXPECT_EQ(g.shape(), (Shape{2, 3, 1, 1}));
  for (double v : g.value().data()) EXPECT_DOUBLE_EQ(v, 1.25);
}

TEST(Pool2d, KernelExceedingExtentRejected) {
  auto x = Tensor<double>::constant(Array<double>({1, 1, 2, 2}));
  EXPECT_THROW(pool2d<double>(nullptr, x, PoolKind::kMax, {{3, 3}, {1, 1}}),
               ValidationError);
}

TEST(Linear, Values) {
  auto x = Tensor<double>::constant(Array<double>({1, 2}, {1, 2}));
  auto w = Tensor<double>::constant(Array<double>({2, 1}, {1, 1}));
  auto b = Tensor<double>::constant(Array<double>({1}, {3}));
  EXPECT_EQ(linear<double>(nullptr, x, w, b).value()[0], 6.0);

  auto eye = Tensor<double>::constant(Array<double>({2, 2}, {1, 0, 0, 1}));
  auto zero = Tensor<double>::constant(Array<double>({2}, 0.0));
  EXPECT_EQ(linear<double>(nullptr, x, eye, zero).value(), x.value());
}

TEST(Linear, MatchesTripleLoop) {
  std::mt19937_64 rng(21);
  auto x = random_array({3, 5}, rng);
  auto w = random_array({5, 2}, rng);
  auto b = random_array({2}, rng);
  auto y = linear<double>(nullptr, Tensor<double>(x), Tensor<double>(w),
                          Tensor<double>(b));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double acc = b[j];
      for (std::size_t k = 0; k < 5; ++k) acc += x[i * 5 + k] * w[k * 2 + j];
      EXPECT_NEAR(y.value()[i * 2 + j], acc, 1e-12);
    }
}

TEST(Linear, ExtentMismatchRejected) {
  auto x = Tensor<double>::constant(Array<double>({1, 3}));
  auto w = Tensor<double>::constant(Array<double>({2, 1}));
  EXPECT_THROW(linear<double>(nullptr, x, w, {}), ValidationError);
}

TEST(BceWithLogits, ClosedForms) {
  auto z0 = Tensor<double>::constant(Array<double>({2, 2}, 0.0));
  auto y = Array<double>({2, 2}, {0, 1, 0.3, 1});
  EXPECT_NEAR(bce_with_logits<double>(nullptr, z0, y).value()[0],
              std::log(2.0), 1e-15);

  auto z10 = Tensor<double>::constant(Array<double>({1, 1}, 10.0));
  EXPECT_NEAR(bce_with_logits<double>(nullptr, z10, Array<double>({1, 1}, 1.0))
                  .value()[0],
              std::log1p(std::exp(-10.0)), 1e-15);
  EXPECT_NEAR(std::log1p(std::exp(-10.0)), 4.54e-5, 1e-7);
}

TEST(BceWithLogits, SymmetricTargetHasZeroGradient) {
  auto z = Tensor<double>::parameter(Array<double>({1, 1}, 0.0));
  Tape<double> tape;
  tape.backward(bce_with_logits(&tape, z, Array<double>({1, 1}, 0.5)));
  EXPECT_EQ(z.grad()[0], 0.0);
}

TEST(BceWithLogits, TargetOutsideUnitIntervalRejected) {
  auto z = Tensor<double>::constant(Array<double>({1, 2}, 0.0));
  EXPECT_THROW(bce_with_logits<double>(nullptr, z, Array<double>({1, 2}, {0, 1.5})),
               ValidationError);
}

TEST(BceWithLogits, NonNegativeAndVanishesAtPerfectPrediction) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    auto z = Tensor<double>::constant(random_array({1, 4}, rng, -40, 40));
    auto y = random_array({1, 4}, rng, 0, 1);
    EXPECT_GE(bce_with_logits<double>(nullptr, z, y).value()[0], 0.0);
  }
  double prev = 1e9;
  for (double z : {2.0, 5.0, 10.0, 20.0, 40.0}) {
    auto zt = Tensor<double>::constant(Array<double>({1, 2}, {z, -z}));
    const double loss =
        bce_with_logits<double>(nullptr, zt, Array<double>({1, 2}, {1, 0}))
            .value()[0];
    EXPECT_LT(loss, prev);
    prev = loss;
  }
  EXPECT_LT(prev, 1e-15);
}

TEST(Backward, SumAndSquare) {
  auto x = Tensor<double>::parameter(Array<double>({2, 3}, 0.7));
  Tape<double> tape;
  tape.backward(sum(&tape, x));
  for (double g : x.grad().data()) EXPECT_EQ(g, 1.0);

  auto v = Tensor<double>::parameter(Array<double>({2}, {1, -2}));
  Tape<double> tape2;
  tape2.backward(sum(&tape2, mul(&tape2, v, v)));
  EXPECT_EQ(v.grad(), Array<double>({2}, {2, -4}));
}

TEST(Backward, RepeatedCallsAccumulate) {
  auto v = Tensor<double>::parameter(Array<double>({2}, {1, -2}));
  Tape<double> tape;
  auto loss = sum(&tape, mul(&tape, v, v));
  tape.backward(loss);
  tape.backward(loss);
  EXPECT_EQ(v.grad(), Array<double>({2}, {4, -8}));
  v.zero_grad();
  tape.backward(loss);
  EXPECT_EQ(v.grad(), Array<double>({2}, {2, -4}));
}

TEST(Backward, NonScalarRejected) {
  auto x = Tensor<double>::parameter(Array<double>({2}, 1.0));
  Tape<double> tape;
  auto y = scale(&tape, x, 2.0);
  EXPECT_THROW(tape.backward(y), ValidationError);
}

TEST(Backward, TapeIsTopologicallyOrdered) {
  auto x = Tensor<double>::parameter(Array<double>({1, 1, 3, 3}, 0.5));
  auto w = Tensor<double>::parameter(Array<double>({1, 1, 3, 3}, 0.1));
  Tape<double> tape;
  auto h = relu(&tape, conv2d(&tape, x, w, {}, {{1, 1}, {1, 1}}));
  auto loss = sum(&tape, add(&tape, h, x));
  ASSERT_EQ(tape.size(), 4u);
  EXPECT_EQ(tape.ops()[0].name, "conv2d");
  EXPECT_EQ(tape.ops()[1].name, "relu");
  EXPECT_EQ(tape.ops()[2].name, "add");
  EXPECT_EQ(tape.ops()[3].name, "sum");
  EXPECT_EQ(tape.ops()[3].output, loss.shared_node());
}

TEST(Backward, NoTapeRecordsNothing) {
  auto x = Tensor<double>::parameter(Array<double>({2}, 1.0));
  auto y = scale<double>(nullptr, x, 3.0);
  EXPECT_FALSE(y.requires_grad());
}

TEST(GradientCheck, EveryOpOverTenSeeds) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    for (const auto& c : rftag::testing::op_gradient_cases(seed)) {
      EXPECT_LT(c.result.max_rel_error, 1e-4)
          << c.name << " seed " << seed;
      EXPECT_GT(c.result.checked, 0u);
    }
  }
}

TEST(GradientCheck, ComposedNetworksOverTenSeeds) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    for (const auto& c : rftag::testing::network_gradient_cases(seed)) {
      EXPECT_LT(c.result.max_rel_error, 1e-4)
          << c.name << " seed " << seed;
    }
  }
}

TEST(GradientCheck, OracleFlagsMismatchedBackwardRule) {
  // mix() with unequal forward/backward weights is deliberately not the
  // derivative of its forward pass; the oracle must notice.
  std::mt19937_64 rng(1);
  auto a = Tensor<double>::parameter(random_array({4}, rng));
  auto b = Tensor<double>::parameter(random_array({4}, rng));
  auto r = rftag::testing::grad_check(
      [&](Tape<double>* t) { return sum(t, mix(t, a, b, 0.2, 0.7)); },
      {a, b});
  EXPECT_GT(r.max_rel_error, 0.1);
}

TEST(Determinism, SameSeedBitIdenticalForward) {
  auto run = [] {
    std::mt19937_64 rng(77);
    auto x = Tensor<float>::constant(
        random_array({2, 3, 9, 8}, rng).cast<float>());
    auto w = Tensor<float>::constant(
        random_array({4, 3, 3, 3}, rng).cast<float>());
    auto h = conv2d<float>(nullptr, x, w, {}, {{1, 1}, {1, 1}});
    return pool2d<float>(nullptr, relu<float>(nullptr, h), PoolKind::kMax)
        .value();
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, ZeroGradientLeavesParamsAndAdvancesStep) {
  auto p = Tensor<double>::parameter(Array<double>({3}, {1, 2, 3}));
  p.mutable_grad().fill(0.0);
  auto st = AdamState<double>::zeros_like(p.shape());
  adam_step(p, st, 1e-3);
  EXPECT_EQ(p.value(), Array<double>({3}, {1, 2, 3}));
  EXPECT_EQ(st.t, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  for (double g : {0.5, -2.0, 3e-2}) {
    auto p = Tensor<double>::parameter(Array<double>({1}, 1.0));
    p.mutable_grad()[0] = g;
    auto st = AdamState<double>::zeros_like(p.shape());
    const double lr = 1e-3;
    adam_step(p, st, lr);
    EXPECT_NEAR(p.value()[0] - 1.0, -lr * (g > 0 ? 1 : -1), 1e-6 * lr);
  }
}

TEST(Adam, IdenticalParamsStayIdentical) {
  auto a = Tensor<float>::parameter(Array<float>({2}, {0.3f, -0.2f}));
  auto b = Tensor<float>::parameter(Array<float>({2}, {0.3f, -0.2f}));
  Adam<float> opt({a, b});
  std::mt19937_64 rng(4);
  std::normal_distribution<float> dist;
  for (int step = 0; step < 50; ++step) {
    for (std::size_t i = 0; i < 2; ++i) {
      const float g = dist(rng);
      a.mutable_grad()[i] = g;
      b.mutable_grad()[i] = g;
    }
    opt.step(1e-2);
  }
  EXPECT_EQ(a.value(), b.value());
  for (const auto& s : opt.states()) {
    for (float v : s.v.data()) EXPECT_GE(v, 0.f);
  }
}

TEST(Adam, NonPositiveLearningRateRejected) {
  auto p = Tensor<double>::parameter(Array<double>({1}, 1.0));
  auto st = AdamState<double>::zeros_like(p.shape());
  EXPECT_THROW(adam_step(p, st, 0.0), ValidationError);
  EXPECT_THROW(adam_step(p, st, -1e-3), ValidationError);
}

}  // namespace
}  // namespace rftag::ad
