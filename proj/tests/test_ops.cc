// Copyright 2026  satconf authors

// See ../COPYING for clarification regarding multiple authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// satconf/tests/test_ops.cc

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "satconf/errors.h"
#include "satconf/gradcheck.h"
#include "satconf/ops.h"
#include "test_util.h"

namespace satconf {
namespace {

using testing::max_abs_diff;
using testing::random_tensor;

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

TEST(TensorTest, BackwardAccumulatesIntoLeaves) {
  Tensor a = Tensor::vec({1.0, 2.0, 3.0}, true);
  Tensor loss = sum(mul(a, a));
  backward(loss);
  EXPECT_DOUBLE_EQ(a.grad()[1], 4.0);
  backward(loss);
  EXPECT_DOUBLE_EQ(a.grad()[1], 8.0);
  a.zero_grad();
  EXPECT_DOUBLE_EQ(a.grad()[2], 0.0);
}

TEST(TensorTest, NoGradGuardRecordsNothing) {
  Tensor a = Tensor::vec({1.0, -2.0}, true);
  {
    NoGradGuard guard;
    Tensor b = tanh(a);
    EXPECT_TRUE(b.is_leaf());
    EXPECT_FALSE(b.requires_grad());
  }
  EXPECT_FALSE(tanh(a).is_leaf());
}

TEST(TensorTest, SharedSubexpressionGetsBothContributions) {
  Tensor a = Tensor::scalar(3.0, true);
  Tensor b = mul(a, a);
  backward(add(b, b));
  EXPECT_DOUBLE_EQ(a.grad()[0], 12.0);
}

TEST(OpsTest, ShapeMismatchThrows) {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({3, 2});
  EXPECT_THROW(add(a, b), DimensionError);
  EXPECT_THROW(linear(a, Tensor::zeros({2, 2})), DimensionError);
  EXPECT_THROW(matmul(a, a), DimensionError);
}

TEST(OpsTest, LinearMatchesLoopOracle) {
  Rng rng(1);
  Tensor x = random_tensor({4, 3}, rng);
  Tensor w = random_tensor({3, 5}, rng);
  Tensor b = random_tensor({5}, rng);
  Tensor y = linear(x, w, b);
  for (int r = 0; r < 4; ++r) {
    for (int j = 0; j < 5; ++j) {
      double acc = 0.0;
      for (int i = 0; i < 3; ++i) acc += x.at(r, i) * w.at(i, j);
      EXPECT_NEAR(y.at(r, j), acc + b.at(j), 1e-12);
    }
  }
}

TEST(OpsTest, LinearParameterCountExample) {
  Tensor w = Tensor::zeros({384, 1536});
  Tensor b = Tensor::zeros({1536});
  EXPECT_EQ(w.numel() + b.numel(), 591360);
}

TEST(OpsTest, SoftmaxRowsSumToOne) {
  Rng rng(2);
  Tensor x = random_tensor({6, 7}, rng, false, 5.0);
  Tensor y = softmax(x, -1);
  for (int r = 0; r < 6; ++r) {
    double s = 0.0, z = 0.0;
    for (int j = 0; j < 7; ++j) z += std::exp(x.at(r, j));
    for (int j = 0; j < 7; ++j) {
      s += y.at(r, j);
      EXPECT_NEAR(y.at(r, j), std::exp(x.at(r, j)) / z, 1e-12);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(OpsTest, SoftmaxAxisZero) {
  Tensor x = Tensor::mat(2, 2, {0.0, 1.0, 0.0, 3.0});
  Tensor y = softmax(x, 0);
  EXPECT_NEAR(y.at(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(y.at(0, 1) + y.at(1, 1), 1.0, 1e-15);
}

TEST(OpsTest, LayerNormMatchesOracle) {
  Rng rng(3);
  Tensor x = random_tensor({3, 8}, rng);
  Tensor g = random_tensor({8}, rng);
  Tensor b = random_tensor({8}, rng);
  Tensor y = layer_norm(x, g, b, 1e-5);
  for (int r = 0; r < 3; ++r) {
    double mu = 0.0, var = 0.0;
    for (int j = 0; j < 8; ++j) mu += x.at(r, j) / 8.0;
    for (int j = 0; j < 8; ++j) var += (x.at(r, j) - mu) * (x.at(r, j) - mu) / 8.0;
    for (int j = 0; j < 8; ++j) {
      EXPECT_NEAR(y.at(r, j), (x.at(r, j) - mu) / std::sqrt(var + 1e-5) * g.at(j) + b.at(j),
                  1e-12);
    }
  }
}

TEST(OpsTest, LayerNormOfConstantRowIsBeta) {
  Tensor x = Tensor::mat(1, 4, {0.7, 0.7, 0.7, 0.7});
  Tensor y = layer_norm(x, Tensor::full({4}, 2.0), Tensor::vec({1, 2, 3, 4}));
  EXPECT_EQ(y.at(0, 2), 3.0);
}

TEST(OpsTest, CrossEntropyMatchesLogSoftmax) {
  Rng rng(4);
  Tensor x = random_tensor({5, 4}, rng);
  std::vector<int32_t> labels = {0, 3, 1, 1, 2};
  double want = 0.0;
  for (int r = 0; r < 5; ++r) {
    double z = 0.0;
    for (int j = 0; j < 4; ++j) z += std::exp(x.at(r, j));
    want -= x.at(r, labels[static_cast<size_t>(r)]) - std::log(z);
  }
  EXPECT_NEAR(cross_entropy(x, labels).item(), want, 1e-12);
  EXPECT_NEAR(cross_entropy(x, labels, 0.5).item(), 0.5 * want, 1e-12);
}

TEST(OpsTest, CrossEntropyRejectsBadLabel) {
  std::vector<int32_t> labels = {4};
  EXPECT_THROW(cross_entropy(Tensor::zeros({1, 4}), labels), UsageError);
}

TEST(OpsTest, Conv2dMatchesLoopOracle) {
  Rng rng(5);
  const int T = 7, F = 5, ci = 2, co = 3, st = 3, sf = 2;
  Tensor x = random_tensor({T, F, ci}, rng);
  Tensor k = random_tensor({3, 3, ci, co}, rng);
  Tensor b = random_tensor({co}, rng);
  Padding2d pad{1, 1, 1, 1};
  Tensor y = conv2d(x, k, b, st, sf, pad);
  const int to = (T + 2 - 3) / st + 1, fo = (F + 2 - 3) / sf + 1;
  ASSERT_EQ(y.shape(), (Shape{to, fo, co}));
  auto xv = [&](int t, int f, int c) {
    if (t < 0 || t >= T || f < 0 || f >= F) return 0.0;
    return x.data()[static_cast<size_t>((t * F + f) * ci + c)];
  };
  for (int t = 0; t < to; ++t)
    for (int f = 0; f < fo; ++f)
      for (int o = 0; o < co; ++o) {
        double acc = b.at(o);
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            for (int c = 0; c < ci; ++c)
              acc += xv(t * st + i - 1, f * sf + j - 1, c) *
                     k.data()[static_cast<size_t>(((i * 3 + j) * ci + c) * co + o)];
        EXPECT_NEAR(y.data()[static_cast<size_t>((t * fo + f) * co + o)], acc, 1e-12);
      }
}

TEST(OpsTest, TransposedConvMatchesScatterOracle) {
  Rng rng(6);
  const int T = 4, ci = 3, co = 2, k = 3, s = 3;
  Tensor x = random_tensor({T, ci}, rng);
  Tensor w = random_tensor({k, ci, co}, rng);
  Tensor b = random_tensor({co}, rng);
  Tensor y = transposed_conv1d(x, w, b, s);
  const int out = (T - 1) * s + k;
  ASSERT_EQ(y.shape(), (Shape{out, co}));
  std::vector<double> want(static_cast<size_t>(out * co), 0.0);
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < k; ++j)
      for (int c = 0; c < ci; ++c)
        for (int o = 0; o < co; ++o)
          want[static_cast<size_t>((t * s + j) * co + o)] +=
              x.at(t, c) * w.data()[static_cast<size_t>((j * ci + c) * co + o)];
  for (int u = 0; u < out; ++u)
    for (int o = 0; o < co; ++o)
      EXPECT_NEAR(y.at(u, o), want[static_cast<size_t>(u * co + o)] + b.at(o), 1e-12);
}

TEST(OpsTest, DepthwiseConvMatchesOracle) {
  Rng rng(7);
  const int T = 6, d = 3, k = 5;
  Tensor x = random_tensor({T, d}, rng);
  Tensor w = random_tensor({k, d}, rng);
  Tensor y = depthwise_conv1d(x, w);
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < d; ++c) {
      double acc = 0.0;
      for (int j = 0; j < k; ++j) {
        const int src = t + j - k / 2;
        if (src >= 0 && src < T) acc += x.at(src, c) * w.at(j, c);
      }
      EXPECT_NEAR(y.at(t, c), acc, 1e-12);
    }
}

TEST(OpsTest, GluHalves) {
  Tensor x = Tensor::mat(1, 4, {1.0, 2.0, 0.0, -1.0});
  Tensor y = glu(x);
  EXPECT_NEAR(y.at(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(y.at(0, 1), 2.0 * sig(-1.0), 1e-15);
}

TEST(OpsTest, RelShiftIndexing) {
  const int T = 4;
  std::vector<double> v;
  for (int i = 0; i < T; ++i)
    for (int m = 0; m < 2 * T - 1; ++m) v.push_back(100.0 * i + m);
  Tensor s = rel_shift(Tensor::mat(T, 2 * T - 1, v));
  for (int i = 0; i < T; ++i)
    for (int j = 0; j < T; ++j) EXPECT_EQ(s.at(i, j), 100.0 * i + (i - j + T - 1));
}

TEST(OpsTest, LstmMatchesStepOracle) {
  Rng rng(8);
  const int T = 4, din = 3, h = 2;
  Tensor x = random_tensor({T, din}, rng);
  LstmParams p{random_tensor({din, 4 * h}, rng), random_tensor({h, 4 * h}, rng),
               random_tensor({4 * h}, rng)};
  for (bool reverse : {false, true}) {
    Tensor y = lstm(x, p, reverse);
    std::vector<double> hp(h, 0.0), cp(h, 0.0);
    for (int s = 0; s < T; ++s) {
      const int t = reverse ? T - 1 - s : s;
      std::vector<double> a(4 * h);
      for (int j = 0; j < 4 * h; ++j) {
        a[j] = p.b.at(j);
        for (int i = 0; i < din; ++i) a[j] += x.at(t, i) * p.w_x.at(i, j);
        for (int i = 0; i < h; ++i) a[j] += hp[i] * p.w_h.at(i, j);
      }
      for (int i = 0; i < h; ++i) {
        cp[i] = sig(a[h + i]) * cp[i] + sig(a[i]) * std::tanh(a[2 * h + i]);
        hp[i] = sig(a[3 * h + i]) * std::tanh(cp[i]);
        EXPECT_NEAR(y.at(t, i), hp[i], 1e-12);
      }
    }
  }
}

TEST(OpsTest, ThresholdZeroAndWeightedRowAdd) {
  Tensor w = Tensor::vec({0.39, 0.4, 0.9});
  Tensor t = threshold_zero(w, 0.4);
  EXPECT_EQ(t.at(0), 0.0);
  EXPECT_EQ(t.at(1), 0.4);
  Tensor z = Tensor::mat(3, 2, {1e-300, -0.0, 1, 2, 3, 4});
  Tensor c = Tensor::vec({1.0, 1.0});
  Tensor out = weighted_row_add(z, t, c);
  EXPECT_EQ(out.at(0, 0), 1e-300);
  EXPECT_TRUE(std::signbit(out.at(0, 1)));
  EXPECT_NEAR(out.at(2, 1), 4.9, 1e-15);
}

TEST(OpsTest, DropoutIdentityAtEval) {
  Rng rng(9);
  Tensor x = random_tensor({3, 3}, rng);
  EXPECT_EQ(dropout(x, 0.5, &rng, false).impl(), x.impl());
  Rng a(1), b(1);
  EXPECT_TRUE(testing::bit_equal(dropout(x, 0.5, &a, true), dropout(x, 0.5, &b, true)));
}

// Gradient checks on a few instances per op; the acceptance suite runs the
// full battery.
class GradTest : public ::testing::Test {
 protected:
  void expect_ok(const TensorFn& f, const std::vector<Tensor>& in) {
    GradCheckResult r = grad_check(f, in);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
    EXPECT_GT(r.coordinates, 0);
  }
  Rng rng_{42};
};

TEST_F(GradTest, Elementwise) {
  Tensor x = random_tensor({3, 4}, rng_);
  Tensor y = random_tensor({3, 4}, rng_);
  expect_ok([](auto& v) { return sigmoid(v[0]); }, {x});
  expect_ok([](auto& v) { return tanh(v[0]); }, {x});
  expect_ok([](auto& v) { return swish(v[0]); }, {x});
  expect_ok([](auto& v) { return mul(v[0], add(v[1], v[0])); }, {x, y});
  expect_ok([](auto& v) { return sub(scale(v[0], 3.0), v[1]); }, {x, y});
}

TEST_F(GradTest, LinearSoftmaxLayerNorm) {
  Tensor x = random_tensor({3, 4}, rng_);
  Tensor w = random_tensor({4, 5}, rng_);
  Tensor b = random_tensor({5}, rng_);
  Tensor g = random_tensor({4}, rng_);
  Tensor beta = random_tensor({4}, rng_);
  expect_ok([](auto& v) { return linear(v[0], v[1], v[2]); }, {x, w, b});
  expect_ok([](auto& v) { return softmax(v[0], -1); }, {x});
  expect_ok([](auto& v) { return softmax(v[0], 0); }, {x});
  expect_ok([](auto& v) { return layer_norm(v[0], v[1], v[2]); }, {x, g, beta});
  expect_ok([](auto& v) { return matmul_nt(v[0], v[1]); }, {x, random_tensor({2, 4}, rng_)});
  std::vector<int32_t> labels = {1, 0, 4};
  expect_ok([&](auto& v) { return cross_entropy(linear(v[0], v[1]), labels); }, {x, w});
}

TEST_F(GradTest, Convolutions) {
  Tensor x = random_tensor({5, 3}, rng_);
  expect_ok([](auto& v) { return depthwise_conv1d(v[0], v[1], v[2]); },
            {x, random_tensor({3, 3}, rng_), random_tensor({3}, rng_)});
  expect_ok([](auto& v) { return conv1d(v[0], v[1], v[2], 2); },
            {x, random_tensor({3, 3, 2}, rng_), random_tensor({2}, rng_)});
  expect_ok([](auto& v) { return conv2d(v[0], v[1], v[2], 3, 2, Padding2d{1, 1, 1, 1}); },
            {random_tensor({5, 4, 2}, rng_), random_tensor({3, 3, 2, 2}, rng_),
             random_tensor({2}, rng_)});
  expect_ok([](auto& v) { return transposed_conv1d(v[0], v[1], v[2], 3); },
            {x, random_tensor({3, 3, 2}, rng_), random_tensor({2}, rng_)});
  expect_ok([](auto& v) { return glu(v[0]); }, {random_tensor({3, 4}, rng_)});
}

TEST_F(GradTest, LstmAndPlumbing) {
  Tensor x = random_tensor({4, 3}, rng_);
  LstmParams f{random_tensor({3, 8}, rng_), random_tensor({2, 8}, rng_), random_tensor({8}, rng_)};
  LstmParams b{random_tensor({3, 8}, rng_), random_tensor({2, 8}, rng_), random_tensor({8}, rng_)};
  expect_ok(
      [](auto& v) {
        const LstmParams p[] = {{v[1], v[2], v[3]}, {v[4], v[5], v[6]}};
        return lstm_layer(v[0], p, LstmDirection::kBidirectional);
      },
      {x, f.w_x, f.w_h, f.b, b.w_x, b.w_h, b.b});
  expect_ok([](auto& v) { return rel_shift(v[0]); }, {random_tensor({3, 5}, rng_)});
  expect_ok(
      [](auto& v) {
        const Tensor rows[] = {slice_rows(v[0], 0, 2), slice_rows(v[0], 1, 3)};
        const Tensor cols[] = {slice_cols(v[0], 1, 2), v[0]};
        return add(sum(concat_rows(rows)), sum(mul(concat_cols(cols), concat_cols(cols))));
      },
      {x});
  expect_ok([](auto& v) { return weighted_sum_rows(v[0], v[1]); }, {x, random_tensor({4}, rng_)});
  expect_ok([](auto& v) { return mean_rows(v[0]); }, {x});
  expect_ok([](auto& v) { return broadcast_rows(v[0], 3); }, {random_tensor({2}, rng_)});
}

TEST(GradCheckTest, DetectsWrongGradient) {
  // A deliberately broken op: forward x^2, backward claims 3x.
  auto broken = [](const std::vector<Tensor>& v) {
    TensorImpl* xi = v[0].impl();
    std::vector<double> y;
    for (double x : v[0].data()) y.push_back(x * x);
    return detail::make_result(v[0].shape(), y, "broken", {v[0].impl_ptr()},
                               [xi](std::span<const double> g) {
                                 double* gx = xi->grad_buffer();
                                 for (size_t i = 0; i < g.size(); ++i) gx[i] += 3.0 * xi->data[i] * g[i];
                               });
  };
  Rng rng(3);
  GradCheckResult r = grad_check(broken, {random_tensor({4}, rng)});
  EXPECT_GT(r.max_rel_error, 0.1);
}

}  // namespace
}  // namespace satconf
