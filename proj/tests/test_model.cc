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

// satconf/tests/test_model.cc

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "satconf/errors.h"
#include "satconf/gradcheck.h"
#include "satconf/model.h"
#include "test_util.h"

namespace satconf {
namespace {

using testing::bit_equal;
using testing::random_tensor;

ModelConfig tiny_config() {
  ModelConfig c = desk_model_config();
  c.num_blocks = 2;
  c.att_dim = 4;
  c.num_heads = 2;
  c.ffn_dim = 8;
  c.conv_kernel = 3;
  c.feature_dim = 5;
  c.num_output_classes = 3;
  c.vgg_channels = {2, 2};
  c.dropout = 0.0;
  return c;
}

void zero_out(Tensor t) {
  for (double& v : t.mutable_data()) v = 0.0;
}

void randomize(const AcousticModel& m, Rng& rng) {
  for (const auto& [name, t] : m.parameters()) {
    Tensor h = t;
    for (double& v : h.mutable_data()) v = 0.5 * rng.normal();
  }
}

ModuleOptions opts(int heads, PosEncoding pos) {
  ModuleOptions o;
  o.num_heads = heads;
  o.pos_encoding = pos;
  return o;
}

TEST(ModulesTest, ZeroWeightsGiveResidualIdentity) {
  ModelConfig c = tiny_config();
  AcousticModel m(c, 1);
  Rng rng(2);
  randomize(m, rng);
  BlockParams p = m.blocks()[0];
  Tensor x = random_tensor({6, 4}, rng, false);
  const ModuleOptions o = opts(2, PosEncoding::kRelative);

  zero_out(p.ffn1.lin1.w);
  zero_out(p.ffn1.lin1.b);
  zero_out(p.ffn1.lin2.w);
  zero_out(p.ffn1.lin2.b);
  EXPECT_TRUE(bit_equal(ffn_module(x, p.ffn1, o), x));

  zero_out(p.conv1.pw_out.w);
  zero_out(p.conv1.pw_out.b);
  EXPECT_TRUE(bit_equal(conv_module(x, p.conv1, o), x));

  zero_out(p.mhsa.out.w);
  zero_out(p.mhsa.out.b);
  EXPECT_TRUE(bit_equal(mhsa_module(x, p.mhsa, o).output, x));

  for (auto* f : {&p.ffn2}) {
    zero_out(f->lin2.w);
    zero_out(f->lin2.b);
  }
  zero_out(p.conv2.pw_out.w);
  zero_out(p.conv2.pw_out.b);
  BlockOutput out = conformer_block(x, p, o, nullptr);
  Tensor want = layer_norm(x, p.ln_final.gamma, p.ln_final.beta, o.ln_eps);
  EXPECT_TRUE(bit_equal(out.output, want));
}

TEST(ModulesTest, ShapesArePreserved) {
  AcousticModel m(tiny_config(), 3);
  const BlockParams& p = m.blocks()[0];
  const ModuleOptions o = opts(2, PosEncoding::kRelative);
  Rng rng(4);
  for (int t : {1, 5, 100}) {
    Tensor x = random_tensor({t, 4}, rng, false);
    EXPECT_EQ(ffn_module(x, p.ffn1, o).shape(), x.shape());
    EXPECT_EQ(conv_module(x, p.conv1, o).shape(), x.shape());
    EXPECT_EQ(mhsa_module(x, p.mhsa, o).output.shape(), x.shape());
  }
}

// Brute-force multi-head attention, one head and one query at a time.
std::vector<double> sinusoid(double pos, int d) {
  std::vector<double> pe(static_cast<size_t>(d));
  for (int i = 0; i < d; i += 2) {
    const double w = std::pow(10000.0, -static_cast<double>(i) / d);
    pe[static_cast<size_t>(i)] = std::sin(pos * w);
    if (i + 1 < d) pe[static_cast<size_t>(i + 1)] = std::cos(pos * w);
  }
  return pe;
}

Tensor attention_oracle(const Tensor& x, const MhsaParams& p, int heads, PosEncoding pos,
                        double eps) {
  const int T = static_cast<int>(x.size(0));
  const int d = static_cast<int>(x.size(1));
  const int dk = d / heads;
  std::vector<std::vector<double>> z(T, std::vector<double>(d));
  for (int t = 0; t < T; ++t) {
    double mu = 0.0, var = 0.0;
    for (int j = 0; j < d; ++j) mu += x.at(t, j) / d;
    for (int j = 0; j < d; ++j) var += (x.at(t, j) - mu) * (x.at(t, j) - mu) / d;
    const std::vector<double> pe = sinusoid(t, d);
    for (int j = 0; j < d; ++j) {
      z[t][j] = (x.at(t, j) - mu) / std::sqrt(var + eps) * p.ln.gamma.at(j) + p.ln.beta.at(j);
      if (pos == PosEncoding::kAbsolute) z[t][j] += pe[static_cast<size_t>(j)];
    }
  }
  auto project = [&](const LinearParams& l, int t, int j) {
    double acc = l.b.at(j);
    for (int i = 0; i < d; ++i) acc += z[t][i] * l.w.at(i, j);
    return acc;
  };
  auto rel = [&](int delta, int j) {
    const std::vector<double> pe = sinusoid(delta, d);
    double acc = 0.0;
    for (int i = 0; i < d; ++i) acc += pe[static_cast<size_t>(i)] * p.pos_w.at(i, j);
    return acc;
  };
  std::vector<double> concat(static_cast<size_t>(T * d));
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < T; ++i) {
      std::vector<double> s(T);
      double mx = -1e300;
      for (int j = 0; j < T; ++j) {
        double acc = 0.0;
        for (int c = h * dk; c < (h + 1) * dk; ++c) {
          const double q = project(p.q, i, c);
          if (pos == PosEncoding::kRelative) {
            acc += (q + p.pos_u.at(c)) * project(p.k, j, c);
            acc += (q + p.pos_v.at(c)) * rel(i - j, c);
          } else {
            acc += q * project(p.k, j, c);
          }
        }
        s[j] = acc / std::sqrt(static_cast<double>(dk));
        mx = std::max(mx, s[j]);
      }
      double total = 0.0;
      for (double& v : s) total += (v = std::exp(v - mx));
      for (int c = h * dk; c < (h + 1) * dk; ++c) {
        double acc = 0.0;
        for (int j = 0; j < T; ++j) acc += s[j] / total * project(p.v, j, c);
        concat[static_cast<size_t>(i * d + c)] = acc;
      }
    }
  }
  std::vector<double> out(static_cast<size_t>(T * d));
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < d; ++j) {
      double acc = p.out.b.at(j);
      for (int i = 0; i < d; ++i) acc += concat[static_cast<size_t>(t * d + i)] * p.out.w.at(i, j);
      out[static_cast<size_t>(t * d + j)] = x.at(t, j) + acc;
    }
  return Tensor({T, d}, out);
}

class AttentionOracleTest : public ::testing::TestWithParam<PosEncoding> {};

TEST_P(AttentionOracleTest, MatchesBruteForce) {
  ModelConfig c = tiny_config();
  c.pos_encoding = GetParam();
  AcousticModel m(c, 5);
  Rng rng(6);
  randomize(m, rng);
  const MhsaParams& p = m.blocks()[0].mhsa;
  for (int rep = 0; rep < 5; ++rep) {
    Tensor x = random_tensor({3, 4}, rng, false);
    MhsaOutput got = mhsa_module(x, p, opts(2, GetParam()), nullptr, true);
    Tensor want = attention_oracle(x, p, 2, GetParam(), c.ln_eps);
    EXPECT_LT(testing::max_abs_diff(got.output, want), 1e-10);
    ASSERT_EQ(got.attention.size(), 2u);
    for (const Tensor& a : got.attention)
      for (int i = 0; i < 3; ++i) {
        double s = 0.0;
        for (int j = 0; j < 3; ++j) s += a.at(i, j);
        EXPECT_NEAR(s, 1.0, 1e-12);
      }
  }
}

INSTANTIATE_TEST_SUITE_P(PosEncodings, AttentionOracleTest,
                         ::testing::Values(PosEncoding::kRelative, PosEncoding::kAbsolute,
                                           PosEncoding::kNone));

TEST(ModulesTest, GradientChecks) {
  ModelConfig c = tiny_config();
  AcousticModel m(c, 7);
  Rng rng(8);
  randomize(m, rng);
  const BlockParams& p = m.blocks()[0];
  const ModuleOptions o = opts(2, PosEncoding::kRelative);
  Tensor x = random_tensor({5, 4}, rng);
  std::vector<Tensor> inputs = {x};
  for (const auto& [name, t] : m.parameters())
    if (name.rfind("block1.", 0) == 0) inputs.push_back(t);
  auto check = [&](const TensorFn& f) {
    GradCheckResult r = grad_check(f, inputs);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
  };
  check([&](auto& v) { return ffn_module(v[0], p.ffn1, o); });
  check([&](auto& v) { return conv_module(v[0], p.conv1, o); });
  check([&](auto& v) { return mhsa_module(v[0], p.mhsa, o).output; });
  check([&](auto& v) { return conformer_block(v[0], p, o, nullptr).output; });
}

TEST(FrontendTest, DownsampledLengths) {
  ModelConfig c = tiny_config();
  AcousticModel m(c, 9);
  ModuleOptions o;
  Rng rng(10);
  EXPECT_EQ(vgg_frontend(random_tensor({9, 5}, rng, false), m.frontend(), 3, o).size(0), 3);
  EXPECT_EQ(vgg_frontend(random_tensor({10, 5}, rng, false), m.frontend(), 3, o).size(0), 4);
  EXPECT_EQ(vgg_frontend(random_tensor({10, 5}, rng, false), m.frontend(), 3, o).size(1), 4);
}

TEST(AcousticModelTest, OutputLengthMatchesInput) {
  ModelConfig c = tiny_config();
  AcousticModel m(c, 11);
  Rng rng(12);
  for (int t = 1; t <= 50; ++t) {
    ForwardResult r = m.forward(random_tensor({t, 5}, rng, false));
    ASSERT_EQ(r.logits.size(0), t);
    ASSERT_EQ(r.logits.size(1), 3);
  }
  ForwardResult r = m.forward(random_tensor({7, 5}, rng, false));
  Tensor p = softmax(r.logits, -1);
  for (int t = 0; t < 7; ++t) EXPECT_NEAR(p.at(t, 0) + p.at(t, 1) + p.at(t, 2), 1.0, 1e-12);
}

TEST(AcousticModelTest, TapsExactAndDeterministic) {
  ModelConfig c = tiny_config();
  AcousticModel m(c, 13);
  Rng rng(14);
  Tensor x = random_tensor({8, 5}, rng, false);
  ForwardOptions fo;
  fo.taps = {{0, TapModule::kBlockOut}, {1, TapModule::kMhsaOut}, {2, TapModule::kFfn1Out}};
  ForwardResult a = m.forward(x, nullptr, fo);
  ForwardResult b = m.forward(x, nullptr, fo);
  ASSERT_EQ(a.taps.size(), 3u);
  for (const auto& [tap, t] : a.taps) {
    EXPECT_EQ(t.shape(), (Shape{3, 4}));
    EXPECT_TRUE(bit_equal(t, b.taps.at(tap)));
  }
}

TEST(AcousticModelTest, EmbeddingContract) {
  ModelConfig c = tiny_config();
  AcousticModel plain(c, 15);
  Tensor x = Tensor::zeros({4, 5});
  Tensor v = Tensor::zeros({3});
  EXPECT_THROW(plain.forward(x, &v), ConfigError);
  c.integration = IntegrationSpec{};
  c.integration->embedding_dim = 3;
  AcousticModel sat(c, 15);
  EXPECT_THROW(sat.forward(x), UsageError);
  Tensor bad = Tensor::zeros({2});
  EXPECT_THROW(sat.forward(x, &bad), DimensionError);
  EXPECT_NO_THROW(sat.forward(x, &v));
}

TEST(AcousticModelTest, BlstmSharesForwardContract) {
  ModelConfig c = tiny_config();
  c.model_kind = ModelKind::kBlstm;
  c.blstm_layers = 3;
  c.blstm_hidden = 6;
  AcousticModel m(c, 16);
  Rng rng(17);
  ForwardOptions fo;
  fo.taps = {{1, TapModule::kBlockOut}, {3, TapModule::kBlockOut}};
  ForwardResult r = m.forward(random_tensor({7, 5}, rng, false), nullptr, fo);
  EXPECT_EQ(r.logits.shape(), (Shape{7, 3}));
  EXPECT_EQ(r.taps.at(fo.taps[1]).shape(), (Shape{7, 6}));
  EXPECT_EQ(m.num_parameters(), count_parameters(c));
}

TEST(ParameterCountTest, ClosedFormMatchesRegistry) {
  Rng rng(18);
  for (int i = 0; i < 20; ++i) {
    ModelConfig c;
    c.num_heads = 1 + static_cast<int>(rng.below(3));
    c.att_dim = c.num_heads * (1 + static_cast<int>(rng.below(4)));
    c.ffn_dim = c.att_dim + static_cast<int>(rng.below(5));
    c.num_blocks = static_cast<int>(rng.below(4));
    c.conv_kernel = 1 + 2 * static_cast<int>(rng.below(3));
    c.time_downsample = 1 + static_cast<int>(rng.below(3));
    c.feature_dim = 1 + static_cast<int>(rng.below(7));
    c.num_output_classes = 1 + static_cast<int>(rng.below(6));
    c.vgg_channels = {1 + static_cast<int>(rng.below(3)), 1 + static_cast<int>(rng.below(3))};
    c.pos_encoding = static_cast<PosEncoding>(rng.below(3));
    if (rng.below(2) == 1) {
      IntegrationSpec s;
      s.method = all_methods()[rng.below(all_methods().size())];
      s.target = static_cast<IntegrationTarget>(rng.below(5));
      s.embedding_dim = 1 + static_cast<int>(rng.below(4));
      s.blocks = {0};
      for (int b = 1; b <= c.num_blocks; ++b)
        if (rng.below(2) == 1) s.blocks.push_back(b);
      c.integration = s;
    }
    AcousticModel m(c, static_cast<uint64_t>(i));
    EXPECT_EQ(m.num_parameters(), count_parameters(c)) << to_json(c).dump();
  }
}

TEST(ParameterCountTest, LinearInBlocks) {
  ModelConfig c = tiny_config();
  c.num_blocks = 3;
  const int64_t n3 = count_parameters(c);
  c.num_blocks = 6;
  const int64_t n6 = count_parameters(c);
  c.num_blocks = 0;
  const int64_t n0 = count_parameters(c);
  EXPECT_EQ(n6 - n3, n3 - n0);
}

TEST(ParameterCountTest, FullConfigNear58M) {
  ModelConfig c;  // full-size defaults
  const double n = static_cast<double>(count_parameters(c));
  EXPECT_GT(n, 0.85 * 58e6);
  EXPECT_LT(n, 1.15 * 58e6);
}

}  // namespace
}  // namespace satconf
