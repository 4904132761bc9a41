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

// satconf/src/gradsuite.cc

#include "satconf/gradsuite.h"

#include <chrono>
#include <cmath>
#include <utility>

#include "satconf/errors.h"
#include "satconf/gradcheck.h"
#include "satconf/integration.h"
#include "satconf/model.h"
#include "satconf/ops.h"
#include "satconf/pooling.h"
#include "satconf/rng.h"

namespace satconf {
namespace {

Tensor rand_t(Shape shape, Rng& rng, double scale = 1.0) {
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (double& x : v) x = scale * rng.normal();
  return Tensor(std::move(shape), std::move(v), true);
}

// Values within `margin` of zero are pushed out, keeping relu off its kink.
Tensor rand_away_from_zero(Shape shape, Rng& rng, double margin) {
  Tensor t = rand_t(std::move(shape), rng);
  for (double& x : t.mutable_data())
    if (std::abs(x) < margin) x = x < 0 ? -margin - std::abs(x) : margin + x;
  return t;
}

int64_t dim(Rng& rng, int64_t lo, int64_t hi) {
  return lo + static_cast<int64_t>(rng.below(static_cast<uint64_t>(hi - lo + 1)));
}

ModelConfig tiny_model(Rng& rng) {
  ModelConfig c = desk_model_config();
  c.num_blocks = 2;
  c.num_heads = static_cast<int>(dim(rng, 1, 2));
  c.att_dim = 4;
  c.ffn_dim = 8;
  c.conv_kernel = 3;
  c.feature_dim = 5;
  c.num_output_classes = 3;
  c.vgg_channels = {2, 2};
  c.dropout = 0.0;
  return c;
}

void randomize(const AcousticModel& m, Rng& rng) {
  for (const auto& [name, t] : m.parameters()) {
    Tensor h = t;
    for (double& v : h.mutable_data()) v = 0.5 * rng.normal();
  }
}

std::vector<Tensor> block_inputs(const AcousticModel& m, Tensor x) {
  std::vector<Tensor> in = {std::move(x)};
  for (const auto& [name, t] : m.parameters())
    if (name.rfind("block1.", 0) == 0) in.push_back(t);
  return in;
}

ModuleOptions module_opts(const ModelConfig& c, PosEncoding pos) {
  ModuleOptions o;
  o.num_heads = c.num_heads;
  o.pos_encoding = pos;
  return o;
}

using Instance = std::function<GradCheckResult(Rng&)>;

GradCheckResult check_attention(Rng& rng, PosEncoding pos) {
  ModelConfig c = tiny_model(rng);
  AcousticModel m(c, rng.next());
  randomize(m, rng);
  const MhsaParams& p = m.blocks()[0].mhsa;
  const ModuleOptions o = module_opts(c, pos);
  std::vector<Tensor> in = block_inputs(m, rand_t({dim(rng, 2, 5), c.att_dim}, rng));
  return grad_check([&](auto& v) { return mhsa_module(v[0], p, o).output; }, in);
}

GradCheckResult check_integration(Rng& rng, IntegrationMethod method) {
  const int64_t d = dim(rng, 2, 4), D = dim(rng, 1, 3), T = dim(rng, 1, 4), out = dim(rng, 2, 4);
  const int64_t dims[] = {out};
  IntegrationParams p = make_integration_params(method, d, D, IntegrationInit::kRandom, rng, dims);
  IntegrationSpec spec;
  spec.method = method;
  spec.threshold_k = 0.4;
  Tensor z = rand_t({T, d}, rng);
  Tensor v = rand_t({D}, rng);
  if (method == IntegrationMethod::kWeightedSimpleAdd) {
    // Redraw z until no frame weight sits at the threshold, where the
    // forward is discontinuous.
    for (;;) {
      WeightedAddResult r = integrate_weighted_simple_add(z, v, p.w, p.u, p.b1, p.b2, 0.0);
      bool clear = true;
      for (double w : r.weights.data()) clear = clear && std::abs(w - spec.threshold_k) > 1e-3;
      if (clear) break;
      z = rand_t({T, d}, rng);
    }
  }
  std::vector<Tensor> in = {z, v};
  for (const Tensor& t : {p.w, p.u, p.b1, p.b2})
    if (t.defined()) in.push_back(t);
  Tensor proj = rand_t({d, out}, rng);
  if (method == IntegrationMethod::kConcat) in.push_back(p.concat_rows[0]);
  return grad_check(
      [&](const std::vector<Tensor>& x) {
        Tensor y = apply_integration(x[0], x[1], spec, p);
        if (method == IntegrationMethod::kConcat)
          return widened_linear(y, proj, Tensor(), p.concat_rows[0]);
        return y;
      },
      in);
}

std::vector<std::pair<std::string, Instance>> suite() {
  std::vector<std::pair<std::string, Instance>> s;
  s.emplace_back("linear", [](Rng& r) {
    const int64_t n = dim(r, 1, 4), i = dim(r, 1, 4), o = dim(r, 1, 4);
    return grad_check([](auto& v) { return linear(v[0], v[1], v[2]); },
                      {rand_t({n, i}, r), rand_t({i, o}, r), rand_t({o}, r)});
  });
  s.emplace_back("matmul", [](Rng& r) {
    const int64_t m = dim(r, 1, 4), k = dim(r, 1, 4), n = dim(r, 1, 4);
    return grad_check([](auto& v) { return add(matmul(v[0], v[1]), matmul_nt(v[0], v[2])); },
                      {rand_t({m, k}, r), rand_t({k, n}, r), rand_t({n, k}, r)});
  });
  s.emplace_back("matvec", [](Rng& r) {
    const int64_t m = dim(r, 1, 4), n = dim(r, 1, 4);
    return grad_check([](auto& v) { return matvec(v[0], v[1]); },
                      {rand_t({m, n}, r), rand_t({n}, r)});
  });
  s.emplace_back("softmax", [](Rng& r) {
    const int axis = r.below(2) == 0 ? 0 : -1;
    return grad_check([axis](auto& v) { return softmax(v[0], axis); },
                      {rand_t({dim(r, 1, 4), dim(r, 2, 5)}, r, 2.0)});
  });
  s.emplace_back("layer_norm", [](Rng& r) {
    const int64_t d = dim(r, 2, 6);
    return grad_check([](auto& v) { return layer_norm(v[0], v[1], v[2]); },
                      {rand_t({dim(r, 1, 4), d}, r), rand_t({d}, r), rand_t({d}, r)});
  });
  s.emplace_back("cross_entropy", [](Rng& r) {
    const int64_t t = dim(r, 1, 4), c = dim(r, 2, 5);
    std::vector<int32_t> labels(static_cast<size_t>(t));
    for (int32_t& l : labels) l = static_cast<int32_t>(r.below(static_cast<uint64_t>(c)));
    return grad_check([labels](auto& v) { return cross_entropy(v[0], labels, 0.5); },
                      {rand_t({t, c}, r, 2.0)});
  });
  s.emplace_back("sigmoid", [](Rng& r) {
    return grad_check([](auto& v) { return sigmoid(v[0]); }, {rand_t({dim(r, 1, 4), 3}, r, 2.0)});
  });
  s.emplace_back("tanh", [](Rng& r) {
    return grad_check([](auto& v) { return tanh(v[0]); }, {rand_t({dim(r, 1, 4), 3}, r, 2.0)});
  });
  s.emplace_back("swish", [](Rng& r) {
    return grad_check([](auto& v) { return swish(v[0]); }, {rand_t({dim(r, 1, 4), 3}, r, 2.0)});
  });
  s.emplace_back("relu", [](Rng& r) {
    return grad_check([](auto& v) { return relu(v[0]); },
                      {rand_away_from_zero({dim(r, 1, 4), 3}, r, 1e-3)});
  });
  s.emplace_back("add_sub_mul_scale", [](Rng& r) {
    const Shape sh = {dim(r, 1, 4), dim(r, 1, 4)};
    return grad_check(
        [](auto& v) { return sub(mul(v[0], add(v[1], v[0])), scale(v[1], -1.5)); },
        {rand_t(sh, r), rand_t(sh, r)});
  });
  s.emplace_back("depthwise_conv1d", [](Rng& r) {
    const int64_t d = dim(r, 1, 3), k = 2 * dim(r, 0, 2) + 1;
    return grad_check([](auto& v) { return depthwise_conv1d(v[0], v[1], v[2]); },
                      {rand_t({dim(r, 1, 6), d}, r), rand_t({k, d}, r), rand_t({d}, r)});
  });
  s.emplace_back("conv1d", [](Rng& r) {
    const int64_t ci = dim(r, 1, 3), co = dim(r, 1, 3);
    const int dil = static_cast<int>(dim(r, 1, 3));
    return grad_check([dil](auto& v) { return conv1d(v[0], v[1], v[2], dil); },
                      {rand_t({dim(r, 1, 6), ci}, r), rand_t({3, ci, co}, r), rand_t({co}, r)});
  });
  s.emplace_back("conv2d", [](Rng& r) {
    const int64_t ci = dim(r, 1, 2), co = dim(r, 1, 2);
    const int st = static_cast<int>(dim(r, 1, 3)), sf = static_cast<int>(dim(r, 1, 2));
    return grad_check(
        [st, sf](auto& v) { return conv2d(v[0], v[1], v[2], st, sf, Padding2d{1, 1, 1, 1}); },
        {rand_t({dim(r, 2, 5), dim(r, 2, 4), ci}, r), rand_t({3, 3, ci, co}, r),
         rand_t({co}, r)});
  });
  s.emplace_back("transposed_conv1d", [](Rng& r) {
    const int64_t ci = dim(r, 1, 3), co = dim(r, 1, 3);
    const int stride = static_cast<int>(dim(r, 1, 3));
    return grad_check([stride](auto& v) { return transposed_conv1d(v[0], v[1], v[2], stride); },
                      {rand_t({dim(r, 1, 4), ci}, r), rand_t({3, ci, co}, r), rand_t({co}, r)});
  });
  s.emplace_back("glu", [](Rng& r) {
    return grad_check([](auto& v) { return glu(v[0]); },
                      {rand_t({dim(r, 1, 4), 2 * dim(r, 1, 3)}, r)});
  });
  s.emplace_back("lstm_step", [](Rng& r) {
    const int64_t di = dim(r, 1, 3), h = dim(r, 1, 3);
    return grad_check(
        [](auto& v) { return lstm(v[0], LstmParams{v[1], v[2], v[3]}, false); },
        {rand_t({1, di}, r), rand_t({di, 4 * h}, r), rand_t({h, 4 * h}, r),
         rand_t({4 * h}, r)});
  });
  s.emplace_back("blstm_layer", [](Rng& r) {
    const int64_t di = dim(r, 1, 3), h = dim(r, 1, 2);
    std::vector<Tensor> in = {rand_t({dim(r, 2, 4), di}, r)};
    for (int dir = 0; dir < 2; ++dir) {
      in.push_back(rand_t({di, 4 * h}, r));
      in.push_back(rand_t({h, 4 * h}, r));
      in.push_back(rand_t({4 * h}, r));
    }
    return grad_check(
        [](auto& v) {
          const LstmParams p[] = {{v[1], v[2], v[3]}, {v[4], v[5], v[6]}};
          return lstm_layer(v[0], p, LstmDirection::kBidirectional);
        },
        in);
  });
  s.emplace_back("rel_shift", [](Rng& r) {
    const int64_t t = dim(r, 1, 4);
    return grad_check([](auto& v) { return rel_shift(v[0]); }, {rand_t({t, 2 * t - 1}, r)});
  });
  s.emplace_back("shape_plumbing", [](Rng& r) {
    const int64_t t = dim(r, 2, 4), d = dim(r, 2, 4);
    return grad_check(
        [t, d](auto& v) {
          const Tensor rows[] = {slice_rows(v[0], 0, t - 1), slice_rows(v[0], 1, t - 1)};
          const Tensor cols[] = {slice_cols(v[0], 1, d - 1), broadcast_rows(v[1], t)};
          return add(sum(concat_rows(rows)),
                     mean(mul(concat_cols(cols), reshape(concat_cols(cols), {t, 2 * d - 1}))));
        },
        {rand_t({t, d}, r), rand_t({d}, r)});
  });
  s.emplace_back("pooling_rows", [](Rng& r) {
    const int64_t t = dim(r, 1, 4), d = dim(r, 1, 4);
    return grad_check(
        [](auto& v) { return add(weighted_sum_rows(v[0], v[1]), mean_rows(v[0])); },
        {rand_t({t, d}, r), rand_t({t}, r)});
  });
  s.emplace_back("attention", [](Rng& r) { return check_attention(r, PosEncoding::kRelative); });
  s.emplace_back("attention_absolute_pos",
                 [](Rng& r) { return check_attention(r, PosEncoding::kAbsolute); });
  s.emplace_back("attentive_pool", [](Rng& r) {
    const int64_t d = dim(r, 1, 4), h = dim(r, 1, 4);
    AttentivePoolParams p = make_attentive_pool(d, h, r);
    for (Tensor t : {p.a_w, p.a_b, p.u})
      for (double& x : t.mutable_data()) x = r.normal();
    return grad_check(
        [](auto& v) { return attentive_pool(v[0], AttentivePoolParams{v[1], v[2], v[3]}); },
        {rand_t({dim(r, 1, 5), d}, r), p.a_w, p.a_b, p.u});
  });
  for (IntegrationMethod m : {IntegrationMethod::kConcat, IntegrationMethod::kSimpleAdd,
                              IntegrationMethod::kComplexAdd, IntegrationMethod::kGatedAdd,
                              IntegrationMethod::kWeightedSimpleAdd})
    s.emplace_back(to_string(m), [m](Rng& r) { return check_integration(r, m); });
  s.emplace_back("ffn_module", [](Rng& r) {
    ModelConfig c = tiny_model(r);
    AcousticModel m(c, r.next());
    randomize(m, r);
    const ModuleOptions o = module_opts(c, c.pos_encoding);
    return grad_check([&](auto& v) { return ffn_module(v[0], m.blocks()[0].ffn1, o); },
                      block_inputs(m, rand_t({dim(r, 1, 5), c.att_dim}, r)));
  });
  s.emplace_back("conv_module", [](Rng& r) {
    ModelConfig c = tiny_model(r);
    AcousticModel m(c, r.next());
    randomize(m, r);
    const ModuleOptions o = module_opts(c, c.pos_encoding);
    return grad_check([&](auto& v) { return conv_module(v[0], m.blocks()[0].conv1, o); },
                      block_inputs(m, rand_t({dim(r, 1, 5), c.att_dim}, r)));
  });
  s.emplace_back("conformer_block", [](Rng& r) {
    ModelConfig c = tiny_model(r);
    AcousticModel m(c, r.next());
    randomize(m, r);
    const ModuleOptions o = module_opts(c, c.pos_encoding);
    return grad_check(
        [&](auto& v) { return conformer_block(v[0], m.blocks()[0], o, nullptr).output; },
        block_inputs(m, rand_t({dim(r, 2, 5), c.att_dim}, r)));
  });
  return s;
}

}  // namespace

std::vector<std::string> grad_suite_ops() {
  std::vector<std::string> names;
  for (const auto& [name, f] : suite()) names.push_back(name);
  return names;
}

std::vector<GradSuiteEntry> run_grad_suite(
    int instances, uint64_t seed, const std::function<void(const GradSuiteEntry&)>& progress) {
  if (instances < 1) throw UsageError("grad suite needs at least one instance");
  std::vector<GradSuiteEntry> out;
  uint64_t op_index = 0;
  for (const auto& [name, f] : suite()) {
    const auto t0 = std::chrono::steady_clock::now();
    GradSuiteEntry e;
    e.op = name;
    for (int i = 0; i < instances; ++i) {
      Rng rng = Rng::derive(seed, op_index, static_cast<uint64_t>(i));
      GradCheckResult r = f(rng);
      if (r.coordinates == 0) throw NumericalError("grad suite op " + name + " probed nothing");
      if (i == 0 || std::isnan(r.max_rel_error) ||
          (!std::isnan(e.max_rel_error) && r.max_rel_error > e.max_rel_error)) {
        e.max_rel_error = r.max_rel_error;
        e.worst = r.worst;
      }
      ++e.instances;
    }
    e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (progress) progress(e);
    out.push_back(std::move(e));
    ++op_index;
  }
  return out;
}

}  // namespace satconf
