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

// satconf/src/model.cc

#include "satconf/model.h"

#include <algorithm>
#include <cmath>

#include "satconf/errors.h"

namespace satconf {

namespace {

bool is_concat(const SpeakerHook* hook) {
  return hook != nullptr && hook->params->method == IntegrationMethod::kConcat;
}

// Row block appended to the i-th projection fed by a concat hook.
Tensor concat_rows_of(const SpeakerHook* hook, size_t i) {
  if (!is_concat(hook)) return Tensor();
  return hook->params->concat_rows.at(i);
}

Tensor integrate(const Tensor& z, const SpeakerHook* hook) {
  if (hook == nullptr) return z;
  return apply_integration(z, hook->embedding, *hook->spec, *hook->params);
}

Tensor norm(const Tensor& x, const LayerNormParams& p, double eps) {
  return layer_norm(x, p.gamma, p.beta, eps);
}

Tensor drop(const Tensor& x, const ModuleOptions& opt) {
  return dropout(x, opt.dropout, opt.rng, opt.training);
}

std::vector<double> uniform_values(int64_t n, double bound, Rng& rng) {
  std::vector<double> v(static_cast<size_t>(n));
  for (double& x : v) x = rng.uniform(-bound, bound);
  return v;
}

double glorot(int64_t fan_in, int64_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

// Columns [off, off + n) of a vector.
Tensor head_slice(const Tensor& v, int64_t off, int64_t n) {
  return reshape(slice_cols(reshape(v, {1, v.numel()}), off, n), {n});
}

const SpeakerHook* hook_for(const SpeakerHook* hook, IntegrationTarget target) {
  return hook != nullptr && hook->spec->target == target ? hook : nullptr;
}

}  // namespace

Tensor ffn_module(const Tensor& x, const FfnParams& p, const ModuleOptions& opt,
                  const SpeakerHook* hook) {
  const Tensor z = integrate(norm(x, p.ln, opt.ln_eps), hook);
  Tensor h = widened_linear(z, p.lin1.w, p.lin1.b, concat_rows_of(hook, 0));
  h = drop(swish(h), opt);
  h = drop(linear(h, p.lin2.w, p.lin2.b), opt);
  return add(x, scale(h, 0.5));
}

Tensor conv_module(const Tensor& x, const ConvModuleParams& p, const ModuleOptions& opt,
                   const SpeakerHook* hook) {
  const Tensor z = integrate(norm(x, p.ln, opt.ln_eps), hook);
  Tensor h = glu(widened_linear(z, p.pw_in.w, p.pw_in.b, concat_rows_of(hook, 0)));
  h = depthwise_conv1d(h, p.dw_kernel, p.dw_bias);
  h = swish(norm(h, p.ln_inner, opt.ln_eps));
  h = drop(linear(h, p.pw_out.w, p.pw_out.b), opt);
  return add(x, h);
}

MhsaOutput mhsa_module(const Tensor& x, const MhsaParams& p, const ModuleOptions& opt,
                       const SpeakerHook* hook, bool keep_attention) {
  if (x.rank() != 2) throw DimensionError("mhsa_module expects [T,d], got " + shape_str(x.shape()));
  const int64_t t_len = x.size(0);
  const int64_t d = x.size(1);
  const int heads = opt.num_heads;
  if (heads < 1 || d % heads != 0) {
    throw DimensionError("mhsa_module: " + std::to_string(heads) + " heads do not divide d=" +
                         std::to_string(d));
  }
  const int64_t dk = d / heads;

  MhsaOutput result;
  result.normed_input = norm(x, p.ln, opt.ln_eps);
  Tensor z = result.normed_input;
  if (opt.pos_encoding == PosEncoding::kAbsolute) {
    std::vector<double> positions(static_cast<size_t>(t_len));
    for (int64_t t = 0; t < t_len; ++t) positions[static_cast<size_t>(t)] = static_cast<double>(t);
    z = add(z, sinusoid_table(positions, d));
  }
  z = integrate(z, hook);

  const Tensor q = widened_linear(z, p.q.w, p.q.b, concat_rows_of(hook, 0));
  const Tensor k = widened_linear(z, p.k.w, p.k.b, concat_rows_of(hook, 1));
  const Tensor v = widened_linear(z, p.v.w, p.v.b, concat_rows_of(hook, 2));

  const bool relative = opt.pos_encoding == PosEncoding::kRelative;
  Tensor r;
  if (relative) {
    // Row m holds relative distance m - (T - 1).
    std::vector<double> distances(static_cast<size_t>(2 * t_len - 1));
    for (size_t m = 0; m < distances.size(); ++m) {
      distances[m] = static_cast<double>(static_cast<int64_t>(m) - (t_len - 1));
    }
    r = linear(sinusoid_table(distances, d), p.pos_w);
  }

  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<Tensor> head_out;
  head_out.reserve(static_cast<size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const int64_t off = h * dk;
    const Tensor qh = slice_cols(q, off, dk);
    const Tensor kh = slice_cols(k, off, dk);
    const Tensor vh = slice_cols(v, off, dk);
    Tensor scores;
    if (relative) {
      const Tensor u = broadcast_rows(head_slice(p.pos_u, off, dk), t_len);
      const Tensor w = broadcast_rows(head_slice(p.pos_v, off, dk), t_len);
      const Tensor content = matmul_nt(add(qh, u), kh);
      const Tensor position = rel_shift(matmul_nt(add(qh, w), slice_cols(r, off, dk)));
      scores = add(content, position);
    } else {
      scores = matmul_nt(qh, kh);
    }
    const Tensor att = softmax(scale(scores, inv_sqrt), -1);
    if (keep_attention) result.attention.push_back(att);
    head_out.push_back(matmul(att, vh));
  }
  const Tensor heads_cat = concat_cols(head_out);
  result.output = add(x, drop(linear(heads_cat, p.out.w, p.out.b), opt));
  return result;
}

BlockOutput conformer_block(const Tensor& x, const BlockParams& p, const ModuleOptions& opt,
                            const SpeakerHook* hook, std::span<const TapModule> taps,
                            std::vector<Tensor>* attention) {
  BlockOutput out;
  auto record = [&](TapModule m, const Tensor& t) {
    if (std::find(taps.begin(), taps.end(), m) != taps.end()) out.taps[m] = t;
  };
  Tensor h = ffn_module(x, p.ffn1, opt, hook_for(hook, IntegrationTarget::kFfn1In));
  record(TapModule::kFfn1Out, h);
  h = conv_module(h, p.conv1, opt, hook_for(hook, IntegrationTarget::kConv1In));
  record(TapModule::kConv1Out, h);
  MhsaOutput m = mhsa_module(h, p.mhsa, opt, hook_for(hook, IntegrationTarget::kMhsaIn),
                             attention != nullptr);
  record(TapModule::kMhsaIn, m.normed_input);
  if (attention != nullptr) *attention = std::move(m.attention);
  h = m.output;
  record(TapModule::kMhsaOut, h);
  h = conv_module(h, p.conv2, opt, hook_for(hook, IntegrationTarget::kConv2In));
  record(TapModule::kConv2Out, h);
  h = ffn_module(h, p.ffn2, opt, hook_for(hook, IntegrationTarget::kFfn2In));
  record(TapModule::kFfn2Out, h);
  out.output = norm(h, p.ln_final, opt.ln_eps);
  record(TapModule::kBlockOut, out.output);
  return out;
}

int64_t downsampled_length(int64_t t, int time_downsample) {
  return (t + time_downsample - 1) / time_downsample;
}

Tensor vgg_frontend(const Tensor& features, const FrontendParams& p, int time_downsample,
                    const ModuleOptions& opt, const SpeakerHook* hook) {
  if (features.rank() != 2 || features.size(0) < 1) {
    throw DimensionError("vgg_frontend expects [T,F] with T >= 1, got " +
                         shape_str(features.shape()));
  }
  const int64_t t_len = features.size(0);
  const int64_t f_len = features.size(1);
  const Padding2d pad{1, 1, 1, 1};
  Tensor h = reshape(features, {t_len, f_len, 1});
  h = swish(conv2d(h, p.conv1_kernel, p.conv1_bias, 1, 1, pad));
  h = swish(conv2d(h, p.conv2_kernel, p.conv2_bias, time_downsample, 2, pad));
  const int64_t t_out = h.size(0);
  h = reshape(h, {t_out, h.size(1) * h.size(2)});
  if (is_concat(hook)) {
    h = widened_linear(integrate_concat(h, hook->embedding), p.proj.w, p.proj.b,
                       concat_rows_of(hook, 0));
  } else {
    h = integrate(linear(h, p.proj.w, p.proj.b), hook);
  }
  return drop(h, opt);
}

// ---------------------------------------------------------------------------
// AcousticModel

AcousticModel::AcousticModel(const ModelConfig& config, uint64_t seed,
                             IntegrationInit integration_init)
    : config_(config) {
  config_.validate();
  Rng rng(seed);
  if (config_.model_kind == ModelKind::kConformer) {
    build_conformer(rng);
    if (config_.integration) {
      Rng integ_rng = Rng::derive(seed, 0x1e6);
      build_integration(integration_init, integ_rng);
    }
  } else {
    build_blstm(rng);
  }
}

Tensor AcousticModel::add_param(const std::string& name, Shape shape,
                                const std::vector<double>& data) {
  if (index_.count(name)) throw UsageError("duplicate parameter " + name);
  std::vector<double> stored(data.size());
  for (size_t i = 0; i < data.size(); ++i) stored[i] = static_cast<float>(data[i]);
  Tensor t(std::move(shape), std::move(stored), true);
  index_[name] = params_.size();
  params_.emplace_back(name, t);
  return t;
}

void AcousticModel::build_conformer(Rng& rng) {
  const int64_t d = config_.att_dim;
  const int64_t f = config_.ffn_dim;
  const int64_t c1 = config_.vgg_channels[0];
  const int64_t c2 = config_.vgg_channels[1];
  const int64_t s = config_.time_downsample;
  const int64_t kernel = config_.conv_kernel;

  auto weight = [&](const std::string& name, int64_t in, int64_t out) {
    return add_param(name, {in, out}, uniform_values(in * out, glorot(in, out), rng));
  };
  auto zeros = [&](const std::string& name, int64_t n) {
    return add_param(name, {n}, std::vector<double>(static_cast<size_t>(n), 0.0));
  };
  auto ones = [&](const std::string& name, int64_t n) {
    return add_param(name, {n}, std::vector<double>(static_cast<size_t>(n), 1.0));
  };
  auto lin = [&](const std::string& name, int64_t in, int64_t out) {
    return LinearParams{weight(name + ".w", in, out), zeros(name + ".b", out)};
  };
  auto ln = [&](const std::string& name, int64_t n) {
    return LayerNormParams{ones(name + ".gamma", n), zeros(name + ".beta", n)};
  };

  frontend_.conv1_kernel =
      add_param("frontend.conv1.kernel", {3, 3, 1, c1},
                uniform_values(9 * c1, glorot(9, 9 * c1), rng));
  frontend_.conv1_bias = zeros("frontend.conv1.bias", c1);
  frontend_.conv2_kernel =
      add_param("frontend.conv2.kernel", {3, 3, c1, c2},
                uniform_values(9 * c1 * c2, glorot(9 * c1, 9 * c2), rng));
  frontend_.conv2_bias = zeros("frontend.conv2.bias", c2);
  const int64_t f_out = (config_.feature_dim + 1) / 2;
  frontend_.proj = lin("frontend.proj", f_out * c2, d);

  auto ffn = [&](const std::string& name) {
    return FfnParams{ln(name + ".ln", d), lin(name + ".lin1", d, f), lin(name + ".lin2", f, d)};
  };
  auto conv = [&](const std::string& name) {
    ConvModuleParams p;
    p.ln = ln(name + ".ln", d);
    p.pw_in = lin(name + ".pw_in", d, 2 * d);
    const double bound = 1.0 / std::sqrt(static_cast<double>(kernel));
    p.dw_kernel = add_param(name + ".dw.kernel", {kernel, d}, uniform_values(kernel * d, bound, rng));
    p.dw_bias = zeros(name + ".dw.bias", d);
    p.ln_inner = ln(name + ".ln_inner", d);
    p.pw_out = lin(name + ".pw_out", d, d);
    return p;
  };

  blocks_.clear();
  for (int b = 1; b <= config_.num_blocks; ++b) {
    const std::string prefix = "block" + std::to_string(b);
    BlockParams bp;
    bp.ffn1 = ffn(prefix + ".ffn1");
    bp.conv1 = conv(prefix + ".conv1");
    bp.mhsa.ln = ln(prefix + ".mhsa.ln", d);
    bp.mhsa.q = lin(prefix + ".mhsa.q", d, d);
    bp.mhsa.k = lin(prefix + ".mhsa.k", d, d);
    bp.mhsa.v = lin(prefix + ".mhsa.v", d, d);
    bp.mhsa.out = lin(prefix + ".mhsa.out", d, d);
    if (config_.pos_encoding == PosEncoding::kRelative) {
      bp.mhsa.pos_w = weight(prefix + ".mhsa.pos_w", d, d);
      bp.mhsa.pos_u = zeros(prefix + ".mhsa.pos_u", d);
      bp.mhsa.pos_v = zeros(prefix + ".mhsa.pos_v", d);
    }
    bp.conv2 = conv(prefix + ".conv2");
    bp.ffn2 = ffn(prefix + ".ffn2");
    bp.ln_final = ln(prefix + ".ln_final", d);
    blocks_.push_back(std::move(bp));
  }

  up_kernel_ = add_param("upsample.kernel", {s, d, d}, uniform_values(s * d * d, glorot(d, d), rng));
  up_bias_ = zeros("upsample.bias", d);
  // Small output weights keep the initial loss close to ln C.
  output_.w = add_param("output.w", {d, config_.num_output_classes},
                        uniform_values(d * config_.num_output_classes, 0.01, rng));
  output_.b = zeros("output.b", config_.num_output_classes);
}

void AcousticModel::build_blstm(Rng& rng) {
  const int64_t hidden = config_.blstm_hidden;
  const int64_t h = hidden / 2;
  const double bound = 1.0 / std::sqrt(static_cast<double>(h));
  lstm_.clear();
  for (int l = 1; l <= config_.blstm_layers; ++l) {
    const int64_t din = l == 1 ? config_.feature_dim : hidden;
    std::vector<LstmParams> layer;
    for (const char* dir : {"fwd", "bwd"}) {
      const std::string prefix = "blstm.layer" + std::to_string(l) + "." + dir;
      LstmParams p;
      p.w_x = add_param(prefix + ".w_x", {din, 4 * h}, uniform_values(din * 4 * h, bound, rng));
      p.w_h = add_param(prefix + ".w_h", {h, 4 * h}, uniform_values(h * 4 * h, bound, rng));
      std::vector<double> b(static_cast<size_t>(4 * h), 0.0);
      for (int64_t j = h; j < 2 * h; ++j) b[static_cast<size_t>(j)] = 1.0;  // forget gate
      p.b = add_param(prefix + ".b", {4 * h}, b);
      layer.push_back(p);
    }
    lstm_.push_back(std::move(layer));
  }
  output_.w = add_param("output.w", {hidden, config_.num_output_classes},
                        uniform_values(hidden * config_.num_output_classes, 0.01, rng));
  output_.b = add_param("output.b", {config_.num_output_classes},
                        std::vector<double>(static_cast<size_t>(config_.num_output_classes), 0.0));
}

std::vector<int64_t> concat_out_dims(const ModelConfig& config, int block) {
  const int64_t d = config.att_dim;
  if (block == 0) return {d};
  switch (config.integration ? config.integration->target : IntegrationTarget::kMhsaIn) {
    case IntegrationTarget::kFfn1In:
    case IntegrationTarget::kFfn2In:
      return {config.ffn_dim};
    case IntegrationTarget::kConv1In:
    case IntegrationTarget::kConv2In:
      return {2 * d};
    case IntegrationTarget::kMhsaIn:
      return {d, d, d};
  }
  return {};
}

void AcousticModel::build_integration(IntegrationInit init, Rng& rng) {
  const IntegrationSpec& spec = *config_.integration;
  const int64_t d = config_.att_dim;
  std::vector<int> blocks = spec.blocks;
  std::sort(blocks.begin(), blocks.end());
  for (int b : blocks) {
    const std::vector<int64_t> dims = concat_out_dims(config_, b);
    IntegrationParams p = make_integration_params(spec.method, d, spec.embedding_dim, init, rng, dims);
    const std::string prefix = "integration.block" + std::to_string(b);
    auto reg = [&](Tensor& t, const std::string& field) {
      if (!t.defined()) return;
      if (index_.count(prefix + "." + field)) throw UsageError("duplicate parameter " + prefix);
      index_[prefix + "." + field] = params_.size();
      params_.emplace_back(prefix + "." + field, t);
    };
    reg(p.w, "w");
    reg(p.u, "u");
    reg(p.b1, "b1");
    reg(p.b2, "b2");
    for (size_t i = 0; i < p.concat_rows.size(); ++i) reg(p.concat_rows[i], "concat" + std::to_string(i));
    if (b == 0) {
      frontend_.integration = std::move(p);
    } else {
      blocks_[static_cast<size_t>(b - 1)].integration = std::move(p);
    }
  }
}

void AcousticModel::attach_integration(const IntegrationSpec& spec, IntegrationInit init,
                                       uint64_t seed) {
  if (config_.model_kind != ModelKind::kConformer) {
    throw ConfigError("integration is only supported for conformer models");
  }
  if (config_.integration) throw UsageError("model already has an integration spec");
  spec.validate(config_.num_blocks);
  config_.integration = spec;
  Rng rng = Rng::derive(seed, 0x1e6);
  build_integration(init, rng);
}

AcousticModel AcousticModel::clone() const {
  ModelConfig base = config_;
  base.integration.reset();
  AcousticModel copy(base, 0);
  if (config_.integration) {
    copy.config_.integration = config_.integration;
    Rng rng(0);
    copy.build_integration(IntegrationInit::kWarmStart, rng);
  }
  for (auto& [name, t] : copy.params_) {
    const Tensor& src = parameter(name);
    t.assign(src.shape(), std::vector<double>(src.data().begin(), src.data().end()));
  }
  return copy;
}

Tensor AcousticModel::parameter(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("no parameter named " + name);
  return params_[it->second].second;
}

bool AcousticModel::has_parameter(const std::string& name) const { return index_.count(name) > 0; }

int64_t AcousticModel::num_parameters() const {
  int64_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

bool AcousticModel::is_integration_parameter(const std::string& name) {
  return name.rfind("integration.", 0) == 0;
}

ModuleOptions AcousticModel::module_options(bool training, Rng* rng) const {
  ModuleOptions opt;
  opt.dropout = config_.dropout;
  opt.training = training;
  opt.rng = rng;
  opt.ln_eps = config_.ln_eps;
  opt.num_heads = config_.num_heads;
  opt.pos_encoding = config_.pos_encoding;
  if (training && config_.dropout > 0.0 && rng == nullptr) {
    throw UsageError("training forward with dropout needs an Rng");
  }
  return opt;
}

Tensor AcousticModel::check_embedding(const Tensor* embedding) const {
  if (!config_.integration) {
    if (embedding != nullptr && embedding->defined()) {
      throw ConfigError("speaker embedding given but the model has no integration spec");
    }
    return Tensor();
  }
  if (embedding == nullptr || !embedding->defined()) {
    throw UsageError("model with " + to_string(config_.integration->method) +
                     " integration needs a speaker embedding");
  }
  if (embedding->rank() != 1 || embedding->size(0) != config_.integration->embedding_dim) {
    throw DimensionError("speaker embedding " + shape_str(embedding->shape()) + ", expected [" +
                         std::to_string(config_.integration->embedding_dim) + "]");
  }
  return *embedding;
}

ForwardResult AcousticModel::forward(const Tensor& features, const Tensor* embedding,
                                     const ForwardOptions& options) const {
  if (features.rank() != 2 || features.size(1) != config_.feature_dim || features.size(0) < 1) {
    throw DimensionError("features " + shape_str(features.shape()) + ", expected [T," +
                         std::to_string(config_.feature_dim) + "] with T >= 1");
  }
  for (const BlockTapPoint& tap : options.taps) validate_tap(tap, config_);
  const Tensor v = check_embedding(embedding);
  if (config_.model_kind == ModelKind::kBlstm) return forward_blstm(features, options);
  return forward_conformer(features, v, options, -1, nullptr);
}

ForwardResult AcousticModel::forward_conformer(const Tensor& features, const Tensor& v,
                                               const ForwardOptions& options, int attention_block,
                                               std::vector<Tensor>* attention) const {
  const ModuleOptions opt = module_options(options.training, options.rng);
  const IntegrationSpec* spec = config_.integration ? &*config_.integration : nullptr;
  ForwardResult result;

  std::vector<std::vector<TapModule>> wanted(static_cast<size_t>(config_.num_blocks) + 1);
  for (const BlockTapPoint& tap : options.taps) {
    const BlockTapPoint t = tap.normalized();
    wanted[static_cast<size_t>(t.block_index)].push_back(t.module);
  }

  SpeakerHook hook;
  hook.embedding = v;
  hook.spec = spec;
  auto hook_at = [&](const std::optional<IntegrationParams>& p) -> const SpeakerHook* {
    if (!p || !v.defined()) return nullptr;
    hook.params = &*p;
    return &hook;
  };

  Tensor h = vgg_frontend(features, frontend_, config_.time_downsample, opt,
                          hook_at(frontend_.integration));
  if (!wanted[0].empty()) result.taps[BlockTapPoint{0, TapModule::kBlockOut}] = h;

  for (int b = 1; b <= config_.num_blocks; ++b) {
    const BlockParams& bp = blocks_[static_cast<size_t>(b - 1)];
    BlockOutput out = conformer_block(h, bp, opt, hook_at(bp.integration), wanted[static_cast<size_t>(b)],
                                      b == attention_block ? attention : nullptr);
    for (auto& [m, t] : out.taps) result.taps[BlockTapPoint{b, m}] = t;
    h = out.output;
    if (b == attention_block) return result;
  }

  const int64_t t_len = features.size(0);
  h = transposed_conv1d(h, up_kernel_, up_bias_, config_.time_downsample);
  h = slice_rows(h, 0, t_len);
  result.logits = linear(h, output_.w, output_.b);
  return result;
}

ForwardResult AcousticModel::forward_blstm(const Tensor& features,
                                           const ForwardOptions& options) const {
  const ModuleOptions opt = module_options(options.training, options.rng);
  ForwardResult result;
  std::vector<bool> wanted(static_cast<size_t>(config_.blstm_layers) + 1, false);
  for (const BlockTapPoint& tap : options.taps) wanted[static_cast<size_t>(tap.block_index)] = true;
  Tensor h = features;
  if (wanted[0]) result.taps[BlockTapPoint{0, TapModule::kBlockOut}] = h;
  for (int l = 1; l <= config_.blstm_layers; ++l) {
    h = lstm_layer(h, lstm_[static_cast<size_t>(l - 1)], LstmDirection::kBidirectional);
    if (wanted[static_cast<size_t>(l)]) result.taps[BlockTapPoint{l, TapModule::kBlockOut}] = h;
    h = drop(h, opt);
  }
  result.logits = linear(h, output_.w, output_.b);
  return result;
}

std::vector<Tensor> AcousticModel::block_attention(const Tensor& features, const Tensor* embedding,
                                                   int block) const {
  if (config_.model_kind != ModelKind::kConformer) {
    throw ConfigError("attention matrices exist only for conformer models");
  }
  if (block < 1 || block > config_.num_blocks) {
    throw ConfigError("block " + std::to_string(block) + " outside [1," +
                      std::to_string(config_.num_blocks) + "]");
  }
  const Tensor v = check_embedding(embedding);
  std::vector<Tensor> attention;
  forward_conformer(features, v, ForwardOptions{}, block, &attention);
  return attention;
}

// ---------------------------------------------------------------------------
// Closed forms

int64_t count_parameters(const ModelConfig& config) {
  config.validate();
  const int64_t classes = config.num_output_classes;
  if (config.model_kind == ModelKind::kBlstm) {
    const int64_t hidden = config.blstm_hidden;
    const int64_t h = hidden / 2;
    int64_t n = 0;
    for (int l = 1; l <= config.blstm_layers; ++l) {
      const int64_t din = l == 1 ? config.feature_dim : hidden;
      n += 2 * (din * 4 * h + h * 4 * h + 4 * h);
    }
    return n + hidden * classes + classes;
  }
  const int64_t d = config.att_dim;
  const int64_t f = config.ffn_dim;
  const int64_t k = config.conv_kernel;
  const int64_t c1 = config.vgg_channels[0];
  const int64_t c2 = config.vgg_channels[1];
  const int64_t f_out = (config.feature_dim + 1) / 2;

  const int64_t frontend = 9 * c1 + c1 + 9 * c1 * c2 + c2 + f_out * c2 * d + d;
  const int64_t ffn = 2 * d + (d * f + f) + (f * d + d);
  const int64_t conv = 2 * d + (d * 2 * d + 2 * d) + (k * d + d) + 2 * d + (d * d + d);
  int64_t mhsa = 2 * d + 4 * (d * d + d);
  if (config.pos_encoding == PosEncoding::kRelative) mhsa += d * d + 2 * d;
  const int64_t block = 2 * ffn + 2 * conv + mhsa + 2 * d;
  const int64_t upsample = config.time_downsample * d * d + d;
  const int64_t output = d * classes + classes;

  int64_t n = frontend + config.num_blocks * block + upsample + output;
  if (config.integration) {
    for (int b : config.integration->blocks) {
      const std::vector<int64_t> dims = concat_out_dims(config, b);
      n += integration_param_count(config.integration->method, d, config.integration->embedding_dim,
                                   dims);
    }
  }
  return n;
}

double tap_depth(const BlockTapPoint& tap, const ModelConfig& config) {
  validate_tap(tap, config);
  if (config.model_kind == ModelKind::kBlstm) {
    if (tap.block_index == 0 || config.blstm_layers == 1) return 0.0;
    return static_cast<double>(tap.block_index - 1) / (config.blstm_layers - 1);
  }
  if (config.num_blocks == 0) return 0.0;
  return static_cast<double>(tap.block_index) / config.num_blocks;
}

std::vector<BlockTapPoint> all_taps(const ModelConfig& config) {
  std::vector<BlockTapPoint> taps;
  if (config.model_kind == ModelKind::kBlstm) {
    for (int l = 1; l <= config.blstm_layers; ++l) taps.push_back({l, TapModule::kBlockOut});
    return taps;
  }
  taps.push_back({0, TapModule::kBlockOut});
  for (int b = 1; b <= config.num_blocks; ++b) {
    for (TapModule m : {TapModule::kFfn1Out, TapModule::kConv1Out, TapModule::kMhsaIn,
                        TapModule::kMhsaOut, TapModule::kConv2Out, TapModule::kFfn2Out,
                        TapModule::kBlockOut}) {
      taps.push_back({b, m});
    }
  }
  return taps;
}

}  // namespace satconf
