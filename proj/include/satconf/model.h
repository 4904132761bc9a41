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

// satconf/model.h

#ifndef SATCONF_MODEL_H_
#define SATCONF_MODEL_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "satconf/config.h"
#include "satconf/integration.h"
#include "satconf/ops.h"
#include "satconf/rng.h"
#include "satconf/tensor.h"

namespace satconf {

struct LinearParams {
  Tensor w;  // [in, out]
  Tensor b;  // [out]
};

struct LayerNormParams {
  Tensor gamma;
  Tensor beta;
};

struct FfnParams {
  LayerNormParams ln;
  LinearParams lin1;  // d -> ffn_dim
  LinearParams lin2;  // ffn_dim -> d
};

struct ConvModuleParams {
  LayerNormParams ln;
  LinearParams pw_in;  // d -> 2d, halves feed the GLU
  Tensor dw_kernel;    // [k, d]
  Tensor dw_bias;      // [d]
  LayerNormParams ln_inner;
  LinearParams pw_out;  // d -> d
};

struct MhsaParams {
  LayerNormParams ln;
  LinearParams q, k, v, out;
  // Relative positional encoding only.
  Tensor pos_w;  // [d, d], no bias
  Tensor pos_u;  // [d], content bias, split across heads
  Tensor pos_v;  // [d], position bias
};

struct BlockParams {
  FfnParams ffn1;
  ConvModuleParams conv1;
  MhsaParams mhsa;
  ConvModuleParams conv2;
  FfnParams ffn2;
  LayerNormParams ln_final;
  std::optional<IntegrationParams> integration;
};

struct FrontendParams {
  Tensor conv1_kernel;  // [3, 3, 1, c1]
  Tensor conv1_bias;
  Tensor conv2_kernel;  // [3, 3, c1, c2]
  Tensor conv2_bias;
  LinearParams proj;  // ceil(F/2) * c2 -> d
  std::optional<IntegrationParams> integration;
};

struct ModuleOptions {
  double dropout = 0.0;
  bool training = false;
  Rng* rng = nullptr;  // dropout masks; may be null when not training
  double ln_eps = 1e-5;
  int num_heads = 1;
  PosEncoding pos_encoding = PosEncoding::kRelative;
};

// Speaker vector applied to a module input right after that module's LN.
struct SpeakerHook {
  Tensor embedding;  // [D]
  const IntegrationSpec* spec = nullptr;
  const IntegrationParams* params = nullptr;
};

// x + 0.5 * drop(lin2(drop(swish(lin1(LN(x))))))
Tensor ffn_module(const Tensor& x, const FfnParams& p, const ModuleOptions& opt,
                  const SpeakerHook* hook = nullptr);

// x + drop(pw_out(swish(LN_inner(dwconv(glu(pw_in(LN(x))))))))
Tensor conv_module(const Tensor& x, const ConvModuleParams& p, const ModuleOptions& opt,
                   const SpeakerHook* hook = nullptr);

struct MhsaOutput {
  Tensor output;                  // [T, d]
  Tensor normed_input;            // LN(x), before positional encoding and integration
  std::vector<Tensor> attention;  // per head [T, T], only when requested
};

MhsaOutput mhsa_module(const Tensor& x, const MhsaParams& p, const ModuleOptions& opt,
                       const SpeakerHook* hook = nullptr, bool keep_attention = false);

struct BlockOutput {
  Tensor output;
  std::map<TapModule, Tensor> taps;
};

// LN_final(ffn2(conv2(mhsa(conv1(ffn1(x)))))). `hook` (may be null) is
// applied at the module selected by hook->spec->target. Per-head attention
// matrices are stored in `attention` when it is non-null.
BlockOutput conformer_block(const Tensor& x, const BlockParams& p, const ModuleOptions& opt,
                            const SpeakerHook* hook, std::span<const TapModule> taps = {},
                            std::vector<Tensor>* attention = nullptr);

// features [T, F] -> [ceil(T / time_downsample), d]. A concat hook widens
// the projection input, the additive methods act on its output.
Tensor vgg_frontend(const Tensor& features, const FrontendParams& p, int time_downsample,
                    const ModuleOptions& opt, const SpeakerHook* hook = nullptr);

// Output length of the front-end: ceil(T / s).
int64_t downsampled_length(int64_t t, int time_downsample);

struct ForwardOptions {
  bool training = false;
  Rng* rng = nullptr;
  std::vector<BlockTapPoint> taps;
};

struct ForwardResult {
  Tensor logits;  // [T, C]
  std::map<BlockTapPoint, Tensor> taps;
};

using NamedTensor = std::pair<std::string, Tensor>;

// Conformer or BLSTM acoustic model. Parameters are stored as named leaf
// tensors; the structured views (blocks_, frontend_, ...) share storage
// with the registry.
class AcousticModel {
 public:
  // Random initialization. Integration parameters in `config` are created
  // with `integration_init`.
  explicit AcousticModel(const ModelConfig& config, uint64_t seed = 0,
                         IntegrationInit integration_init = IntegrationInit::kWarmStart);

  AcousticModel(const AcousticModel&) = delete;
  AcousticModel& operator=(const AcousticModel&) = delete;
  AcousticModel(AcousticModel&&) = default;
  AcousticModel& operator=(AcousticModel&&) = default;

  // Deep copy with independent storage.
  AcousticModel clone() const;

  // Adds integration parameters to a model without them, keeping every
  // existing parameter. Used to start SAT from a pretrained model.
  void attach_integration(const IntegrationSpec& spec, IntegrationInit init, uint64_t seed);

  // embedding is required iff the config has an integration spec.
  ForwardResult forward(const Tensor& features, const Tensor* embedding = nullptr,
                        const ForwardOptions& options = {}) const;

  const ModelConfig& config() const { return config_; }
  const std::vector<NamedTensor>& parameters() const { return params_; }
  Tensor parameter(const std::string& name) const;
  bool has_parameter(const std::string& name) const;
  int64_t num_parameters() const;

  static bool is_integration_parameter(const std::string& name);

  // Per-head attention matrices of block `block` (>= 1); conformer only.
  std::vector<Tensor> block_attention(const Tensor& features, const Tensor* embedding,
                                      int block) const;

  const std::vector<BlockParams>& blocks() const { return blocks_; }
  const FrontendParams& frontend() const { return frontend_; }

 private:
  Tensor add_param(const std::string& name, Shape shape, const std::vector<double>& data);
  void build_conformer(Rng& rng);
  void build_blstm(Rng& rng);
  void build_integration(IntegrationInit init, Rng& rng);
  ModuleOptions module_options(bool training, Rng* rng) const;
  Tensor check_embedding(const Tensor* embedding) const;
  ForwardResult forward_conformer(const Tensor& features, const Tensor& embedding,
                                  const ForwardOptions& options, int attention_block,
                                  std::vector<Tensor>* attention) const;
  ForwardResult forward_blstm(const Tensor& features, const ForwardOptions& options) const;

  ModelConfig config_;
  std::vector<NamedTensor> params_;
  std::map<std::string, size_t> index_;

  FrontendParams frontend_;
  std::vector<BlockParams> blocks_;
  Tensor up_kernel_;  // [s, d, d]
  Tensor up_bias_;
  std::vector<std::vector<LstmParams>> lstm_;  // per layer (forward, backward)
  LinearParams output_;
};

// Output widths of the projections fed by a concat attachment at `block`.
std::vector<int64_t> concat_out_dims(const ModelConfig& config, int block);

// Closed-form count of trainable scalars, including integration parameters.
int64_t count_parameters(const ModelConfig& config);

// Relative depth of a tap: block / num_blocks for the conformer (block 0 is
// the front-end), (layer - 1) / (layers - 1) for the BLSTM with layer 0 the
// input features at depth 0.
double tap_depth(const BlockTapPoint& tap, const ModelConfig& config);

// Every tap of a model: block 0 plus all modules of every block (conformer)
// or every layer (BLSTM).
std::vector<BlockTapPoint> all_taps(const ModelConfig& config);

}  // namespace satconf

#endif  // SATCONF_MODEL_H_
