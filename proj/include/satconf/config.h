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

// satconf/config.h

#ifndef SATCONF_CONFIG_H_
#define SATCONF_CONFIG_H_

#include <compare>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace satconf {

using Json = nlohmann::json;

enum class IntegrationMethod { kConcat, kSimpleAdd, kComplexAdd, kGatedAdd, kWeightedSimpleAdd };

// Module whose input receives the speaker vector (after that module's LN).
enum class IntegrationTarget { kFfn1In, kConv1In, kMhsaIn, kConv2In, kFfn2In };

enum class PosEncoding { kRelative, kAbsolute, kNone };
enum class ModelKind { kConformer, kBlstm };

std::string to_string(IntegrationMethod m);
std::string to_string(IntegrationTarget t);
std::string to_string(PosEncoding p);
std::string to_string(ModelKind k);
IntegrationMethod parse_method(const std::string& s);
IntegrationTarget parse_target(const std::string& s);
PosEncoding parse_pos_encoding(const std::string& s);
ModelKind parse_model_kind(const std::string& s);
const std::vector<IntegrationMethod>& all_methods();

struct IntegrationSpec {
  IntegrationMethod method = IntegrationMethod::kWeightedSimpleAdd;
  std::vector<int> blocks{1};
  IntegrationTarget target = IntegrationTarget::kMhsaIn;
  double threshold_k = 0.4;
  int embedding_dim = 200;
  // Weighted-Simple-Add: pass gradient through thresholded weights.
  bool straight_through = false;

  void validate(int num_blocks) const;
  bool attached(int block) const;
  bool operator==(const IntegrationSpec&) const = default;
};

struct ModelConfig {
  ModelKind model_kind = ModelKind::kConformer;
  int num_blocks = 12;
  int att_dim = 384;
  int num_heads = 6;
  int ffn_dim = 1536;
  int conv_kernel = 31;
  double dropout = 0.1;
  int time_downsample = 3;
  int feature_dim = 40;
  int num_output_classes = 9001;
  PosEncoding pos_encoding = PosEncoding::kRelative;
  double ln_eps = 1e-5;
  std::vector<int> vgg_channels{32, 64};
  int blstm_layers = 6;
  int blstm_hidden = 1024;  // layer output width (two directions)
  std::optional<IntegrationSpec> integration;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Tap on an intermediate representation. block_index 0 is the front-end
// output (conformer) or the input features (BLSTM); the module is ignored
// there. For the BLSTM, block_index l >= 1 is the output of layer l.
enum class TapModule { kFfn1Out, kConv1Out, kMhsaOut, kConv2Out, kFfn2Out, kMhsaIn, kBlockOut };

std::string to_string(TapModule m);
TapModule parse_tap_module(const std::string& s);

struct BlockTapPoint {
  int block_index = 0;
  TapModule module = TapModule::kBlockOut;

  // Canonical form: the module is normalized to kBlockOut at block 0.
  BlockTapPoint normalized() const;
  std::string label() const;
  auto operator<=>(const BlockTapPoint&) const = default;
};

// Inverse of label(): "block0", "block3" (block output), "block3.mhsa_out".
BlockTapPoint parse_tap_label(const std::string& label);

void validate_tap(const BlockTapPoint& tap, const ModelConfig& config);

// Canonical JSON (sorted keys). Parsing rejects unknown keys and names the
// first offending key in the ConfigError.
Json to_json(const IntegrationSpec& spec);
Json to_json(const ModelConfig& config);
IntegrationSpec integration_from_json(const Json& j, const std::string& path = "integration");
ModelConfig model_config_from_json(const Json& j, const std::string& path = "model");

// Small desk-scale configuration used by tests and CLI defaults.
ModelConfig desk_model_config();

namespace json_util {

// Throws ConfigError("<path>.<key>: ...") for keys outside `allowed`.
void check_keys(const Json& j, const std::string& path, const std::vector<std::string>& allowed);
int get_int(const Json& j, const std::string& key, const std::string& path, int fallback);
double get_double(const Json& j, const std::string& key, const std::string& path,
                  double fallback);
bool get_bool(const Json& j, const std::string& key, const std::string& path, bool fallback);
std::string get_string(const Json& j, const std::string& key, const std::string& path,
                       const std::string& fallback);
std::vector<int> get_int_list(const Json& j, const std::string& key, const std::string& path,
                              const std::vector<int>& fallback);

}  // namespace json_util

}  // namespace satconf

#endif  // SATCONF_CONFIG_H_
