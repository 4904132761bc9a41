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

// satconf/src/config.cc

#include "satconf/config.h"

#include <algorithm>
#include <set>

#include "satconf/errors.h"

namespace satconf {

namespace {

template <typename E>
struct Names {
  E value;
  const char* name;
};

constexpr Names<IntegrationMethod> kMethodNames[] = {
    {IntegrationMethod::kConcat, "concat"},
    {IntegrationMethod::kSimpleAdd, "simple_add"},
    {IntegrationMethod::kComplexAdd, "complex_add"},
    {IntegrationMethod::kGatedAdd, "gated_add"},
    {IntegrationMethod::kWeightedSimpleAdd, "weighted_simple_add"},
};
constexpr Names<IntegrationTarget> kTargetNames[] = {
    {IntegrationTarget::kFfn1In, "ffn1_in"},  {IntegrationTarget::kConv1In, "conv1_in"},
    {IntegrationTarget::kMhsaIn, "mhsa_in"},  {IntegrationTarget::kConv2In, "conv2_in"},
    {IntegrationTarget::kFfn2In, "ffn2_in"},
};
constexpr Names<PosEncoding> kPosNames[] = {
    {PosEncoding::kRelative, "relative"},
    {PosEncoding::kAbsolute, "absolute"},
    {PosEncoding::kNone, "none"},
};
constexpr Names<ModelKind> kKindNames[] = {
    {ModelKind::kConformer, "conformer"},
    {ModelKind::kBlstm, "blstm"},
};
constexpr Names<TapModule> kTapNames[] = {
    {TapModule::kFfn1Out, "ffn1_out"}, {TapModule::kConv1Out, "conv1_out"},
    {TapModule::kMhsaOut, "mhsa_out"}, {TapModule::kConv2Out, "conv2_out"},
    {TapModule::kFfn2Out, "ffn2_out"}, {TapModule::kMhsaIn, "mhsa_in"},
    {TapModule::kBlockOut, "block_out"},
};

template <typename E, size_t N>
std::string name_of(const Names<E> (&table)[N], E value) {
  for (const auto& entry : table) {
    if (entry.value == value) return entry.name;
  }
  return "?";
}

template <typename E, size_t N>
E parse_name(const Names<E> (&table)[N], const std::string& s, const char* what) {
  for (const auto& entry : table) {
    if (s == entry.name) return entry.value;
  }
  std::string options;
  for (const auto& entry : table) options += std::string(options.empty() ? "" : ", ") + entry.name;
  throw ConfigError(std::string("unknown ") + what + " '" + s + "' (expected one of " +
                    options + ")");
}

}  // namespace

std::string to_string(IntegrationMethod m) { return name_of(kMethodNames, m); }
std::string to_string(IntegrationTarget t) { return name_of(kTargetNames, t); }
std::string to_string(PosEncoding p) { return name_of(kPosNames, p); }
std::string to_string(ModelKind k) { return name_of(kKindNames, k); }
std::string to_string(TapModule m) { return name_of(kTapNames, m); }
IntegrationMethod parse_method(const std::string& s) {
  return parse_name(kMethodNames, s, "integration method");
}
IntegrationTarget parse_target(const std::string& s) {
  return parse_name(kTargetNames, s, "integration target");
}
PosEncoding parse_pos_encoding(const std::string& s) {
  return parse_name(kPosNames, s, "positional encoding");
}
ModelKind parse_model_kind(const std::string& s) { return parse_name(kKindNames, s, "model kind"); }
TapModule parse_tap_module(const std::string& s) { return parse_name(kTapNames, s, "tap module"); }

const std::vector<IntegrationMethod>& all_methods() {
  static const std::vector<IntegrationMethod> kAll = {
      IntegrationMethod::kConcat, IntegrationMethod::kSimpleAdd, IntegrationMethod::kComplexAdd,
      IntegrationMethod::kGatedAdd, IntegrationMethod::kWeightedSimpleAdd};
  return kAll;
}

void IntegrationSpec::validate(int num_blocks) const {
  if (!(threshold_k >= 0.0 && threshold_k <= 1.0)) {
    throw ConfigError("integration.threshold_k must lie in [0,1]");
  }
  if (blocks.empty()) throw ConfigError("integration.blocks must be non-empty");
  std::set<int> seen;
  for (int b : blocks) {
    if (b < 0 || b > num_blocks) {
      throw ConfigError("integration.blocks: block " + std::to_string(b) + " outside [0," +
                        std::to_string(num_blocks) + "]");
    }
    if (!seen.insert(b).second) {
      throw ConfigError("integration.blocks: duplicate block " + std::to_string(b));
    }
  }
  if (embedding_dim < 1) throw ConfigError("integration.embedding_dim must be >= 1");
}

bool IntegrationSpec::attached(int block) const {
  return std::find(blocks.begin(), blocks.end(), block) != blocks.end();
}

void ModelConfig::validate() const {
  if (feature_dim < 1) throw ConfigError("model.feature_dim must be >= 1");
  if (num_output_classes < 1) throw ConfigError("model.num_output_classes must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model.dropout must lie in [0,1)");
  if (!(ln_eps > 0.0)) throw ConfigError("model.ln_eps must be positive");
  if (model_kind == ModelKind::kBlstm) {
    if (blstm_layers < 1) throw ConfigError("model.blstm_layers must be >= 1");
    if (blstm_hidden < 2 || blstm_hidden % 2 != 0) {
      throw ConfigError("model.blstm_hidden must be even and >= 2");
    }
    if (integration) throw ConfigError("model.integration is only supported for conformer models");
    return;
  }
  if (num_blocks < 0) throw ConfigError("model.num_blocks must be >= 0");
  if (att_dim < 1) throw ConfigError("model.att_dim must be >= 1");
  if (num_heads < 1 || att_dim % num_heads != 0) {
    throw ConfigError("model.num_heads must divide model.att_dim");
  }
  if (ffn_dim < att_dim) throw ConfigError("model.ffn_dim must be >= model.att_dim");
  if (conv_kernel < 1 || conv_kernel % 2 == 0) throw ConfigError("model.conv_kernel must be odd");
  if (time_downsample < 1) throw ConfigError("model.time_downsample must be >= 1");
  if (vgg_channels.size() != 2 || vgg_channels[0] < 1 || vgg_channels[1] < 1) {
    throw ConfigError("model.vgg_channels must hold two positive channel counts");
  }
  if (integration) integration->validate(num_blocks);
}

BlockTapPoint BlockTapPoint::normalized() const {
  BlockTapPoint t = *this;
  if (t.block_index == 0) t.module = TapModule::kBlockOut;
  return t;
}

std::string BlockTapPoint::label() const {
  const BlockTapPoint t = normalized();
  if (t.block_index == 0) return "block0";
  return "block" + std::to_string(t.block_index) + "." + to_string(t.module);
}

BlockTapPoint parse_tap_label(const std::string& label) {
  if (label.rfind("block", 0) != 0) throw ConfigError("tap label '" + label + "': expected blockN");
  const size_t dot = label.find('.');
  const std::string num = label.substr(5, dot == std::string::npos ? std::string::npos : dot - 5);
  if (num.empty() || num.find_first_not_of("0123456789") != std::string::npos || num.size() > 4) {
    throw ConfigError("tap label '" + label + "': bad block index");
  }
  BlockTapPoint t;
  t.block_index = std::stoi(num);
  if (dot != std::string::npos) t.module = parse_tap_module(label.substr(dot + 1));
  return t.normalized();
}

void validate_tap(const BlockTapPoint& tap, const ModelConfig& config) {
  const int limit =
      config.model_kind == ModelKind::kBlstm ? config.blstm_layers : config.num_blocks;
  if (tap.block_index < 0 || tap.block_index > limit) {
    throw ConfigError("tap block " + std::to_string(tap.block_index) + " outside [0," +
                      std::to_string(limit) + "]");
  }
  if (config.model_kind == ModelKind::kBlstm && tap.block_index > 0 &&
      tap.module != TapModule::kBlockOut) {
    throw ConfigError("BLSTM taps only support block_out, got " + to_string(tap.module));
  }
}

namespace json_util {

void check_keys(const Json& j, const std::string& path, const std::vector<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(path + ": expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw ConfigError(path + "." + it.key() + ": unknown key");
    }
  }
}

int get_int(const Json& j, const std::string& key, const std::string& path, int fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError(path + "." + key + ": expected an integer");
  return v.get<int>();
}

double get_double(const Json& j, const std::string& key, const std::string& path,
                  double fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_number()) throw ConfigError(path + "." + key + ": expected a number");
  return v.get<double>();
}

bool get_bool(const Json& j, const std::string& key, const std::string& path, bool fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_boolean()) throw ConfigError(path + "." + key + ": expected a boolean");
  return v.get<bool>();
}

std::string get_string(const Json& j, const std::string& key, const std::string& path,
                       const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_string()) throw ConfigError(path + "." + key + ": expected a string");
  return v.get<std::string>();
}

std::vector<int> get_int_list(const Json& j, const std::string& key, const std::string& path,
                              const std::vector<int>& fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_array()) throw ConfigError(path + "." + key + ": expected an array of integers");
  std::vector<int> out;
  for (const Json& e : v) {
    if (!e.is_number_integer()) throw ConfigError(path + "." + key + ": expected integers");
    out.push_back(e.get<int>());
  }
  return out;
}

}  // namespace json_util

using namespace json_util;

Json to_json(const IntegrationSpec& spec) {
  return Json{{"method", to_string(spec.method)},
              {"blocks", spec.blocks},
              {"target", to_string(spec.target)},
              {"threshold_k", spec.threshold_k},
              {"embedding_dim", spec.embedding_dim},
              {"straight_through", spec.straight_through}};
}

Json to_json(const ModelConfig& c) {
  Json j{{"model_kind", to_string(c.model_kind)},
         {"num_blocks", c.num_blocks},
         {"att_dim", c.att_dim},
         {"num_heads", c.num_heads},
         {"ffn_dim", c.ffn_dim},
         {"conv_kernel", c.conv_kernel},
         {"dropout", c.dropout},
         {"time_downsample", c.time_downsample},
         {"feature_dim", c.feature_dim},
         {"num_output_classes", c.num_output_classes},
         {"pos_encoding", to_string(c.pos_encoding)},
         {"ln_eps", c.ln_eps},
         {"vgg_channels", c.vgg_channels},
         {"blstm_layers", c.blstm_layers},
         {"blstm_hidden", c.blstm_hidden}};
  j["integration"] = c.integration ? to_json(*c.integration) : Json(nullptr);
  return j;
}

IntegrationSpec integration_from_json(const Json& j, const std::string& path) {
  check_keys(j, path,
             {"method", "blocks", "target", "threshold_k", "embedding_dim", "straight_through"});
  IntegrationSpec s;
  try {
    s.method = parse_method(get_string(j, "method", path, to_string(s.method)));
  } catch (const ConfigError&) {
    throw ConfigError(path + ".method: unknown integration method '" +
                      j.value("method", std::string()) + "'");
  }
  s.blocks = get_int_list(j, "blocks", path, s.blocks);
  try {
    s.target = parse_target(get_string(j, "target", path, to_string(s.target)));
  } catch (const ConfigError&) {
    throw ConfigError(path + ".target: unknown integration target");
  }
  s.threshold_k = get_double(j, "threshold_k", path, s.threshold_k);
  s.embedding_dim = get_int(j, "embedding_dim", path, s.embedding_dim);
  s.straight_through = get_bool(j, "straight_through", path, s.straight_through);
  return s;
}

ModelConfig model_config_from_json(const Json& j, const std::string& path) {
  check_keys(j, path,
             {"model_kind", "num_blocks", "att_dim", "num_heads", "ffn_dim", "conv_kernel",
              "dropout", "time_downsample", "feature_dim", "num_output_classes", "pos_encoding",
              "ln_eps", "vgg_channels", "blstm_layers", "blstm_hidden", "integration"});
  ModelConfig c;
  try {
    c.model_kind = parse_model_kind(get_string(j, "model_kind", path, to_string(c.model_kind)));
  } catch (const ConfigError&) {
    throw ConfigError(path + ".model_kind: expected 'conformer' or 'blstm'");
  }
  c.num_blocks = get_int(j, "num_blocks", path, c.num_blocks);
  c.att_dim = get_int(j, "att_dim", path, c.att_dim);
  c.num_heads = get_int(j, "num_heads", path, c.num_heads);
  c.ffn_dim = get_int(j, "ffn_dim", path, c.ffn_dim);
  c.conv_kernel = get_int(j, "conv_kernel", path, c.conv_kernel);
  c.dropout = get_double(j, "dropout", path, c.dropout);
  c.time_downsample = get_int(j, "time_downsample", path, c.time_downsample);
  c.feature_dim = get_int(j, "feature_dim", path, c.feature_dim);
  c.num_output_classes = get_int(j, "num_output_classes", path, c.num_output_classes);
  try {
    c.pos_encoding =
        parse_pos_encoding(get_string(j, "pos_encoding", path, to_string(c.pos_encoding)));
  } catch (const ConfigError&) {
    throw ConfigError(path + ".pos_encoding: expected 'relative', 'absolute' or 'none'");
  }
  c.ln_eps = get_double(j, "ln_eps", path, c.ln_eps);
  c.vgg_channels = get_int_list(j, "vgg_channels", path, c.vgg_channels);
  c.blstm_layers = get_int(j, "blstm_layers", path, c.blstm_layers);
  c.blstm_hidden = get_int(j, "blstm_hidden", path, c.blstm_hidden);
  if (j.contains("integration") && !j.at("integration").is_null()) {
    c.integration = integration_from_json(j.at("integration"), path + ".integration");
  }
  return c;
}

ModelConfig desk_model_config() {
  ModelConfig c;
  c.num_blocks = 4;
  c.att_dim = 32;
  c.num_heads = 4;
  c.ffn_dim = 64;
  c.conv_kernel = 7;
  c.dropout = 0.1;
  c.time_downsample = 3;
  c.feature_dim = 16;
  c.num_output_classes = 8;
  c.vgg_channels = {4, 8};
  c.blstm_layers = 6;
  c.blstm_hidden = 32;
  return c;
}

}  // namespace satconf
