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

// satconf/src/checkpoint.cc

#include "satconf/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "satconf/errors.h"

namespace satconf {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'A', 'T', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string_view take(size_t n) {
    need(n);
    std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(size_t n) const {
    if (bytes_.size() - pos_ < n) throw UsageError("checkpoint truncated");
  }

  std::string_view bytes_;
  size_t pos_ = 0;
};

uint64_t fnv1a(uint64_t h, const void* data, size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex16(uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) s[static_cast<size_t>(i)] = digits[h & 0xf];
  return s;
}

}  // namespace

std::string encode_checkpoint(const AcousticModel& model) {
  std::string out(kMagic, sizeof(kMagic));
  put<uint32_t>(out, kCheckpointVersion);
  const std::string config = to_json(model.config()).dump();
  put<uint64_t>(out, config.size());
  out += config;
  put<uint64_t>(out, model.parameters().size());
  for (const auto& [name, t] : model.parameters()) {
    put<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out += name;
    put<uint32_t>(out, static_cast<uint32_t>(t.rank()));
    for (int64_t dim : t.shape()) put<int64_t>(out, dim);
    for (double v : t.data()) put<float>(out, static_cast<float>(v));
  }
  return out;
}

AcousticModel decode_checkpoint(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    throw UsageError("not a satconf checkpoint (bad magic)");
  }
  const uint32_t version = in.get<uint32_t>();
  if (version != kCheckpointVersion) {
    throw UsageError("unsupported checkpoint version " + std::to_string(version));
  }
  const uint64_t config_len = in.get<uint64_t>();
  const std::string_view config_text = in.take(config_len);
  Json j;
  try {
    j = Json::parse(config_text);
  } catch (const Json::exception& e) {
    throw UsageError(std::string("checkpoint config is not valid JSON: ") + e.what());
  }
  AcousticModel model(model_config_from_json(j), 0);

  const uint64_t count = in.get<uint64_t>();
  if (count != model.parameters().size()) {
    throw ConfigError("checkpoint holds " + std::to_string(count) + " tensors, config implies " +
                      std::to_string(model.parameters().size()));
  }
  std::set<std::string> seen;
  for (uint64_t i = 0; i < count; ++i) {
    const std::string name(in.take(in.get<uint32_t>()));
    if (!model.has_parameter(name)) throw ConfigError("checkpoint tensor " + name + " unknown");
    if (!seen.insert(name).second) throw ConfigError("checkpoint tensor " + name + " repeated");
    const uint32_t rank = in.get<uint32_t>();
    Shape shape(rank);
    for (auto& dim : shape) dim = in.get<int64_t>();
    Tensor t = model.parameter(name);
    if (shape != t.shape()) {
      throw ConfigError("checkpoint tensor " + name + " has shape " + shape_str(shape) +
                        ", config implies " + shape_str(t.shape()));
    }
    std::vector<double> values(static_cast<size_t>(shape_numel(shape)));
    for (double& v : values) v = static_cast<double>(in.get<float>());
    t.assign(shape, std::move(values));
  }
  if (!in.done()) throw UsageError("trailing bytes after checkpoint tensors");
  return model;
}

void save_checkpoint(const AcousticModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path);
  const std::string bytes = encode_checkpoint(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw UsageError("failed writing " + path);
}

AcousticModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

void round_to_f32(const AcousticModel& model) {
  for (const auto& [name, t] : model.parameters()) {
    Tensor h = t;
    for (double& v : h.mutable_data()) v = static_cast<double>(static_cast<float>(v));
  }
}

std::string model_checksum(const AcousticModel& model) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [name, t] : model.parameters()) {
    h = fnv1a(h, name.data(), name.size());
    for (int64_t dim : t.shape()) h = fnv1a(h, &dim, sizeof(dim));
    h = fnv1a(h, t.data().data(), t.data().size() * sizeof(double));
  }
  return hex16(h);
}

std::string fnv1a_hex(std::string_view bytes) {
  return hex16(fnv1a(0xcbf29ce484222325ULL, bytes.data(), bytes.size()));
}

}  // namespace satconf
