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

// satconf/checkpoint.h

#ifndef SATCONF_CHECKPOINT_H_
#define SATCONF_CHECKPOINT_H_

#include <string>
#include <string_view>

#include "satconf/model.h"

namespace satconf {

// Binary layout, little endian:
//   "SATCKPT1"                  8-byte magic
//   u32 version                 (kCheckpointVersion)
//   u64 n, n bytes              canonical JSON of the ModelConfig
//   u64 count                   number of tensors, then per tensor:
//     u32 n, n bytes name; u32 rank; rank x i64 dims; numel x f32 values
inline constexpr uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const AcousticModel& model);
AcousticModel decode_checkpoint(std::string_view bytes);

void save_checkpoint(const AcousticModel& model, const std::string& path);
AcousticModel load_checkpoint(const std::string& path);

// Rounds every parameter to the nearest 32-bit real, so the in-memory
// model equals what a checkpoint stores.
void round_to_f32(const AcousticModel& model);

// FNV-1a over parameter names, shapes and 64-bit values, as 16 hex digits.
std::string model_checksum(const AcousticModel& model);

// FNV-1a of a byte string, as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace satconf

#endif  // SATCONF_CHECKPOINT_H_
