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

// satconf/pooling.h

#ifndef SATCONF_POOLING_H_
#define SATCONF_POOLING_H_

#include <cstdint>

#include "satconf/rng.h"
#include "satconf/tensor.h"

namespace satconf {

// s_t = u . tanh(A^T h_t + a), alpha = softmax(s), out = sum_t alpha_t h_t.
struct AttentivePoolParams {
  Tensor a_w;  // [d, hidden]
  Tensor a_b;  // [hidden]
  Tensor u;    // [hidden]
};

AttentivePoolParams make_attentive_pool(int64_t dim, int64_t hidden, Rng& rng);
int64_t attentive_pool_param_count(int64_t dim, int64_t hidden);

struct PoolOutput {
  Tensor pooled;  // [d]
  Tensor alpha;   // [T]
};

PoolOutput attentive_pool_weights(const Tensor& frames, const AttentivePoolParams& p);
Tensor attentive_pool(const Tensor& frames, const AttentivePoolParams& p);

}  // namespace satconf

#endif  // SATCONF_POOLING_H_
