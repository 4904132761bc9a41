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

// satconf/src/pooling.cc

#include "satconf/pooling.h"

#include <cmath>

#include "satconf/errors.h"
#include "satconf/ops.h"

namespace satconf {

AttentivePoolParams make_attentive_pool(int64_t dim, int64_t hidden, Rng& rng) {
  auto uniform = [&](Shape shape, double bound) {
    std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
    for (double& x : v) x = rng.uniform(-bound, bound);
    return Tensor(std::move(shape), std::move(v), true);
  };
  AttentivePoolParams p;
  p.a_w = uniform({dim, hidden}, 1.0 / std::sqrt(static_cast<double>(dim)));
  p.a_b = Tensor::zeros({hidden}, true);
  p.u = uniform({hidden}, 1.0 / std::sqrt(static_cast<double>(hidden)));
  return p;
}

int64_t attentive_pool_param_count(int64_t dim, int64_t hidden) {
  return dim * hidden + 2 * hidden;
}

PoolOutput attentive_pool_weights(const Tensor& frames, const AttentivePoolParams& p) {
  if (frames.rank() != 2 || frames.size(0) < 1) {
    throw DimensionError("attentive_pool: expected [T>=1, d], got " + shape_str(frames.shape()));
  }
  const Tensor scores = matvec(tanh(linear(frames, p.a_w, p.a_b)), p.u);  // [T]
  const Tensor alpha = softmax(scores, 0);
  return {weighted_sum_rows(frames, alpha), alpha};
}

Tensor attentive_pool(const Tensor& frames, const AttentivePoolParams& p) {
  return attentive_pool_weights(frames, p).pooled;
}

}  // namespace satconf
