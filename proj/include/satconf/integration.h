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

// satconf/integration.h

#ifndef SATCONF_INTEGRATION_H_
#define SATCONF_INTEGRATION_H_

#include <cstdint>
#include <span>
#include <vector>

#include "satconf/config.h"
#include "satconf/rng.h"
#include "satconf/tensor.h"

namespace satconf {

// Trainable parameters of one attachment point. Which fields are defined
// depends on the method:
//   simple_add           u [D,d], b1 [d] (the bias b)
//   complex_add          w [d,d], u [D,d], b1 [d]
//   gated_add            w [D,d], u [D,d], b1 [d], b2 [d]
//   weighted_simple_add  w [D,d], u [D,d], b1 [d], b2 [d]
//   concat               concat_rows[i] [D, out_i]: the rows appended to the
//                        i-th downstream input projection, which is
//                        thereby widened from d to d + D inputs
struct IntegrationParams {
  IntegrationMethod method = IntegrationMethod::kSimpleAdd;
  Tensor w, u, b1, b2;
  std::vector<Tensor> concat_rows;
};

enum class IntegrationInit {
  // Output equals the input for any v: additive paths start at zero,
  // complex_add W = I, gated_add b1 = 1.
  kWarmStart,
  // Uniform(+-1/sqrt(fan_in)) for every matrix, biases as for warm start.
  kRandom,
};

// `concat_out_dims` lists the output widths of the projections fed by the
// concatenated input; it is ignored by the other methods.
IntegrationParams make_integration_params(IntegrationMethod method, int64_t att_dim,
                                          int64_t embedding_dim, IntegrationInit init,
                                          Rng& rng,
                                          std::span<const int64_t> concat_out_dims = {});

// Scalars held by IntegrationParams.
int64_t integration_param_count(IntegrationMethod method, int64_t att_dim,
                                int64_t embedding_dim,
                                std::span<const int64_t> concat_out_dims = {});

// Input projection applied to a (possibly concatenated) module input:
// uses the weight widened by the concat rows when `extra_rows` is defined.
Tensor widened_linear(const Tensor& x, const Tensor& w, const Tensor& b,
                      const Tensor& extra_rows);

// z~_t = [z_t; v]
Tensor integrate_concat(const Tensor& z, const Tensor& v);

// z~_t = z_t + U v + b
Tensor integrate_simple_add(const Tensor& z, const Tensor& v, const Tensor& u, const Tensor& b);

// z~_t = W z_t + U v + b (no residual term)
Tensor integrate_complex_add(const Tensor& z, const Tensor& v, const Tensor& w, const Tensor& u,
                             const Tensor& b);

// gamma = tanh(W v) + b1, beta = tanh(U v) + b2, z~_t = z_t * gamma + beta
Tensor integrate_gated_add(const Tensor& z, const Tensor& v, const Tensor& w, const Tensor& u,
                           const Tensor& b1, const Tensor& b2);

struct WeightedAddResult {
  Tensor output;   // [T, d]
  Tensor weights;  // [T], after thresholding
};

// w_t = sigmoid(z_t . (tanh(W v) + b1)), zeroed below k;
// z~_t = z_t + w_t (U v + b2). Frames with w_t = 0 pass through bit-exactly.
WeightedAddResult integrate_weighted_simple_add(const Tensor& z, const Tensor& v,
                                                const Tensor& w, const Tensor& u,
                                                const Tensor& b1, const Tensor& b2, double k,
                                                bool straight_through = false);

// Dispatches on params.method. For concat the result is [T, d + D].
Tensor apply_integration(const Tensor& z, const Tensor& v, const IntegrationSpec& spec,
                         const IntegrationParams& params);

}  // namespace satconf

#endif  // SATCONF_INTEGRATION_H_
