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

// satconf/src/integration.cc

#include "satconf/integration.h"

#include <cmath>

#include "satconf/errors.h"
#include "satconf/ops.h"

namespace satconf {

namespace {

Tensor uniform_matrix(int64_t rows, int64_t cols, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  std::vector<double> values(static_cast<size_t>(rows * cols));
  for (double& x : values) x = rng.uniform(-bound, bound);
  return Tensor({rows, cols}, std::move(values), true);
}

Tensor identity(int64_t d) {
  Tensor t = Tensor::zeros({d, d}, true);
  auto data = t.mutable_data();
  for (int64_t i = 0; i < d; ++i) data[static_cast<size_t>(i * d + i)] = 1.0;
  return t;
}

void check_inputs(const Tensor& z, const Tensor& v, const char* op) {
  if (z.rank() != 2 || v.rank() != 1) {
    throw DimensionError(std::string(op) + ": z " + shape_str(z.shape()) + ", v " +
                         shape_str(v.shape()) + " (expected [T,d] and [D])");
  }
}

}  // namespace

IntegrationParams make_integration_params(IntegrationMethod method, int64_t att_dim,
                                          int64_t embedding_dim, IntegrationInit init,
                                          Rng& rng, std::span<const int64_t> concat_out_dims) {
  const int64_t d = att_dim, dv = embedding_dim;
  const bool warm = init == IntegrationInit::kWarmStart;
  auto additive = [&](int64_t rows) {
    return warm ? Tensor::zeros({rows, d}, true) : uniform_matrix(rows, d, rng);
  };
  IntegrationParams p;
  p.method = method;
  switch (method) {
    case IntegrationMethod::kConcat:
      for (int64_t out : concat_out_dims) {
        p.concat_rows.push_back(warm ? Tensor::zeros({dv, out}, true)
                                     : uniform_matrix(dv, out, rng));
      }
      break;
    case IntegrationMethod::kSimpleAdd:
      p.u = additive(dv);
      p.b1 = Tensor::zeros({d}, true);
      break;
    case IntegrationMethod::kComplexAdd:
      p.w = warm ? identity(d) : uniform_matrix(d, d, rng);
      p.u = additive(dv);
      p.b1 = Tensor::zeros({d}, true);
      break;
    case IntegrationMethod::kGatedAdd:
      p.w = additive(dv);
      p.u = additive(dv);
      p.b1 = Tensor::full({d}, 1.0, true);
      p.b2 = Tensor::zeros({d}, true);
      break;
    case IntegrationMethod::kWeightedSimpleAdd:
      // Zero scores give every frame sigmoid(0) = 0.5, above the threshold.
      p.w = additive(dv);
      p.u = additive(dv);
      p.b1 = Tensor::zeros({d}, true);
      p.b2 = Tensor::zeros({d}, true);
      break;
  }
  return p;
}

int64_t integration_param_count(IntegrationMethod method, int64_t d, int64_t dv,
                                std::span<const int64_t> concat_out_dims) {
  switch (method) {
    case IntegrationMethod::kConcat: {
      int64_t n = 0;
      for (int64_t out : concat_out_dims) n += dv * out;
      return n;
    }
    case IntegrationMethod::kSimpleAdd: return dv * d + d;
    case IntegrationMethod::kComplexAdd: return d * d + dv * d + d;
    case IntegrationMethod::kGatedAdd:
    case IntegrationMethod::kWeightedSimpleAdd: return 2 * dv * d + 2 * d;
  }
  return 0;
}

Tensor integrate_concat(const Tensor& z, const Tensor& v) {
  check_inputs(z, v, "integrate_concat");
  const Tensor parts[] = {z, broadcast_rows(v, z.size(0))};
  return concat_cols(parts);
}

Tensor integrate_simple_add(const Tensor& z, const Tensor& v, const Tensor& u, const Tensor& b) {
  check_inputs(z, v, "integrate_simple_add");
  const Tensor shift = linear(v, u, b);
  return add(z, broadcast_rows(shift, z.size(0)));
}

Tensor integrate_complex_add(const Tensor& z, const Tensor& v, const Tensor& w, const Tensor& u,
                             const Tensor& b) {
  check_inputs(z, v, "integrate_complex_add");
  const Tensor shift = linear(v, u, b);
  return add(linear(z, w), broadcast_rows(shift, z.size(0)));
}

Tensor integrate_gated_add(const Tensor& z, const Tensor& v, const Tensor& w, const Tensor& u,
                           const Tensor& b1, const Tensor& b2) {
  check_inputs(z, v, "integrate_gated_add");
  const int64_t t_len = z.size(0);
  const Tensor gamma = add(tanh(linear(v, w)), b1);
  const Tensor beta = add(tanh(linear(v, u)), b2);
  return add(mul(z, broadcast_rows(gamma, t_len)), broadcast_rows(beta, t_len));
}

WeightedAddResult integrate_weighted_simple_add(const Tensor& z, const Tensor& v,
                                                const Tensor& w, const Tensor& u,
                                                const Tensor& b1, const Tensor& b2, double k,
                                                bool straight_through) {
  check_inputs(z, v, "integrate_weighted_simple_add");
  if (!(k >= 0.0 && k <= 1.0)) throw ConfigError("threshold k must lie in [0,1]");
  const Tensor query = add(tanh(linear(v, w)), b1);
  const Tensor weights = threshold_zero(sigmoid(matvec(z, query)), k, straight_through);
  const Tensor shift = linear(v, u, b2);
  return {weighted_row_add(z, weights, shift), weights};
}

Tensor widened_linear(const Tensor& x, const Tensor& w, const Tensor& b,
                      const Tensor& extra_rows) {
  if (!extra_rows.defined()) return linear(x, w, b);
  const Tensor parts[] = {w, extra_rows};
  return linear(x, concat_rows(parts), b);
}

Tensor apply_integration(const Tensor& z, const Tensor& v, const IntegrationSpec& spec,
                         const IntegrationParams& p) {
  switch (p.method) {
    case IntegrationMethod::kConcat:
      return integrate_concat(z, v);
    case IntegrationMethod::kSimpleAdd:
      return integrate_simple_add(z, v, p.u, p.b1);
    case IntegrationMethod::kComplexAdd:
      return integrate_complex_add(z, v, p.w, p.u, p.b1);
    case IntegrationMethod::kGatedAdd:
      return integrate_gated_add(z, v, p.w, p.u, p.b1, p.b2);
    case IntegrationMethod::kWeightedSimpleAdd:
      return integrate_weighted_simple_add(z, v, p.w, p.u, p.b1, p.b2, spec.threshold_k,
                                           spec.straight_through)
          .output;
  }
  throw ConfigError("unknown integration method");
}

}  // namespace satconf
