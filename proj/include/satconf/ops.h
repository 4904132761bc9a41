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

// satconf/ops.h

#ifndef SATCONF_OPS_H_
#define SATCONF_OPS_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "satconf/rng.h"
#include "satconf/tensor.h"

namespace satconf {

// ---------------------------------------------------------------------------
// Elementwise. Binary ops accept identical shapes or a one-element operand.

enum class ElementwiseKind { kSigmoid, kTanh, kSwish, kRelu, kAdd, kMul, kScale };

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor swish(const Tensor& x);  // x * sigmoid(x)
Tensor relu(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

// Dispatcher over the kinds above; kScale reads `factor`.
Tensor elementwise(ElementwiseKind kind, std::span<const Tensor> args,
                   double factor = 1.0);

double sigmoid_value(double x);

// ---------------------------------------------------------------------------
// Affine maps and products.

// y[..., j] = sum_i x[..., i] * w[i, j] + b[j]. `b` may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b = Tensor());
Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k] x [k,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m,k] x [n,k]^T
Tensor matvec(const Tensor& a, const Tensor& x);     // [m,n] x [n] -> [m]

// ---------------------------------------------------------------------------
// Normalization and probabilities.

Tensor softmax(const Tensor& x, int axis = -1);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

// Sum over frames of -log softmax(logits[t])[labels[t]], times `weight`.
Tensor cross_entropy(const Tensor& logits, std::span<const int32_t> labels,
                     double weight = 1.0);

// ---------------------------------------------------------------------------
// Convolutions. All cross-correlations; zero padding.

// x[T, d], kernel[k, d], optional bias[d]; k odd, "same" padding.
Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernel,
                        const Tensor& bias = Tensor());

// x[T, c_in], kernel[k, c_in, c_out]; k odd, dilated "same" padding.
Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
              int dilation = 1);

struct Padding2d {
  int time_lo = 0;
  int time_hi = 0;
  int freq_lo = 0;
  int freq_hi = 0;
};

// x[T, F, c_in], kernel[kt, kf, c_in, c_out] -> [T', F', c_out] with
// T' = (T + pads - kt) / stride_t + 1 (floor), likewise for F'.
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
              int stride_t, int stride_f, Padding2d pad = {});

// x[T', c_in], kernel[k, c_in, c_out] -> [(T'-1)*stride + k, c_out].
Tensor transposed_conv1d(const Tensor& x, const Tensor& kernel,
                         const Tensor& bias, int stride);

// Splits the last axis into halves a, b and returns a * sigmoid(b).
Tensor glu(const Tensor& x);

// ---------------------------------------------------------------------------
// Recurrent.

// Gate order in the 4h axis: input, forget, cell candidate, output.
struct LstmParams {
  Tensor w_x;  // [d_in, 4h]
  Tensor w_h;  // [h, 4h]
  Tensor b;    // [4h]
};

enum class LstmDirection { kForward, kBackward, kBidirectional };

// Single-direction LSTM over x[T, d_in] with zero initial state.
Tensor lstm(const Tensor& x, const LstmParams& p, bool reverse);

// For kBidirectional `params` holds (forward, backward) and the outputs are
// concatenated, so d_out = 2h.
Tensor lstm_layer(const Tensor& x, std::span<const LstmParams> params,
                  LstmDirection direction);

// ---------------------------------------------------------------------------
// Shape plumbing.

Tensor reshape(const Tensor& x, Shape shape);
Tensor slice_rows(const Tensor& x, int64_t start, int64_t count);
Tensor slice_cols(const Tensor& x, int64_t start, int64_t count);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
// v[d] -> [rows, d]
Tensor broadcast_rows(const Tensor& v, int64_t rows);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mean_rows(const Tensor& x);                                // [T,d] -> [d]
Tensor weighted_sum_rows(const Tensor& h, const Tensor& alpha);   // -> [d]

// ---------------------------------------------------------------------------
// Attention helpers and gating.

// b[T, 2T-1] with column m holding relative distance m - (T-1); returns
// s[i][j] = b[i][(i - j) + T - 1].
Tensor rel_shift(const Tensor& b);

// Sinusoidal table, one row per position value in `positions`.
Tensor sinusoid_table(std::span<const double> positions, int64_t dim);

// out = w where w >= k, else 0. Zeroed entries pass no gradient unless
// `straight_through`.
Tensor threshold_zero(const Tensor& w, double k, bool straight_through = false);

// out[t] = z[t] + w[t] * c; rows with w[t] == 0 are copied bit-exactly.
Tensor weighted_row_add(const Tensor& z, const Tensor& w, const Tensor& c);

// Inverted dropout with an explicit mask stream; identity when !training.
Tensor dropout(const Tensor& x, double p, Rng* rng, bool training);

}  // namespace satconf

#endif  // SATCONF_OPS_H_
