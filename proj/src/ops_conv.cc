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

// satconf/src/ops_conv.cc

#include <algorithm>

#include "satconf/errors.h"
#include "satconf/ops.h"

namespace satconf {

using detail::make_result;
using detail::needs_grad;

namespace {

size_t sz(int64_t n) { return static_cast<size_t>(n); }

void check_bias(const Tensor& bias, int64_t channels, const char* op) {
  if (bias.defined() && (bias.rank() != 1 || bias.size(0) != channels)) {
    throw DimensionError(std::string(op) + ": bias " + shape_str(bias.shape()) +
                         " for " + std::to_string(channels) + " channels");
  }
}

std::vector<std::shared_ptr<TensorImpl>> inputs_of(const Tensor& x, const Tensor& k,
                                                   const Tensor& b) {
  std::vector<std::shared_ptr<TensorImpl>> ins{x.impl_ptr(), k.impl_ptr()};
  if (b.defined()) ins.push_back(b.impl_ptr());
  return ins;
}

}  // namespace

Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  if (x.rank() != 2 || kernel.rank() != 2 || kernel.size(1) != x.size(1)) {
    throw DimensionError("depthwise_conv1d: input " + shape_str(x.shape()) + " vs kernel " +
                         shape_str(kernel.shape()));
  }
  const int64_t k = kernel.size(0);
  if (k % 2 == 0) throw ConfigError("depthwise_conv1d needs an odd kernel, got " + std::to_string(k));
  const int64_t t_len = x.size(0), d = x.size(1), pad = (k - 1) / 2;
  check_bias(bias, d, "depthwise_conv1d");
  const double* xd = x.impl()->data.data();
  const double* kd = kernel.impl()->data.data();
  std::vector<double> y(sz(t_len * d), 0.0);
  for (int64_t t = 0; t < t_len; ++t) {
    double* yr = y.data() + t * d;
    for (int64_t j = 0; j < k; ++j) {
      const int64_t src = t + j - pad;
      if (src < 0 || src >= t_len) continue;
      const double* xr = xd + src * d;
      const double* kr = kd + j * d;
      for (int64_t c = 0; c < d; ++c) yr[c] += xr[c] * kr[c];
    }
    if (bias.defined()) {
      const double* bd = bias.impl()->data.data();
      for (int64_t c = 0; c < d; ++c) yr[c] += bd[c];
    }
  }
  if (!needs_grad({&x, &kernel, &bias})) return Tensor({t_len, d}, std::move(y));
  TensorImpl* xi = x.impl();
  TensorImpl* ki = kernel.impl();
  TensorImpl* bi = bias.defined() ? bias.impl() : nullptr;
  return make_result({t_len, d}, std::move(y), "depthwise_conv1d", inputs_of(x, kernel, bias),
                     [xi, ki, bi, t_len, d, k, pad](std::span<const double> g) {
                       double* gx = xi->grad_buffer();
                       double* gk = ki->grad_buffer();
                       double* gb = bi ? bi->grad_buffer() : nullptr;
                       const double* xd = xi->data.data();
                       const double* kd = ki->data.data();
                       for (int64_t t = 0; t < t_len; ++t) {
                         const double* gr = g.data() + t * d;
                         if (gb) for (int64_t c = 0; c < d; ++c) gb[c] += gr[c];
                         for (int64_t j = 0; j < k; ++j) {
                           const int64_t src = t + j - pad;
                           if (src < 0 || src >= t_len) continue;
                           for (int64_t c = 0; c < d; ++c) {
                             if (gx) gx[src * d + c] += gr[c] * kd[j * d + c];
                             if (gk) gk[j * d + c] += gr[c] * xd[src * d + c];
                           }
                         }
                       }
                     });
}

Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias, int dilation) {
  if (x.rank() != 2 || kernel.rank() != 3 || kernel.size(1) != x.size(1)) {
    throw DimensionError("conv1d: input " + shape_str(x.shape()) + " vs kernel " +
                         shape_str(kernel.shape()));
  }
  if (dilation < 1) throw ConfigError("conv1d dilation must be >= 1");
  const int64_t k = kernel.size(0);
  if (k % 2 == 0) throw ConfigError("conv1d needs an odd kernel, got " + std::to_string(k));
  const int64_t t_len = x.size(0), cin = x.size(1), cout = kernel.size(2);
  const int64_t pad = dilation * (k - 1) / 2;
  check_bias(bias, cout, "conv1d");
  const double* xd = x.impl()->data.data();
  const double* kd = kernel.impl()->data.data();
  std::vector<double> y(sz(t_len * cout), 0.0);
  for (int64_t t = 0; t < t_len; ++t) {
    double* yr = y.data() + t * cout;
    for (int64_t j = 0; j < k; ++j) {
      const int64_t src = t + j * dilation - pad;
      if (src < 0 || src >= t_len) continue;
      for (int64_t ci = 0; ci < cin; ++ci) {
        const double xv = xd[src * cin + ci];
        const double* kr = kd + (j * cin + ci) * cout;
        for (int64_t co = 0; co < cout; ++co) yr[co] += xv * kr[co];
      }
    }
    if (bias.defined()) {
      const double* bd = bias.impl()->data.data();
      for (int64_t co = 0; co < cout; ++co) yr[co] += bd[co];
    }
  }
  if (!needs_grad({&x, &kernel, &bias})) return Tensor({t_len, cout}, std::move(y));
  TensorImpl* xi = x.impl();
  TensorImpl* ki = kernel.impl();
  TensorImpl* bi = bias.defined() ? bias.impl() : nullptr;
  return make_result(
      {t_len, cout}, std::move(y), "conv1d", inputs_of(x, kernel, bias),
      [xi, ki, bi, t_len, cin, cout, k, pad, dilation](std::span<const double> g) {
        double* gx = xi->grad_buffer();
        double* gk = ki->grad_buffer();
        double* gb = bi ? bi->grad_buffer() : nullptr;
        const double* xd = xi->data.data();
        const double* kd = ki->data.data();
        for (int64_t t = 0; t < t_len; ++t) {
          const double* gr = g.data() + t * cout;
          if (gb) for (int64_t co = 0; co < cout; ++co) gb[co] += gr[co];
          for (int64_t j = 0; j < k; ++j) {
            const int64_t src = t + j * dilation - pad;
            if (src < 0 || src >= t_len) continue;
            for (int64_t ci = 0; ci < cin; ++ci) {
              const double* kr = kd + (j * cin + ci) * cout;
              if (gx) {
                double acc = 0.0;
                for (int64_t co = 0; co < cout; ++co) acc += gr[co] * kr[co];
                gx[src * cin + ci] += acc;
              }
              if (gk) {
                const double xv = xd[src * cin + ci];
                double* gkr = gk + (j * cin + ci) * cout;
                for (int64_t co = 0; co < cout; ++co) gkr[co] += xv * gr[co];
              }
            }
          }
        }
      });
}

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, int stride_t,
              int stride_f, Padding2d pad) {
  if (x.rank() != 3 || kernel.rank() != 4 || kernel.size(2) != x.size(2)) {
    throw DimensionError("conv2d: input " + shape_str(x.shape()) + " vs kernel " +
                         shape_str(kernel.shape()));
  }
  if (stride_t < 1 || stride_f < 1) throw ConfigError("conv2d strides must be >= 1");
  if (pad.time_lo < 0 || pad.time_hi < 0 || pad.freq_lo < 0 || pad.freq_hi < 0) {
    throw ConfigError("conv2d padding must be non-negative");
  }
  const int64_t t_len = x.size(0), f_len = x.size(1), cin = x.size(2);
  const int64_t kt = kernel.size(0), kf = kernel.size(1), cout = kernel.size(3);
  const int64_t t_pad = t_len + pad.time_lo + pad.time_hi;
  const int64_t f_pad = f_len + pad.freq_lo + pad.freq_hi;
  if (kt > t_pad || kf > f_pad) {
    throw DimensionError("conv2d: kernel " + shape_str(kernel.shape()) +
                         " larger than padded input [" + std::to_string(t_pad) + "," +
                         std::to_string(f_pad) + "]");
  }
  check_bias(bias, cout, "conv2d");
  const int64_t t_out = (t_pad - kt) / stride_t + 1;
  const int64_t f_out = (f_pad - kf) / stride_f + 1;
  const double* xd = x.impl()->data.data();
  const double* kd = kernel.impl()->data.data();
  std::vector<double> y(sz(t_out * f_out * cout), 0.0);
  for (int64_t to = 0; to < t_out; ++to) {
    for (int64_t fo = 0; fo < f_out; ++fo) {
      double* yr = y.data() + (to * f_out + fo) * cout;
      for (int64_t i = 0; i < kt; ++i) {
        const int64_t ti = to * stride_t + i - pad.time_lo;
        if (ti < 0 || ti >= t_len) continue;
        for (int64_t j = 0; j < kf; ++j) {
          const int64_t fj = fo * stride_f + j - pad.freq_lo;
          if (fj < 0 || fj >= f_len) continue;
          const double* xr = xd + (ti * f_len + fj) * cin;
          for (int64_t ci = 0; ci < cin; ++ci) {
            const double xv = xr[ci];
            const double* kr = kd + ((i * kf + j) * cin + ci) * cout;
            for (int64_t co = 0; co < cout; ++co) yr[co] += xv * kr[co];
          }
        }
      }
      if (bias.defined()) {
        const double* bd = bias.impl()->data.data();
        for (int64_t co = 0; co < cout; ++co) yr[co] += bd[co];
      }
    }
  }
  const Shape out_shape{t_out, f_out, cout};
  if (!needs_grad({&x, &kernel, &bias})) return Tensor(out_shape, std::move(y));
  TensorImpl* xi = x.impl();
  TensorImpl* ki = kernel.impl();
  TensorImpl* bi = bias.defined() ? bias.impl() : nullptr;
  return make_result(
      out_shape, std::move(y), "conv2d", inputs_of(x, kernel, bias),
      [=](std::span<const double> g) {
        double* gx = xi->grad_buffer();
        double* gk = ki->grad_buffer();
        double* gb = bi ? bi->grad_buffer() : nullptr;
        const double* xd = xi->data.data();
        const double* kd = ki->data.data();
        for (int64_t to = 0; to < t_out; ++to) {
          for (int64_t fo = 0; fo < f_out; ++fo) {
            const double* gr = g.data() + (to * f_out + fo) * cout;
            if (gb) for (int64_t co = 0; co < cout; ++co) gb[co] += gr[co];
            for (int64_t i = 0; i < kt; ++i) {
              const int64_t ti = to * stride_t + i - pad.time_lo;
              if (ti < 0 || ti >= t_len) continue;
              for (int64_t j = 0; j < kf; ++j) {
                const int64_t fj = fo * stride_f + j - pad.freq_lo;
                if (fj < 0 || fj >= f_len) continue;
                for (int64_t ci = 0; ci < cin; ++ci) {
                  const int64_t xidx = (ti * f_len + fj) * cin + ci;
                  const int64_t kbase = ((i * kf + j) * cin + ci) * cout;
                  if (gx) {
                    double acc = 0.0;
                    for (int64_t co = 0; co < cout; ++co) acc += gr[co] * kd[kbase + co];
                    gx[xidx] += acc;
                  }
                  if (gk) {
                    const double xv = xd[xidx];
                    for (int64_t co = 0; co < cout; ++co) gk[kbase + co] += xv * gr[co];
                  }
                }
              }
            }
          }
        }
      });
}

Tensor transposed_conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
                         int stride) {
  if (x.rank() != 2 || kernel.rank() != 3 || kernel.size(1) != x.size(1)) {
    throw DimensionError("transposed_conv1d: input " + shape_str(x.shape()) + " vs kernel " +
                         shape_str(kernel.shape()));
  }
  if (stride < 1) throw ConfigError("transposed_conv1d stride must be >= 1");
  const int64_t t_in = x.size(0), cin = x.size(1);
  const int64_t k = kernel.size(0), cout = kernel.size(2);
  if (k < 1) throw DimensionError("transposed_conv1d: empty kernel");
  check_bias(bias, cout, "transposed_conv1d");
  const int64_t t_out = t_in == 0 ? 0 : (t_in - 1) * stride + k;
  const double* xd = x.impl()->data.data();
  const double* kd = kernel.impl()->data.data();
  std::vector<double> y(sz(t_out * cout), 0.0);
  // Gather form: output frame tau collects every t with 0 <= tau - t*s < k,
  // visited in increasing t.
  for (int64_t tau = 0; tau < t_out; ++tau) {
    double* yr = y.data() + tau * cout;
    const int64_t t_first = tau >= k ? (tau - k) / stride + 1 : 0;
    for (int64_t t = t_first; t < t_in && t * stride <= tau; ++t) {
      const int64_t j = tau - t * stride;
      if (j >= k) continue;
      for (int64_t ci = 0; ci < cin; ++ci) {
        const double xv = xd[t * cin + ci];
        const double* kr = kd + (j * cin + ci) * cout;
        for (int64_t co = 0; co < cout; ++co) yr[co] += xv * kr[co];
      }
    }
    if (bias.defined()) {
      const double* bd = bias.impl()->data.data();
      for (int64_t co = 0; co < cout; ++co) yr[co] += bd[co];
    }
  }
  if (!needs_grad({&x, &kernel, &bias})) return Tensor({t_out, cout}, std::move(y));
  TensorImpl* xi = x.impl();
  TensorImpl* ki = kernel.impl();
  TensorImpl* bi = bias.defined() ? bias.impl() : nullptr;
  return make_result(
      {t_out, cout}, std::move(y), "transposed_conv1d", inputs_of(x, kernel, bias),
      [=](std::span<const double> g) {
        double* gx = xi->grad_buffer();
        double* gk = ki->grad_buffer();
        double* gb = bi ? bi->grad_buffer() : nullptr;
        const double* xd = xi->data.data();
        const double* kd = ki->data.data();
        for (int64_t t = 0; t < t_in; ++t) {
          for (int64_t j = 0; j < k; ++j) {
            const double* gr = g.data() + (t * stride + j) * cout;
            for (int64_t ci = 0; ci < cin; ++ci) {
              const int64_t kbase = (j * cin + ci) * cout;
              if (gx) {
                double acc = 0.0;
                for (int64_t co = 0; co < cout; ++co) acc += gr[co] * kd[kbase + co];
                gx[t * cin + ci] += acc;
              }
              if (gk) {
                const double xv = xd[t * cin + ci];
                for (int64_t co = 0; co < cout; ++co) gk[kbase + co] += xv * gr[co];
              }
            }
          }
        }
        if (gb) {
          for (int64_t tau = 0; tau < t_out; ++tau) {
            for (int64_t co = 0; co < cout; ++co) gb[co] += g[sz(tau * cout + co)];
          }
        }
      });
}

}  // namespace satconf
