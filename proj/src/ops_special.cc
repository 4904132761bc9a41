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

// satconf/src/ops_special.cc

#include <cmath>

#include "satconf/errors.h"
#include "satconf/ops.h"

namespace satconf {

using detail::make_result;
using detail::needs_grad;

namespace {
size_t sz(int64_t n) { return static_cast<size_t>(n); }
}  // namespace

Tensor lstm(const Tensor& x, const LstmParams& p, bool reverse) {
  if (x.rank() != 2 || p.w_x.rank() != 2 || p.w_h.rank() != 2 || p.b.rank() != 1) {
    throw DimensionError("lstm: bad ranks for input " + shape_str(x.shape()));
  }
  const int64_t t_len = x.size(0), din = x.size(1);
  const int64_t h = p.w_h.size(0), g4 = 4 * h;
  if (p.w_x.size(0) != din || p.w_x.size(1) != g4 || p.w_h.size(1) != g4 ||
      p.b.size(0) != g4) {
    throw DimensionError("lstm: input " + shape_str(x.shape()) + ", w_x " +
                         shape_str(p.w_x.shape()) + ", w_h " + shape_str(p.w_h.shape()) +
                         ", b " + shape_str(p.b.shape()));
  }
  const double* xd = x.impl()->data.data();
  const double* wx = p.w_x.impl()->data.data();
  const double* wh = p.w_h.impl()->data.data();
  const double* bd = p.b.impl()->data.data();

  // Per step: activated gates [i f g o], cell state, tanh(cell).
  std::vector<double> gates(sz(t_len * g4));
  std::vector<double> cell(sz(t_len * h));
  std::vector<double> cell_tanh(sz(t_len * h));
  std::vector<double> y(sz(t_len * h), 0.0);
  std::vector<double> pre(sz(g4));
  for (int64_t s = 0; s < t_len; ++s) {
    const int64_t t = reverse ? t_len - 1 - s : s;
    const int64_t tp = reverse ? t + 1 : t - 1;  // previous step in time order
    const bool has_prev = s > 0;
    for (int64_t j = 0; j < g4; ++j) pre[sz(j)] = bd[j];
    for (int64_t i = 0; i < din; ++i) {
      const double xv = xd[t * din + i];
      const double* wr = wx + i * g4;
      for (int64_t j = 0; j < g4; ++j) pre[sz(j)] += xv * wr[j];
    }
    if (has_prev) {
      for (int64_t i = 0; i < h; ++i) {
        const double hv = y[sz(tp * h + i)];
        const double* wr = wh + i * g4;
        for (int64_t j = 0; j < g4; ++j) pre[sz(j)] += hv * wr[j];
      }
    }
    double* gt = gates.data() + t * g4;
    for (int64_t i = 0; i < h; ++i) {
      gt[i] = sigmoid_value(pre[sz(i)]);
      gt[h + i] = sigmoid_value(pre[sz(h + i)]);
      gt[2 * h + i] = std::tanh(pre[sz(2 * h + i)]);
      gt[3 * h + i] = sigmoid_value(pre[sz(3 * h + i)]);
      const double c_prev = has_prev ? cell[sz(tp * h + i)] : 0.0;
      const double c = gt[h + i] * c_prev + gt[i] * gt[2 * h + i];
      cell[sz(t * h + i)] = c;
      const double tc = std::tanh(c);
      cell_tanh[sz(t * h + i)] = tc;
      y[sz(t * h + i)] = gt[3 * h + i] * tc;
    }
  }
  if (!needs_grad({&x, &p.w_x, &p.w_h, &p.b})) return Tensor({t_len, h}, std::move(y));

  TensorImpl* xi = x.impl();
  TensorImpl* wxi = p.w_x.impl();
  TensorImpl* whi = p.w_h.impl();
  TensorImpl* bi = p.b.impl();
  std::vector<double> hidden = y;
  return make_result(
      {t_len, h}, std::move(y), "lstm",
      {x.impl_ptr(), p.w_x.impl_ptr(), p.w_h.impl_ptr(), p.b.impl_ptr()},
      [=, gates = std::move(gates), cell = std::move(cell), cell_tanh = std::move(cell_tanh),
       hidden = std::move(hidden)](std::span<const double> g) {
        double* gx = xi->grad_buffer();
        double* gwx = wxi->grad_buffer();
        double* gwh = whi->grad_buffer();
        double* gb = bi->grad_buffer();
        const double* xd = xi->data.data();
        const double* wx = wxi->data.data();
        const double* wh = whi->data.data();
        std::vector<double> dh_next(sz(h), 0.0), dc_next(sz(h), 0.0), da(sz(g4));
        // Walk steps in reverse processing order.
        for (int64_t s = t_len - 1; s >= 0; --s) {
          const int64_t t = reverse ? t_len - 1 - s : s;
          const int64_t tp = reverse ? t + 1 : t - 1;
          const bool has_prev = s > 0;
          const double* gt = gates.data() + t * g4;
          for (int64_t i = 0; i < h; ++i) {
            const double dh = g[sz(t * h + i)] + dh_next[sz(i)];
            const double ig = gt[i], fg = gt[h + i], cg = gt[2 * h + i], og = gt[3 * h + i];
            const double tc = cell_tanh[sz(t * h + i)];
            const double dc = dh * og * (1.0 - tc * tc) + dc_next[sz(i)];
            const double c_prev = has_prev ? cell[sz(tp * h + i)] : 0.0;
            da[sz(i)] = dc * cg * ig * (1.0 - ig);
            da[sz(h + i)] = dc * c_prev * fg * (1.0 - fg);
            da[sz(2 * h + i)] = dc * ig * (1.0 - cg * cg);
            da[sz(3 * h + i)] = dh * tc * og * (1.0 - og);
            dc_next[sz(i)] = dc * fg;
          }
          if (gb) for (int64_t j = 0; j < g4; ++j) gb[j] += da[sz(j)];
          for (int64_t i = 0; i < din; ++i) {
            const double* wr = wx + i * g4;
            if (gx) {
              double acc = 0.0;
              for (int64_t j = 0; j < g4; ++j) acc += da[sz(j)] * wr[j];
              gx[t * din + i] += acc;
            }
            if (gwx) {
              const double xv = xd[t * din + i];
              double* gr = gwx + i * g4;
              for (int64_t j = 0; j < g4; ++j) gr[j] += xv * da[sz(j)];
            }
          }
          for (int64_t i = 0; i < h; ++i) {
            double acc = 0.0;
            if (has_prev) {
              const double* wr = wh + i * g4;
              for (int64_t j = 0; j < g4; ++j) acc += da[sz(j)] * wr[j];
              if (gwh) {
                const double hv = hidden[sz(tp * h + i)];
                double* gr = gwh + i * g4;
                for (int64_t j = 0; j < g4; ++j) gr[j] += hv * da[sz(j)];
              }
            }
            dh_next[sz(i)] = acc;
          }
        }
      });
}

Tensor lstm_layer(const Tensor& x, std::span<const LstmParams> params,
                  LstmDirection direction) {
  switch (direction) {
    case LstmDirection::kForward:
    case LstmDirection::kBackward:
      if (params.size() != 1) throw UsageError("unidirectional lstm_layer takes one parameter set");
      return lstm(x, params[0], direction == LstmDirection::kBackward);
    case LstmDirection::kBidirectional: {
      if (params.size() != 2) throw UsageError("bidirectional lstm_layer takes two parameter sets");
      const Tensor parts[] = {lstm(x, params[0], false), lstm(x, params[1], true)};
      return concat_cols(parts);
    }
  }
  throw UsageError("lstm_layer: unknown direction");
}

Tensor rel_shift(const Tensor& b) {
  if (b.rank() != 2 || b.size(1) != 2 * b.size(0) - 1) {
    throw DimensionError("rel_shift expects [T, 2T-1], got " + shape_str(b.shape()));
  }
  const int64_t t_len = b.size(0), w = b.size(1);
  const auto& bd = b.impl()->data;
  std::vector<double> y(sz(t_len * t_len));
  for (int64_t i = 0; i < t_len; ++i) {
    for (int64_t j = 0; j < t_len; ++j) {
      y[sz(i * t_len + j)] = bd[sz(i * w + (i - j) + t_len - 1)];
    }
  }
  if (!needs_grad({&b})) return Tensor({t_len, t_len}, std::move(y));
  TensorImpl* bi = b.impl();
  return make_result({t_len, t_len}, std::move(y), "rel_shift", {b.impl_ptr()},
                     [bi, t_len, w](std::span<const double> g) {
                       double* gb = bi->grad_buffer();
                       for (int64_t i = 0; i < t_len; ++i) {
                         for (int64_t j = 0; j < t_len; ++j) {
                           gb[i * w + (i - j) + t_len - 1] += g[sz(i * t_len + j)];
                         }
                       }
                     });
}

Tensor sinusoid_table(std::span<const double> positions, int64_t dim) {
  const int64_t n = static_cast<int64_t>(positions.size());
  std::vector<double> y(sz(n * dim));
  for (int64_t r = 0; r < n; ++r) {
    for (int64_t i = 0; i < dim; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
      y[sz(r * dim + i)] = std::sin(positions[sz(r)] * freq);
      if (i + 1 < dim) y[sz(r * dim + i + 1)] = std::cos(positions[sz(r)] * freq);
    }
  }
  return Tensor({n, dim}, std::move(y));
}

Tensor threshold_zero(const Tensor& w, double k, bool straight_through) {
  const auto& wd = w.impl()->data;
  std::vector<double> y(wd.size());
  for (size_t i = 0; i < wd.size(); ++i) y[i] = wd[i] >= k ? wd[i] : 0.0;
  if (!needs_grad({&w})) return Tensor(w.shape(), std::move(y));
  TensorImpl* wi = w.impl();
  return make_result(w.shape(), std::move(y), "threshold_zero", {w.impl_ptr()},
                     [wi, k, straight_through](std::span<const double> g) {
                       double* gw = wi->grad_buffer();
                       for (size_t i = 0; i < g.size(); ++i) {
                         if (straight_through || wi->data[i] >= k) gw[i] += g[i];
                       }
                     });
}

Tensor weighted_row_add(const Tensor& z, const Tensor& w, const Tensor& c) {
  if (z.rank() != 2 || w.rank() != 1 || c.rank() != 1 || w.size(0) != z.size(0) ||
      c.size(0) != z.size(1)) {
    throw DimensionError("weighted_row_add: z " + shape_str(z.shape()) + ", w " +
                         shape_str(w.shape()) + ", c " + shape_str(c.shape()));
  }
  const int64_t t_len = z.size(0), d = z.size(1);
  const auto& zd = z.impl()->data;
  const auto& wd = w.impl()->data;
  const auto& cd = c.impl()->data;
  std::vector<double> y(zd);
  for (int64_t t = 0; t < t_len; ++t) {
    const double wt = wd[sz(t)];
    if (wt == 0.0) continue;
    for (int64_t i = 0; i < d; ++i) y[sz(t * d + i)] = zd[sz(t * d + i)] + wt * cd[sz(i)];
  }
  if (!needs_grad({&z, &w, &c})) return Tensor({t_len, d}, std::move(y));
  TensorImpl* zi = z.impl();
  TensorImpl* wi = w.impl();
  TensorImpl* ci = c.impl();
  return make_result({t_len, d}, std::move(y), "weighted_row_add",
                     {z.impl_ptr(), w.impl_ptr(), c.impl_ptr()},
                     [zi, wi, ci, t_len, d](std::span<const double> g) {
                       double* gz = zi->grad_buffer();
                       double* gw = wi->grad_buffer();
                       double* gc = ci->grad_buffer();
                       for (int64_t t = 0; t < t_len; ++t) {
                         const double wt = wi->data[sz(t)];
                         double acc = 0.0;
                         for (int64_t i = 0; i < d; ++i) {
                           const double gv = g[sz(t * d + i)];
                           if (gz) gz[t * d + i] += gv;
                           if (gc) gc[i] += wt * gv;
                           acc += gv * ci->data[sz(i)];
                         }
                         if (gw) gw[t] += acc;
                       }
                     });
}

}  // namespace satconf
