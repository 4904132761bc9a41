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

// satconf/src/ops_basic.cc

#include <algorithm>
#include <cmath>
#include <limits>

#include "satconf/errors.h"
#include "satconf/ops.h"

namespace satconf {

using detail::make_result;
using detail::needs_grad;

namespace {

size_t sz(int64_t n) { return static_cast<size_t>(n); }

enum class Unary { kSigmoid, kTanh, kSwish, kRelu };

Tensor unary(const Tensor& x, Unary kind) {
  const auto& xd = x.impl()->data;
  std::vector<double> y(xd.size());
  for (size_t i = 0; i < xd.size(); ++i) {
    const double v = xd[i];
    switch (kind) {
      case Unary::kSigmoid: y[i] = sigmoid_value(v); break;
      case Unary::kTanh: y[i] = std::tanh(v); break;
      case Unary::kSwish: y[i] = v * sigmoid_value(v); break;
      case Unary::kRelu: y[i] = v > 0.0 ? v : 0.0; break;
    }
  }
  if (!needs_grad({&x})) return Tensor(x.shape(), std::move(y));
  TensorImpl* xi = x.impl();
  std::vector<double> saved = y;
  static constexpr const char* kNames[] = {"sigmoid", "tanh", "swish", "relu"};
  return make_result(
      x.shape(), std::move(y), kNames[static_cast<int>(kind)], {x.impl_ptr()},
      [xi, kind, saved = std::move(saved)](std::span<const double> g) {
        double* gx = xi->grad_buffer();
        const auto& xd = xi->data;
        for (size_t i = 0; i < g.size(); ++i) {
          double d = 0.0;
          switch (kind) {
            case Unary::kSigmoid: d = saved[i] * (1.0 - saved[i]); break;
            case Unary::kTanh: d = 1.0 - saved[i] * saved[i]; break;
            case Unary::kSwish: {
              const double s = sigmoid_value(xd[i]);
              d = s + xd[i] * s * (1.0 - s);
              break;
            }
            case Unary::kRelu: d = xd[i] > 0.0 ? 1.0 : 0.0; break;
          }
          gx[i] += g[i] * d;
        }
      });
}

enum class Binary { kAdd, kSub, kMul };

Tensor binary(const Tensor& a, const Tensor& b, Binary kind) {
  const int64_t na = a.numel();
  const int64_t nb = b.numel();
  const bool same = a.shape() == b.shape() || (na == 1 && nb == 1);
  if (!same && na != 1 && nb != 1) {
    throw DimensionError("elementwise operands " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()) +
                         " are neither equal nor scalar");
  }
  const Shape out_shape = (same || nb == 1) ? a.shape() : b.shape();
  const int64_t n = std::max(na, nb);
  const auto& ad = a.impl()->data;
  const auto& bd = b.impl()->data;
  const bool ab = na == 1 && n > 1;
  const bool bb = nb == 1 && n > 1;
  std::vector<double> y(sz(n));
  for (size_t i = 0; i < y.size(); ++i) {
    const double av = ab ? ad[0] : ad[i];
    const double bv = bb ? bd[0] : bd[i];
    switch (kind) {
      case Binary::kAdd: y[i] = av + bv; break;
      case Binary::kSub: y[i] = av - bv; break;
      case Binary::kMul: y[i] = av * bv; break;
    }
  }
  if (!needs_grad({&a, &b})) return Tensor(out_shape, std::move(y));
  TensorImpl* ai = a.impl();
  TensorImpl* bi = b.impl();
  static constexpr const char* kNames[] = {"add", "sub", "mul"};
  return make_result(
      out_shape, std::move(y), kNames[static_cast<int>(kind)],
      {a.impl_ptr(), b.impl_ptr()}, [ai, bi, ab, bb, kind](std::span<const double> g) {
        double* ga = ai->grad_buffer();
        double* gb = bi->grad_buffer();
        for (size_t i = 0; i < g.size(); ++i) {
          const size_t ia = ab ? 0 : i;
          const size_t ib = bb ? 0 : i;
          switch (kind) {
            case Binary::kAdd:
              if (ga) ga[ia] += g[i];
              if (gb) gb[ib] += g[i];
              break;
            case Binary::kSub:
              if (ga) ga[ia] += g[i];
              if (gb) gb[ib] -= g[i];
              break;
            case Binary::kMul:
              if (ga) ga[ia] += g[i] * bi->data[ib];
              if (gb) gb[ib] += g[i] * ai->data[ia];
              break;
          }
        }
      });
}

void require_rank(const Tensor& x, int rank, const char* op) {
  if (x.rank() != rank) {
    throw DimensionError(std::string(op) + " expects rank " + std::to_string(rank) +
                         ", got " + shape_str(x.shape()));
  }
}

}  // namespace

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& x) { return unary(x, Unary::kSigmoid); }
Tensor tanh(const Tensor& x) { return unary(x, Unary::kTanh); }
Tensor swish(const Tensor& x) { return unary(x, Unary::kSwish); }
Tensor relu(const Tensor& x) { return unary(x, Unary::kRelu); }
Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::kAdd); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::kSub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::kMul); }

Tensor scale(const Tensor& x, double factor) {
  const auto& xd = x.impl()->data;
  std::vector<double> y(xd.size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = xd[i] * factor;
  if (!needs_grad({&x})) return Tensor(x.shape(), std::move(y));
  TensorImpl* xi = x.impl();
  return make_result(x.shape(), std::move(y), "scale", {x.impl_ptr()},
                     [xi, factor](std::span<const double> g) {
                       double* gx = xi->grad_buffer();
                       for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
                     });
}

Tensor elementwise(ElementwiseKind kind, std::span<const Tensor> args, double factor) {
  const size_t want = (kind == ElementwiseKind::kAdd || kind == ElementwiseKind::kMul) ? 2 : 1;
  if (args.size() != want) {
    throw UsageError("elementwise: expected " + std::to_string(want) + " operands, got " +
                     std::to_string(args.size()));
  }
  switch (kind) {
    case ElementwiseKind::kSigmoid: return sigmoid(args[0]);
    case ElementwiseKind::kTanh: return tanh(args[0]);
    case ElementwiseKind::kSwish: return swish(args[0]);
    case ElementwiseKind::kRelu: return relu(args[0]);
    case ElementwiseKind::kAdd: return add(args[0], args[1]);
    case ElementwiseKind::kMul: return mul(args[0], args[1]);
    case ElementwiseKind::kScale: return scale(args[0], factor);
  }
  throw UsageError("elementwise: unknown kind");
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() < 1 || w.rank() != 2 || x.size(-1) != w.size(0)) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " vs weight " +
                         shape_str(w.shape()));
  }
  const int64_t din = w.size(0);
  const int64_t dout = w.size(1);
  if (b.defined() && (b.rank() != 1 || b.size(0) != dout)) {
    throw DimensionError("linear: bias " + shape_str(b.shape()) + " vs weight " +
                         shape_str(w.shape()));
  }
  const int64_t rows = x.numel() / din;
  Shape out_shape = x.shape();
  out_shape.back() = dout;
  const double* xd = x.impl()->data.data();
  const double* wd = w.impl()->data.data();
  std::vector<double> y(sz(rows * dout), 0.0);
  for (int64_t r = 0; r < rows; ++r) {
    double* yr = y.data() + r * dout;
    const double* xr = xd + r * din;
    for (int64_t i = 0; i < din; ++i) {
      const double xv = xr[i];
      const double* wr = wd + i * dout;
      for (int64_t j = 0; j < dout; ++j) yr[j] += xv * wr[j];
    }
    if (b.defined()) {
      const double* bd = b.impl()->data.data();
      for (int64_t j = 0; j < dout; ++j) yr[j] += bd[j];
    }
  }
  if (!needs_grad({&x, &w, &b})) return Tensor(std::move(out_shape), std::move(y));
  TensorImpl* xi = x.impl();
  TensorImpl* wi = w.impl();
  TensorImpl* bi = b.defined() ? b.impl() : nullptr;
  std::vector<std::shared_ptr<TensorImpl>> ins{x.impl_ptr(), w.impl_ptr()};
  if (bi) ins.push_back(b.impl_ptr());
  return make_result(
      std::move(out_shape), std::move(y), "linear", std::move(ins),
      [xi, wi, bi, rows, din, dout](std::span<const double> g) {
        double* gx = xi->grad_buffer();
        double* gw = wi->grad_buffer();
        double* gb = bi ? bi->grad_buffer() : nullptr;
        const double* xd = xi->data.data();
        const double* wd = wi->data.data();
        for (int64_t r = 0; r < rows; ++r) {
          const double* gr = g.data() + r * dout;
          const double* xr = xd + r * din;
          if (gx) {
            double* gxr = gx + r * din;
            for (int64_t i = 0; i < din; ++i) {
              const double* wr = wd + i * dout;
              double acc = 0.0;
              for (int64_t j = 0; j < dout; ++j) acc += gr[j] * wr[j];
              gxr[i] += acc;
            }
          }
          if (gw) {
            for (int64_t i = 0; i < din; ++i) {
              const double xv = xr[i];
              double* gwr = gw + i * dout;
              for (int64_t j = 0; j < dout; ++j) gwr[j] += xv * gr[j];
            }
          }
          if (gb) {
            for (int64_t j = 0; j < dout; ++j) gb[j] += gr[j];
          }
        }
      });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.size(1) != b.size(0)) {
    throw DimensionError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  return linear(a, b);
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul_nt");
  require_rank(b, 2, "matmul_nt");
  const int64_t m = a.size(0), k = a.size(1), n = b.size(0);
  if (b.size(1) != k) {
    throw DimensionError("matmul_nt: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()) + "^T");
  }
  const double* ad = a.impl()->data.data();
  const double* bd = b.impl()->data.data();
  std::vector<double> y(sz(m * n));
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int64_t t = 0; t < k; ++t) acc += ad[i * k + t] * bd[j * k + t];
      y[sz(i * n + j)] = acc;
    }
  }
  if (!needs_grad({&a, &b})) return Tensor({m, n}, std::move(y));
  TensorImpl* ai = a.impl();
  TensorImpl* bi = b.impl();
  return make_result({m, n}, std::move(y), "matmul_nt", {a.impl_ptr(), b.impl_ptr()},
                     [ai, bi, m, n, k](std::span<const double> g) {
                       double* ga = ai->grad_buffer();
                       double* gb = bi->grad_buffer();
                       const double* ad = ai->data.data();
                       const double* bd = bi->data.data();
                       for (int64_t i = 0; i < m; ++i) {
                         for (int64_t j = 0; j < n; ++j) {
                           const double gv = g[sz(i * n + j)];
                           if (ga) {
                             for (int64_t t = 0; t < k; ++t) ga[i * k + t] += gv * bd[j * k + t];
                           }
                           if (gb) {
                             for (int64_t t = 0; t < k; ++t) gb[j * k + t] += gv * ad[i * k + t];
                           }
                         }
                       }
                     });
}

Tensor matvec(const Tensor& a, const Tensor& x) {
  require_rank(a, 2, "matvec");
  require_rank(x, 1, "matvec");
  if (a.size(1) != x.size(0)) {
    throw DimensionError("matvec: " + shape_str(a.shape()) + " x " + shape_str(x.shape()));
  }
  return reshape(matmul_nt(a, reshape(x, {1, x.size(0)})), {a.size(0)});
}

Tensor softmax(const Tensor& x, int axis) {
  const int r = x.rank();
  const int ax = axis < 0 ? axis + r : axis;
  if (r == 0 || ax < 0 || ax >= r) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for " +
                         shape_str(x.shape()));
  }
  const Shape& s = x.shape();
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < ax; ++i) outer *= s[sz(i)];
  for (int i = ax + 1; i < r; ++i) inner *= s[sz(i)];
  const int64_t n = s[sz(ax)];
  const auto& xd = x.impl()->data;
  std::vector<double> y(xd.size());
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * n * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (int64_t k = 0; k < n; ++k) mx = std::max(mx, xd[sz(base + k * inner)]);
      double total = 0.0;
      for (int64_t k = 0; k < n; ++k) {
        const double e = std::exp(xd[sz(base + k * inner)] - mx);
        y[sz(base + k * inner)] = e;
        total += e;
      }
      for (int64_t k = 0; k < n; ++k) y[sz(base + k * inner)] /= total;
    }
  }
  if (!needs_grad({&x})) return Tensor(s, std::move(y));
  TensorImpl* xi = x.impl();
  std::vector<double> saved = y;
  return make_result(s, std::move(y), "softmax", {x.impl_ptr()},
                     [xi, saved = std::move(saved), outer, inner, n](std::span<const double> g) {
                       double* gx = xi->grad_buffer();
                       for (int64_t o = 0; o < outer; ++o) {
                         for (int64_t in = 0; in < inner; ++in) {
                           const int64_t base = o * n * inner + in;
                           double dot = 0.0;
                           for (int64_t k = 0; k < n; ++k) {
                             const size_t idx = sz(base + k * inner);
                             dot += g[idx] * saved[idx];
                           }
                           for (int64_t k = 0; k < n; ++k) {
                             const size_t idx = sz(base + k * inner);
                             gx[idx] += saved[idx] * (g[idx] - dot);
                           }
                         }
                       }
                     });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.rank() < 1) throw DimensionError("layer_norm on a scalar");
  const int64_t d = x.size(-1);
  if (gamma.numel() != d || beta.numel() != d) {
    throw DimensionError("layer_norm: input " + shape_str(x.shape()) + " vs gamma " +
                         shape_str(gamma.shape()) + " / beta " + shape_str(beta.shape()));
  }
  if (!(eps > 0.0)) throw ConfigError("layer_norm eps must be positive");
  const int64_t rows = d == 0 ? 0 : x.numel() / d;
  const auto& xd = x.impl()->data;
  const auto& gd = gamma.impl()->data;
  const auto& bd = beta.impl()->data;
  std::vector<double> y(xd.size());
  std::vector<double> xhat(xd.size());
  std::vector<double> rstd(sz(rows));
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = xd.data() + r * d;
    double mu = 0.0;
    for (int64_t i = 0; i < d; ++i) mu += xr[i];
    mu /= static_cast<double>(d);
    // One correction pass so a constant row centers to exact zeros.
    double corr = 0.0;
    for (int64_t i = 0; i < d; ++i) corr += xr[i] - mu;
    mu += corr / static_cast<double>(d);
    double var = 0.0;
    for (int64_t i = 0; i < d; ++i) var += (xr[i] - mu) * (xr[i] - mu);
    var /= static_cast<double>(d);
    const double rs = 1.0 / std::sqrt(var + eps);
    rstd[sz(r)] = rs;
    for (int64_t i = 0; i < d; ++i) {
      const double xh = (xr[i] - mu) * rs;
      xhat[sz(r * d + i)] = xh;
      y[sz(r * d + i)] = xh * gd[sz(i)] + bd[sz(i)];
    }
  }
  if (!needs_grad({&x, &gamma, &beta})) return Tensor(x.shape(), std::move(y));
  TensorImpl* xi = x.impl();
  TensorImpl* gi = gamma.impl();
  TensorImpl* bi = beta.impl();
  return make_result(
      x.shape(), std::move(y), "layer_norm", {x.impl_ptr(), gamma.impl_ptr(), beta.impl_ptr()},
      [xi, gi, bi, xhat = std::move(xhat), rstd = std::move(rstd), rows, d](
          std::span<const double> g) {
        double* gx = xi->grad_buffer();
        double* gg = gi->grad_buffer();
        double* gb = bi->grad_buffer();
        const auto& gam = gi->data;
        for (int64_t r = 0; r < rows; ++r) {
          const double* gr = g.data() + r * d;
          const double* xh = xhat.data() + r * d;
          if (gg) for (int64_t i = 0; i < d; ++i) gg[i] += gr[i] * xh[i];
          if (gb) for (int64_t i = 0; i < d; ++i) gb[i] += gr[i];
          if (gx) {
            double m1 = 0.0, m2 = 0.0;
            for (int64_t i = 0; i < d; ++i) {
              const double dxh = gr[i] * gam[sz(i)];
              m1 += dxh;
              m2 += dxh * xh[i];
            }
            m1 /= static_cast<double>(d);
            m2 /= static_cast<double>(d);
            const double rs = rstd[sz(r)];
            for (int64_t i = 0; i < d; ++i) {
              const double dxh = gr[i] * gam[sz(i)];
              gx[r * d + i] += rs * (dxh - m1 - xh[i] * m2);
            }
          }
        }
      });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int32_t> labels, double weight) {
  require_rank(logits, 2, "cross_entropy");
  const int64_t rows = logits.size(0), c = logits.size(1);
  if (static_cast<int64_t>(labels.size()) != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) +
                         " labels for logits " + shape_str(logits.shape()));
  }
  const auto& ld = logits.impl()->data;
  std::vector<double> probs(ld.size());
  double loss = 0.0;
  for (int64_t r = 0; r < rows; ++r) {
    const int32_t lab = labels[sz(r)];
    if (lab < 0 || lab >= c) {
      throw UsageError("cross_entropy: label " + std::to_string(lab) + " outside [0," +
                       std::to_string(c) + ")");
    }
    const double* lr = ld.data() + r * c;
    double mx = lr[0];
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, lr[j]);
    double total = 0.0;
    for (int64_t j = 0; j < c; ++j) {
      const double e = std::exp(lr[j] - mx);
      probs[sz(r * c + j)] = e;
      total += e;
    }
    for (int64_t j = 0; j < c; ++j) probs[sz(r * c + j)] /= total;
    loss += (mx + std::log(total)) - lr[lab];
  }
  loss *= weight;
  if (!needs_grad({&logits})) return Tensor::scalar(loss);
  TensorImpl* li = logits.impl();
  std::vector<int32_t> labs(labels.begin(), labels.end());
  return make_result({}, {loss}, "cross_entropy", {logits.impl_ptr()},
                     [li, probs = std::move(probs), labs = std::move(labs), rows, c,
                      weight](std::span<const double> g) {
                       double* gl = li->grad_buffer();
                       const double s = g[0] * weight;
                       for (int64_t r = 0; r < rows; ++r) {
                         for (int64_t j = 0; j < c; ++j) {
                           double p = probs[sz(r * c + j)];
                           if (j == labs[sz(r)]) p -= 1.0;
                           gl[r * c + j] += s * p;
                         }
                       }
                     });
}

Tensor glu(const Tensor& x) {
  if (x.rank() < 1 || x.size(-1) % 2 != 0) {
    throw DimensionError("glu needs an even last axis, got " + shape_str(x.shape()));
  }
  const int64_t two_d = x.size(-1), d = two_d / 2;
  const int64_t rows = two_d == 0 ? 0 : x.numel() / two_d;
  Shape out_shape = x.shape();
  out_shape.back() = d;
  const auto& xd = x.impl()->data;
  std::vector<double> y(sz(rows * d));
  std::vector<double> gate(sz(rows * d));
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t i = 0; i < d; ++i) {
      const double s = sigmoid_value(xd[sz(r * two_d + d + i)]);
      gate[sz(r * d + i)] = s;
      y[sz(r * d + i)] = xd[sz(r * two_d + i)] * s;
    }
  }
  if (!needs_grad({&x})) return Tensor(std::move(out_shape), std::move(y));
  TensorImpl* xi = x.impl();
  return make_result(std::move(out_shape), std::move(y), "glu", {x.impl_ptr()},
                     [xi, gate = std::move(gate), rows, d, two_d](std::span<const double> g) {
                       double* gx = xi->grad_buffer();
                       const auto& xd = xi->data;
                       for (int64_t r = 0; r < rows; ++r) {
                         for (int64_t i = 0; i < d; ++i) {
                           const double s = gate[sz(r * d + i)];
                           const double gv = g[sz(r * d + i)];
                           gx[r * two_d + i] += gv * s;
                           gx[r * two_d + d + i] += gv * xd[sz(r * two_d + i)] * s * (1.0 - s);
                         }
                       }
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> y = x.impl()->data;
  if (!needs_grad({&x})) return Tensor(std::move(shape), std::move(y));
  TensorImpl* xi = x.impl();
  return make_result(std::move(shape), std::move(y), "reshape", {x.impl_ptr()},
                     [xi](std::span<const double> g) {
                       double* gx = xi->grad_buffer();
                       for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                     });
}

Tensor slice_rows(const Tensor& x, int64_t start, int64_t count) {
  if (x.rank() < 1 || start < 0 || count < 0 || start + count > x.size(0)) {
    throw DimensionError("slice_rows [" + std::to_string(start) + ", +" +
                         std::to_string(count) + ") of " + shape_str(x.shape()));
  }
  const int64_t row = x.size(0) == 0 ? 0 : x.numel() / x.size(0);
  Shape out_shape = x.shape();
  out_shape[0] = count;
  const auto& xd = x.impl()->data;
  std::vector<double> y(xd.begin() + start * row, xd.begin() + (start + count) * row);
  if (!needs_grad({&x})) return Tensor(std::move(out_shape), std::move(y));
  TensorImpl* xi = x.impl();
  return make_result(std::move(out_shape), std::move(y), "slice_rows", {x.impl_ptr()},
                     [xi, start, row](std::span<const double> g) {
                       double* gx = xi->grad_buffer() + start * row;
                       for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                     });
}

Tensor slice_cols(const Tensor& x, int64_t start, int64_t count) {
  require_rank(x, 2, "slice_cols");
  const int64_t rows = x.size(0), cols = x.size(1);
  if (start < 0 || count < 0 || start + count > cols) {
    throw DimensionError("slice_cols [" + std::to_string(start) + ", +" +
                         std::to_string(count) + ") of " + shape_str(x.shape()));
  }
  const auto& xd = x.impl()->data;
  std::vector<double> y(sz(rows * count));
  for (int64_t r = 0; r < rows; ++r) {
    std::copy_n(xd.begin() + r * cols + start, count, y.begin() + r * count);
  }
  if (!needs_grad({&x})) return Tensor({rows, count}, std::move(y));
  TensorImpl* xi = x.impl();
  return make_result({rows, count}, std::move(y), "slice_cols", {x.impl_ptr()},
                     [xi, rows, cols, start, count](std::span<const double> g) {
                       double* gx = xi->grad_buffer();
                       for (int64_t r = 0; r < rows; ++r) {
                         for (int64_t c = 0; c < count; ++c) {
                           gx[r * cols + start + c] += g[sz(r * count + c)];
                         }
                       }
                     });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols of nothing");
  const int64_t rows = parts[0].size(0);
  int64_t cols = 0;
  for (const Tensor& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.size(0) != rows) {
      throw DimensionError("concat_cols row mismatch: " + shape_str(parts[0].shape()) +
                           " vs " + shape_str(p.shape()));
    }
    cols += p.size(1);
  }
  std::vector<double> y(sz(rows * cols));
  std::vector<int64_t> offsets;
  int64_t off = 0;
  for (const Tensor& p : parts) {
    offsets.push_back(off);
    const int64_t pc = p.size(1);
    const auto& pd = p.impl()->data;
    for (int64_t r = 0; r < rows; ++r) {
      std::copy_n(pd.begin() + r * pc, pc, y.begin() + r * cols + off);
    }
    off += pc;
  }
  if (!needs_grad(parts)) return Tensor({rows, cols}, std::move(y));
  std::vector<std::shared_ptr<TensorImpl>> ins;
  std::vector<TensorImpl*> raw;
  for (const Tensor& p : parts) {
    ins.push_back(p.impl_ptr());
    raw.push_back(p.impl());
  }
  return make_result({rows, cols}, std::move(y), "concat_cols", std::move(ins),
                     [raw = std::move(raw), offsets = std::move(offsets), rows,
                      cols](std::span<const double> g) {
                       for (size_t k = 0; k < raw.size(); ++k) {
                         double* gp = raw[k]->grad_buffer();
                         if (!gp) continue;
                         const int64_t pc = raw[k]->shape[1];
                         for (int64_t r = 0; r < rows; ++r) {
                           for (int64_t c = 0; c < pc; ++c) {
                             gp[r * pc + c] += g[sz(r * cols + offsets[k] + c)];
                           }
                         }
                       }
                     });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows of nothing");
  const int64_t cols = parts[0].size(1);
  int64_t rows = 0;
  std::vector<double> y;
  for (const Tensor& p : parts) {
    require_rank(p, 2, "concat_rows");
    if (p.size(1) != cols) {
      throw DimensionError("concat_rows column mismatch: " + shape_str(parts[0].shape()) +
                           " vs " + shape_str(p.shape()));
    }
    rows += p.size(0);
    y.insert(y.end(), p.impl()->data.begin(), p.impl()->data.end());
  }
  if (!needs_grad(parts)) return Tensor({rows, cols}, std::move(y));
  std::vector<std::shared_ptr<TensorImpl>> ins;
  std::vector<TensorImpl*> raw;
  for (const Tensor& p : parts) {
    ins.push_back(p.impl_ptr());
    raw.push_back(p.impl());
  }
  return make_result({rows, cols}, std::move(y), "concat_rows", std::move(ins),
                     [raw = std::move(raw)](std::span<const double> g) {
                       size_t off = 0;
                       for (TensorImpl* p : raw) {
                         const size_t n = p->data.size();
                         if (double* gp = p->grad_buffer()) {
                           for (size_t i = 0; i < n; ++i) gp[i] += g[off + i];
                         }
                         off += n;
                       }
                     });
}

Tensor broadcast_rows(const Tensor& v, int64_t rows) {
  require_rank(v, 1, "broadcast_rows");
  const int64_t d = v.size(0);
  const auto& vd = v.impl()->data;
  std::vector<double> y(sz(rows * d));
  for (int64_t r = 0; r < rows; ++r) std::copy(vd.begin(), vd.end(), y.begin() + r * d);
  if (!needs_grad({&v})) return Tensor({rows, d}, std::move(y));
  TensorImpl* vi = v.impl();
  return make_result({rows, d}, std::move(y), "broadcast_rows", {v.impl_ptr()},
                     [vi, rows, d](std::span<const double> g) {
                       double* gv = vi->grad_buffer();
                       for (int64_t r = 0; r < rows; ++r) {
                         for (int64_t i = 0; i < d; ++i) gv[i] += g[sz(r * d + i)];
                       }
                     });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.impl()->data) total += v;
  if (!needs_grad({&x})) return Tensor::scalar(total);
  TensorImpl* xi = x.impl();
  return make_result({}, {total}, "sum", {x.impl_ptr()}, [xi](std::span<const double> g) {
    double* gx = xi->grad_buffer();
    for (size_t i = 0; i < xi->data.size(); ++i) gx[i] += g[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor mean_rows(const Tensor& x) {
  require_rank(x, 2, "mean_rows");
  const int64_t t = x.size(0);
  if (t == 0) throw DimensionError("mean_rows of zero rows");
  const Tensor alpha = Tensor::full({t}, 1.0 / static_cast<double>(t));
  return weighted_sum_rows(x, alpha);
}

Tensor weighted_sum_rows(const Tensor& h, const Tensor& alpha) {
  require_rank(h, 2, "weighted_sum_rows");
  require_rank(alpha, 1, "weighted_sum_rows");
  const int64_t t = h.size(0), d = h.size(1);
  if (alpha.size(0) != t) {
    throw DimensionError("weighted_sum_rows: " + shape_str(h.shape()) + " with weights " +
                         shape_str(alpha.shape()));
  }
  const auto& hd = h.impl()->data;
  const auto& ad = alpha.impl()->data;
  std::vector<double> y(sz(d), 0.0);
  for (int64_t r = 0; r < t; ++r) {
    for (int64_t i = 0; i < d; ++i) y[sz(i)] += ad[sz(r)] * hd[sz(r * d + i)];
  }
  if (!needs_grad({&h, &alpha})) return Tensor({d}, std::move(y));
  TensorImpl* hi = h.impl();
  TensorImpl* ai = alpha.impl();
  return make_result({d}, std::move(y), "weighted_sum_rows", {h.impl_ptr(), alpha.impl_ptr()},
                     [hi, ai, t, d](std::span<const double> g) {
                       double* gh = hi->grad_buffer();
                       double* ga = ai->grad_buffer();
                       for (int64_t r = 0; r < t; ++r) {
                         double acc = 0.0;
                         for (int64_t i = 0; i < d; ++i) {
                           if (gh) gh[r * d + i] += ai->data[sz(r)] * g[sz(i)];
                           acc += g[sz(i)] * hi->data[sz(r * d + i)];
                         }
                         if (ga) ga[r] += acc;
                       }
                     });
}

Tensor dropout(const Tensor& x, double p, Rng* rng, bool training) {
  if (!training || p <= 0.0) return x;
  if (p >= 1.0) throw ConfigError("dropout probability must be < 1");
  if (!rng) throw UsageError("dropout in training mode needs a mask stream");
  const double keep = 1.0 / (1.0 - p);
  std::vector<double> mask(sz(x.numel()));
  for (double& m : mask) m = rng->uniform() >= p ? keep : 0.0;
  return mul(x, Tensor(x.shape(), std::move(mask)));
}

}  // namespace satconf
