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

// satconf/src/gradcheck.cc

#include "satconf/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "satconf/ops.h"
#include "satconf/rng.h"

namespace satconf {

namespace {

double projected(const Tensor& y, const std::vector<double>& weights) {
  const auto d = y.data();
  double total = 0.0;
  for (size_t i = 0; i < d.size(); ++i) total += d[i] * weights[i];
  return total;
}

}  // namespace

GradCheckResult grad_check(const TensorFn& f, const std::vector<Tensor>& inputs, double eps,
                           uint64_t seed) {
  for (Tensor in : inputs) {
    if (in.defined()) in.zero_grad();
  }
  const Tensor y = f(inputs);
  std::vector<double> weights(static_cast<size_t>(y.numel()), 1.0);
  if (y.numel() > 1) {
    Rng rng(seed);
    for (double& w : weights) w = rng.normal();
  }
  backward(sum(mul(y, Tensor(y.shape(), weights))));

  GradCheckResult result;
  for (size_t k = 0; k < inputs.size(); ++k) {
    Tensor in = inputs[k];
    if (!in.defined() || !in.requires_grad()) continue;
    std::vector<double> analytic(in.grad().begin(), in.grad().end());
    if (analytic.empty()) analytic.assign(static_cast<size_t>(in.numel()), 0.0);
    auto data = in.mutable_data();
    for (size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      double plus = 0.0, minus = 0.0;
      {
        NoGradGuard guard;
        data[i] = orig + eps;
        plus = projected(f(inputs), weights);
        data[i] = orig - eps;
        minus = projected(f(inputs), weights);
        data[i] = orig;
      }
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), kGradFloor});
      const double err = std::abs(a - numeric) / denom;
      ++result.coordinates;
      if (err > result.max_rel_error || result.worst.empty()) {
        result.max_rel_error = std::max(result.max_rel_error, err);
        std::ostringstream os;
        os << "input " << k << " index " << i << ": analytic " << a << " numeric " << numeric;
        result.worst = os.str();
      }
    }
  }
  return result;
}

}  // namespace satconf
