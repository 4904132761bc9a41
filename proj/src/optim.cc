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

// satconf/src/optim.cc

#include "satconf/optim.h"

#include <cmath>

namespace satconf {

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (const Tensor& p : params_) {
    m_.emplace_back(static_cast<size_t>(p.numel()), 0.0);
    v_.emplace_back(static_cast<size_t>(p.numel()), 0.0);
  }
}

void Adam::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto x = p.mutable_data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t j = 0; j < x.size(); ++j) {
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g[j];
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g[j] * g[j];
      x[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + config_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

double Adam::grad_norm() const {
  double s = 0.0;
  for (const Tensor& p : params_) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) s += g * g;
  }
  return std::sqrt(s);
}

double Adam::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (max_norm > 0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (Tensor& p : params_) {
      if (!p.has_grad()) continue;
      for (double& g : p.mutable_grad()) g *= f;
    }
  }
  return norm;
}

}  // namespace satconf
