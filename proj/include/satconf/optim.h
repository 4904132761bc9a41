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

// satconf/optim.h

#ifndef SATCONF_OPTIM_H_
#define SATCONF_OPTIM_H_

#include <vector>

#include "satconf/tensor.h"

namespace satconf {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};

// Adam over a fixed list of leaf tensors. Parameters without a gradient
// buffer are skipped for that step (their moments stay untouched).
class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, AdamConfig config = {});

  void step(double lr);
  void zero_grad();

  // L2 norm over all gradients.
  double grad_norm() const;
  // Rescales gradients so that their norm is at most max_norm; returns the
  // norm before clipping.
  double clip_grad_norm(double max_norm);

  int64_t steps() const { return t_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_, v_;
  int64_t t_ = 0;
};

}  // namespace satconf

#endif  // SATCONF_OPTIM_H_
