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

// satconf/gradcheck.h

#ifndef SATCONF_GRADCHECK_H_
#define SATCONF_GRADCHECK_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "satconf/tensor.h"

namespace satconf {

inline constexpr double kGradFloor = 1e-5;

using TensorFn = std::function<Tensor(const std::vector<Tensor>&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  int64_t coordinates = 0;
  std::string worst;  // "input <i> index <j>: analytic a numeric n"
};

// Compares reverse-mode gradients with central differences. A non-scalar
// output is reduced through a fixed random projection (seeded), so every
// output coordinate contributes. Only inputs with requires_grad are probed.
// Error per coordinate is |a - n| / max(|a|, |n|, kGradFloor). The floor
// sits above the rounding noise of central differences (about 1e-10 for
// unit-scale outputs), so coordinates whose true gradient is zero do not
// report noise as a large relative error.
GradCheckResult grad_check(const TensorFn& f, const std::vector<Tensor>& inputs,
                           double eps = 1e-5, uint64_t seed = 0);

}  // namespace satconf

#endif  // SATCONF_GRADCHECK_H_
