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

// satconf/gradsuite.h

#ifndef SATCONF_GRADSUITE_H_
#define SATCONF_GRADSUITE_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace satconf {

struct GradSuiteEntry {
  std::string op;
  int instances = 0;
  double max_rel_error = 0.0;
  std::string worst;  // grad_check diagnostic of the worst instance
  double seconds = 0.0;
};

// Gradient checks of every differentiable operation, `instances` random tiny
// instances each (shapes drawn per instance). Deterministic in `seed`.
// `progress`, if set, is called after each op.
std::vector<GradSuiteEntry> run_grad_suite(
    int instances = 20, uint64_t seed = 1,
    const std::function<void(const GradSuiteEntry&)>& progress = {});

std::vector<std::string> grad_suite_ops();

}  // namespace satconf

#endif  // SATCONF_GRADSUITE_H_
