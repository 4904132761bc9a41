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

// satconf/errors.h

#ifndef SATCONF_ERRORS_H_
#define SATCONF_ERRORS_H_

#include <stdexcept>
#include <string>

namespace satconf {

// Shape or dimension mismatch between operands.
class DimensionError : public std::invalid_argument {
 public:
  explicit DimensionError(const std::string& what)
      : std::invalid_argument("dimension error: " + what) {}
};

// Invalid model / integration / training configuration.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what)
      : std::invalid_argument("configuration error: " + what) {}
};

// API misuse: wrong call order, missing inputs, bad data.
class UsageError : public std::invalid_argument {
 public:
  explicit UsageError(const std::string& what)
      : std::invalid_argument("usage error: " + what) {}
};

// NaN loss, gradient-check failure and similar numerical breakdowns.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what)
      : std::runtime_error("numerical error: " + what) {}
};

}  // namespace satconf

#endif  // SATCONF_ERRORS_H_
