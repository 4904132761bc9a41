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

// satconf/tensor.h

#ifndef SATCONF_TENSOR_H_
#define SATCONF_TENSOR_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace satconf {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& shape);
int64_t shape_numel(const Shape& shape);

struct TensorImpl;

namespace detail {

// One recorded operation. `inputs` keeps the operands alive for as long as
// the result is reachable; `backward` reads the result's gradient and
// accumulates into the gradients of the inputs.
struct GradNode {
  const char* op = "";
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void(std::span<const double> grad_out)> backward;
};

}  // namespace detail

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::shared_ptr<detail::GradNode> grad_fn;

  // Lazily allocated gradient buffer; nullptr when no gradient is wanted.
  double* grad_buffer() {
    if (!requires_grad) return nullptr;
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    return grad.data();
  }
};

// Dense row-major array of doubles with an optional gradient. Copies share
// storage (handle semantics); use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vec(std::vector<double> values, bool requires_grad = false);
  static Tensor mat(int64_t rows, int64_t cols, std::vector<double> values,
                    bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  // Negative axes count from the end.
  int64_t size(int axis) const;
  int64_t numel() const { return static_cast<int64_t>(impl_->data.size()); }

  std::span<const double> data() const { return impl_->data; }
  std::span<double> mutable_data() { return impl_->data; }
  double item() const;
  double at(int64_t i) const { return impl_->data[static_cast<size_t>(i)]; }
  double at(int64_t i, int64_t j) const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool value);
  bool has_grad() const { return impl_->grad.size() == impl_->data.size(); }
  std::span<const double> grad() const { return impl_->grad; }
  std::span<double> mutable_grad() { return impl_->grad; }
  void zero_grad();
  bool is_leaf() const { return impl_->grad_fn == nullptr; }

  // Replaces shape and contents of a leaf in place; every handle sees the
  // change. Used for loading checkpoints and widening projections.
  void assign(Shape shape, std::vector<double> data);

  // Deep copy without graph history.
  Tensor clone() const;
  // Shares no storage; same values, no history, requires_grad = false.
  Tensor detach() const { return clone(); }

  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& impl_ptr() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Reverse-mode pass from a scalar loss. Gradients accumulate into the
// `grad` of every reachable tensor that requires grad; intermediate results
// are reset first, so calling twice doubles leaf gradients.
void backward(const Tensor& loss);

// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

namespace detail {

// True when a result computed from `inputs` must record a node.
bool needs_grad(std::initializer_list<const Tensor*> inputs);
bool needs_grad(std::span<const Tensor> inputs);

Tensor make_result(Shape shape, std::vector<double> data, const char* op,
                   std::vector<std::shared_ptr<TensorImpl>> inputs,
                   std::function<void(std::span<const double>)> backward);

}  // namespace detail

}  // namespace satconf

#endif  // SATCONF_TENSOR_H_
