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

// satconf/src/tensor.cc

#include "satconf/tensor.h"

#include <sstream>
#include <unordered_set>
#include <utility>

#include "satconf/errors.h"

namespace satconf {

namespace {
thread_local bool t_grad_enabled = true;
}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t s : shape) {
    if (s < 0) throw DimensionError("negative extent in shape " + shape_str(shape));
    n *= s;
  }
  return n;
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
    throw DimensionError("shape " + shape_str(shape) + " holds " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(data.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = static_cast<size_t>(shape_numel(shape));
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = static_cast<size_t>(shape_numel(shape));
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({}, {value}, requires_grad);
}

Tensor Tensor::vec(std::vector<double> values, bool requires_grad) {
  const auto n = static_cast<int64_t>(values.size());
  return Tensor({n}, std::move(values), requires_grad);
}

Tensor Tensor::mat(int64_t rows, int64_t cols, std::vector<double> values,
                   bool requires_grad) {
  return Tensor({rows, cols}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const {
  if (!impl_) throw UsageError("access to an undefined tensor");
  return impl_->shape;
}

int64_t Tensor::size(int axis) const {
  const int r = rank();
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_str(shape()));
  }
  return impl_->shape[static_cast<size_t>(a)];
}

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  }
  return impl_->data[0];
}

double Tensor::at(int64_t i, int64_t j) const {
  return impl_->data[static_cast<size_t>(i * size(-1) + j)];
}

Tensor& Tensor::set_requires_grad(bool value) {
  impl_->requires_grad = value;
  return *this;
}

void Tensor::zero_grad() {
  if (impl_) impl_->grad.assign(impl_->data.size(), 0.0);
}

void Tensor::assign(Shape shape, std::vector<double> data) {
  if (!is_leaf()) throw UsageError("assign() on a non-leaf tensor");
  if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
    throw DimensionError("assign: shape " + shape_str(shape) + " vs " +
                         std::to_string(data.size()) + " values");
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->grad.clear();
}

Tensor Tensor::clone() const {
  return Tensor(impl_->shape, impl_->data, false);
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw UsageError("backward() needs a scalar loss, got shape " +
                     (loss.defined() ? shape_str(loss.shape()) : "undefined"));
  }
  TensorImpl* root = loss.impl();
  if (!root->requires_grad) return;

  // Iterative post-order DFS: children land before their consumers.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> seen;
  std::vector<std::pair<TensorImpl*, size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    TensorImpl* node = stack.back().first;
    const size_t next = stack.back().second;
    const auto& fn = node->grad_fn;
    if (fn && next < fn->inputs.size()) {
      ++stack.back().second;
      TensorImpl* child = fn->inputs[next].get();
      if (child->requires_grad && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (TensorImpl* node : order) {
    if (node->grad_fn) node->grad.assign(node->data.size(), 0.0);
  }
  root->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* node = *it;
    if (node->grad_fn && node->grad_fn->backward) {
      node->grad_fn->backward(node->grad);
    }
  }
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool grad_enabled() { return t_grad_enabled; }

namespace detail {

bool needs_grad(std::initializer_list<const Tensor*> inputs) {
  if (!t_grad_enabled) return false;
  for (const Tensor* t : inputs) {
    if (t && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

bool needs_grad(std::span<const Tensor> inputs) {
  if (!t_grad_enabled) return false;
  for (const Tensor& t : inputs) {
    if (t.defined() && t.requires_grad()) return true;
  }
  return false;
}

Tensor make_result(Shape shape, std::vector<double> data, const char* op,
                   std::vector<std::shared_ptr<TensorImpl>> inputs,
                   std::function<void(std::span<const double>)> backward_fn) {
  Tensor out(std::move(shape), std::move(data), false);
  if (backward_fn) {
    auto node = std::make_shared<GradNode>();
    node->op = op;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward_fn);
    out.impl()->grad_fn = std::move(node);
    out.impl()->requires_grad = true;
  }
  return out;
}

}  // namespace detail

}  // namespace satconf
