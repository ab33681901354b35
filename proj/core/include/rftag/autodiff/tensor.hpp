// Copyright 2026 The rftag Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rftag/autodiff/array.hpp"

namespace rftag::ad {

template <typename T>
struct TensorNode {
  Array<T> value;
  std::optional<Array<T>> grad;
  bool requires_grad = false;
  bool leaf = true;
};

// Shared handle to a value in the autodiff graph. Copies alias the same
// node, so a parameter held by a model and referenced by a recorded op is
// one object.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Array<T> value, bool requires_grad = false);

  static Tensor constant(Array<T> value) { return Tensor(std::move(value)); }
  static Tensor parameter(Array<T> value) {
    return Tensor(std::move(value), true);
  }

  bool defined() const { return node_ != nullptr; }
  const Array<T>& value() const { return node_->value; }
  Array<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t numel() const { return node_->value.numel(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool is_leaf() const { return node_->leaf; }
  bool has_grad() const { return node_->grad.has_value(); }
  const Array<T>& grad() const;
  Array<T>& mutable_grad();
  void zero_grad();

  // Adds into grad, allocating zeros on first touch.
  void accumulate_grad(const Array<T>& g) const;

  TensorNode<T>* node() const { return node_.get(); }
  const std::shared_ptr<TensorNode<T>>& shared_node() const { return node_; }

  static Tensor from_node(std::shared_ptr<TensorNode<T>> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

// Records differentiable operations in execution order. Every op's inputs
// exist before the op is recorded, so the list is topologically sorted and
// a reverse sweep visits each op once.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(const Array<T>& grad_output)>;

  struct Op {
    std::string name;
    std::shared_ptr<TensorNode<T>> output;
    BackwardFn backward;
  };

  // Wraps `value` into a non-leaf tensor and, when any input needs a
  // gradient and this tape is active, records its backward rule.
  static Tensor<T> record(Tape* tape, std::string name, Array<T> value,
                          std::initializer_list<const Tensor<T>*> inputs,
                          BackwardFn backward);

  // Populates grads of every requires_grad tensor reachable from `loss`.
  // Leaf grads accumulate across calls; callers zero them explicitly.
  void backward(const Tensor<T>& loss);

  std::size_t size() const { return ops_.size(); }
  const std::vector<Op>& ops() const { return ops_; }
  void clear() { ops_.clear(); }

 private:
  std::vector<Op> ops_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace rftag::ad
