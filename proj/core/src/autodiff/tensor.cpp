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

#include "rftag/autodiff/tensor.hpp"

#include "rftag/error.hpp"

namespace rftag::ad {

template <typename T>
Tensor<T>::Tensor(Array<T> value, bool requires_grad)
    : node_(std::make_shared<TensorNode<T>>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

template <typename T>
const Array<T>& Tensor<T>::grad() const {
  if (!node_->grad) throw ValidationError("tensor has no gradient");
  return *node_->grad;
}

template <typename T>
Array<T>& Tensor<T>::mutable_grad() {
  if (!node_->grad) node_->grad.emplace(node_->value.shape(), T{0});
  return *node_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (node_->grad) node_->grad->fill(T{0});
}

template <typename T>
void Tensor<T>::accumulate_grad(const Array<T>& g) const {
  if (g.shape() != node_->value.shape()) {
    throw ValidationError("gradient shape " + shape_str(g.shape()) +
                          " does not match tensor shape " +
                          shape_str(node_->value.shape()));
  }
  if (!node_->grad) {
    node_->grad = g;
    return;
  }
  auto dst = node_->grad->data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
Tensor<T> Tape<T>::record(Tape* tape, std::string name, Array<T> value,
                          std::initializer_list<const Tensor<T>*> inputs,
                          BackwardFn backward) {
  bool needs_grad = false;
  for (const Tensor<T>* in : inputs) {
    if (in && in->requires_grad()) needs_grad = true;
  }
  Tensor<T> out(std::move(value), tape != nullptr && needs_grad);
  out.node()->leaf = false;
  if (out.requires_grad()) {
    tape->ops_.push_back({std::move(name), out.shared_node(),
                          std::move(backward)});
  }
  return out;
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1 || loss.value().rank() != 0) {
    throw ValidationError(
        "backward requires a scalar loss, got shape " +
        (loss.defined() ? shape_str(loss.shape()) : std::string("<null>")));
  }
  if (!loss.requires_grad()) {
    throw ValidationError("loss is not connected to any tensor requiring grad");
  }
  if (loss.is_leaf()) {
    loss.accumulate_grad(Array<T>(Shape{}, T{1}));
    return;
  }
  bool on_tape = false;
  for (auto& op : ops_) {
    op.output->grad.reset();
    if (op.output == loss.shared_node()) on_tape = true;
  }
  if (!on_tape) throw ValidationError("loss was not recorded on this tape");

  loss.shared_node()->grad.emplace(Shape{}, T{1});
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    if (!it->output->grad) continue;
    it->backward(*it->output->grad);
  }
  for (auto& op : ops_) op.output->grad.reset();
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace rftag::ad
