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

#include "rftag/autodiff/adam.hpp"

#include <cmath>

#include "rftag/error.hpp"

namespace rftag::ad {

template <typename T>
AdamState<T> AdamState<T>::zeros_like(const Shape& shape) {
  AdamState s;
  s.m = Array<T>(shape, T{0});
  s.v = Array<T>(shape, T{0});
  return s;
}

template <typename T>
void adam_step(Tensor<T>& param, AdamState<T>& state, double lr) {
  if (!(lr > 0)) {
    throw ValidationError("adam_step: learning rate must be positive, got " +
                          std::to_string(lr));
  }
  if (state.m.shape() != param.shape() || state.v.shape() != param.shape()) {
    throw ValidationError("adam_step: state shape " +
                          shape_str(state.m.shape()) +
                          " does not match parameter " +
                          shape_str(param.shape()));
  }
  if (param.has_grad() && param.grad().shape() != param.shape()) {
    throw ValidationError("adam_step: grad shape mismatch");
  }
  ++state.t;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  auto w = param.mutable_value().data();
  const bool has_grad = param.has_grad();
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double g = has_grad ? static_cast<double>(param.grad()[i]) : 0.0;
    const double m = b1 * state.m[i] + (1 - b1) * g;
    const double v = b2 * state.v[i] + (1 - b2) * g * g;
    state.m[i] = static_cast<T>(m);
    state.v[i] = static_cast<T>(v);
    const double mhat = m / c1;
    const double vhat = v / c2;
    w[i] = static_cast<T>(w[i] - lr * mhat / (std::sqrt(vhat) + state.eps));
  }
}

template <typename T>
Adam<T>::Adam(std::vector<Tensor<T>> params) : params_(std::move(params)) {
  states_.reserve(params_.size());
  for (const auto& p : params_) {
    states_.push_back(AdamState<T>::zeros_like(p.shape()));
  }
}

template <typename T>
void Adam<T>::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    adam_step(params_[i], states_[i], lr);
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(Tensor<float>&, AdamState<float>&, double);
template void adam_step(Tensor<double>&, AdamState<double>&, double);
template class Adam<float>;
template class Adam<double>;

}  // namespace rftag::ad
