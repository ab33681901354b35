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

#include <cstdint>
#include <span>
#include <vector>

#include "rftag/autodiff/tensor.hpp"

namespace rftag::ad {

template <typename T>
struct AdamState {
  Array<T> m;
  Array<T> v;
  std::uint64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState zeros_like(const Shape& shape);
};

// One bias-corrected Adam update of `param` from its accumulated grad. A
// parameter without a grad is treated as having a zero gradient.
template <typename T>
void adam_step(Tensor<T>& param, AdamState<T>& state, double lr);

// Adam over a fixed parameter list, one state per parameter.
template <typename T>
class Adam {
 public:
  explicit Adam(std::vector<Tensor<T>> params);

  void step(double lr);
  void zero_grad();

  const std::vector<AdamState<T>>& states() const { return states_; }

 private:
  std::vector<Tensor<T>> params_;
  std::vector<AdamState<T>> states_;
};

extern template struct AdamState<float>;
extern template struct AdamState<double>;
extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace rftag::ad
