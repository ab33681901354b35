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

#include <array>
#include <cstddef>
#include <optional>

#include "rftag/autodiff/tensor.hpp"

// Differentiable operations over NCHW tensors. Every op takes the tape to
// record on as its first argument; pass nullptr to run without recording.
// Shapes must match exactly: the only broadcast is the per-channel bias add.
namespace rftag::ad {

using Pair = std::array<std::size_t, 2>;

enum class Mode { kTrain, kEval };

struct Conv2dParams {
  Pair stride{1, 1};
  Pair padding{0, 0};
};

// Cross-correlation (no kernel flip). `bias` may be an undefined Tensor.
template <typename T>
Tensor<T> conv2d(Tape<T>* tape, const Tensor<T>& input,
                 const Tensor<T>& weight, const Tensor<T>& bias,
                 Conv2dParams params = {});

template <typename T>
struct BatchNormState {
  Array<T> running_mean;
  Array<T> running_var;
  // Number of batches absorbed; drives the cumulative average when no
  // momentum is given.
  std::size_t updates = 0;
  bool populated = false;

  static BatchNormState empty(std::size_t channels);
  // Mean 0, variance 1: usable in eval mode before any training.
  static BatchNormState identity(std::size_t channels);
};

struct BatchNormOptions {
  double eps = 1e-5;
  // Weight of the new batch in the running average. nullopt selects a
  // cumulative (equal-weight) average over all batches seen.
  std::optional<double> momentum = 0.1;
};

template <typename T>
Tensor<T> batchnorm2d(Tape<T>* tape, const Tensor<T>& input,
                      const Tensor<T>& gamma, const Tensor<T>& beta,
                      BatchNormState<T>& state, Mode mode,
                      BatchNormOptions options = {});

enum class Activation { kRelu, kSigmoid };

template <typename T>
Tensor<T> elementwise(Tape<T>* tape, const Tensor<T>& input, Activation kind);

template <typename T>
Tensor<T> relu(Tape<T>* tape, const Tensor<T>& input) {
  return elementwise(tape, input, Activation::kRelu);
}

template <typename T>
Tensor<T> sigmoid(Tape<T>* tape, const Tensor<T>& input) {
  return elementwise(tape, input, Activation::kSigmoid);
}

enum class PoolKind { kMax, kAvg, kGlobalAvg };

struct Pool2dParams {
  Pair kernel{2, 2};
  Pair stride{2, 2};
  Pair padding{0, 0};
};

// Average pooling counts padded cells in the divisor. kGlobalAvg ignores
// `params` and reduces H,W to 1,1.
template <typename T>
Tensor<T> pool2d(Tape<T>* tape, const Tensor<T>& input, PoolKind kind,
                 Pool2dParams params = {});

// input [N,F] x weight [F,O] + bias [O].
template <typename T>
Tensor<T> linear(Tape<T>* tape, const Tensor<T>& input,
                 const Tensor<T>& weight, const Tensor<T>& bias);

// Mean binary cross-entropy over all N*T entries, in the stable form
// max(z,0) - z*y + log(1 + exp(-|z|)). Targets may be soft.
template <typename T>
Tensor<T> bce_with_logits(Tape<T>* tape, const Tensor<T>& logits,
                          const Array<T>& targets);

template <typename T>
Tensor<T> add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(Tape<T>* tape, const Tensor<T>& a, T factor);

// Sum of all elements, as a rank-0 tensor.
template <typename T>
Tensor<T> sum(Tape<T>* tape, const Tensor<T>& a);

template <typename T>
Tensor<T> reshape(Tape<T>* tape, const Tensor<T>& a, Shape shape);

// forward_weight*a + (1-forward_weight)*b on the forward pass; the incoming
// gradient is split backward_weight / (1-backward_weight).
template <typename T>
Tensor<T> mix(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b,
              T forward_weight, T backward_weight);

// Appends a constant [H,W] plane as one extra channel of every sample.
template <typename T>
Tensor<T> append_channel(Tape<T>* tape, const Tensor<T>& input,
                         const Array<T>& plane);

}  // namespace rftag::ad
