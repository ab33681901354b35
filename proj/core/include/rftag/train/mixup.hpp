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

#include <cstddef>
#include <random>
#include <vector>

#include "rftag/autodiff/array.hpp"

namespace rftag::train {

struct MixupDraw {
  double lambda = 1.0;
  std::vector<std::size_t> partner;  // permutation of the batch
};

// Beta(a, b) through two gamma draws.
double sample_beta(double a, double b, std::mt19937_64& rng);

// lambda ~ Beta(alpha, alpha), snapped to multiples of 2^-24 so that it,
// 1 - lambda and every mixed binary label are exact in float.
MixupDraw draw_mixup(std::size_t n, double alpha, std::mt19937_64& rng);

struct MixedBatch {
  ad::Array<float> x;
  ad::Array<float> y;
  MixupDraw draw;
};

// x' = lambda x + (1 - lambda) x[partner], same for y. Leading dimension
// is the batch.
MixedBatch mixup_apply(const ad::Array<float>& x, const ad::Array<float>& y,
                       const MixupDraw& draw);

MixedBatch mixup_batch(const ad::Array<float>& x, const ad::Array<float>& y,
                       double alpha, std::mt19937_64& rng);

}  // namespace rftag::train
