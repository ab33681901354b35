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
#include <map>
#include <string>

#include "rftag/autodiff/array.hpp"
#include "rftag/zoo/model.hpp"

namespace rftag::train {

using WeightSet = std::map<std::string, ad::Array<double>>;

struct SWAState {
  WeightSet average;
  std::size_t count = 0;
};

WeightSet snapshot(const zoo::Model& model);

// average <- (average * n + w) / (n + 1), accumulated in double.
void swa_update(SWAState& state, const WeightSet& weights);

// Copy of `like` carrying the averaged parameters. Batch-norm statistics
// are copied unchanged and need a refresh pass before use.
zoo::Model swa_model(const zoo::Model& like, const SWAState& state);

}  // namespace rftag::train
