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

#include "rftag/train/swa.hpp"

#include "rftag/error.hpp"

namespace rftag::train {

WeightSet snapshot(const zoo::Model& model) {
  WeightSet out;
  for (const auto& [name, t] : model.params) out.emplace(name, t.value().cast<double>());
  return out;
}

void swa_update(SWAState& state, const WeightSet& weights) {
  if (state.count == 0) {
    state.average = weights;
    state.count = 1;
    return;
  }
  if (weights.size() != state.average.size()) {
    throw ValidationError("swa_update: " + std::to_string(weights.size()) +
                          " tensors, average holds " + std::to_string(state.average.size()));
  }
  for (const auto& [name, w] : weights) {
    auto it = state.average.find(name);
    if (it == state.average.end()) throw ValidationError("swa_update: unknown tensor " + name);
    if (it->second.shape() != w.shape()) {
      throw ValidationError("swa_update: " + name + " has shape " + ad::shape_str(w.shape()) +
                            ", average has " + ad::shape_str(it->second.shape()));
    }
  }
  const double n = static_cast<double>(state.count);
  for (auto& [name, avg] : state.average) {
    const auto& w = weights.at(name);
    for (std::size_t i = 0; i < avg.numel(); ++i) avg[i] = (avg[i] * n + w[i]) / (n + 1.0);
  }
  ++state.count;
}

zoo::Model swa_model(const zoo::Model& like, const SWAState& state) {
  if (state.count == 0) throw ValidationError("SWA average is empty");
  zoo::Model m = zoo::clone_model(like);
  for (auto& [name, t] : m.params) {
    auto it = state.average.find(name);
    if (it == state.average.end() || it->second.shape() != t.shape()) {
      throw ValidationError("SWA average does not match parameter " + name);
    }
    t.mutable_value() = it->second.cast<float>();
  }
  return m;
}

}  // namespace rftag::train
