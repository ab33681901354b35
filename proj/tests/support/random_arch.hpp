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

#include <random>
#include <string>

#include "rftag/rf/arch.hpp"

namespace rftag::testing {

// Random chain of at most `max_depth` layers drawn from conv, max/avg
// pool, relu and stride-1 residual blocks. Kernels are drawn from {1,3,5}
// and strides from {1,2} independently per axis.
inline rf::ArchSpec random_arch(std::mt19937_64& rng, std::size_t max_depth = 6) {
  using rf::Axes;
  using rf::LayerKind;
  std::uniform_int_distribution<std::size_t> depth_d(1, max_depth);
  std::uniform_int_distribution<int> kind_d(0, 9);
  const std::size_t kernels[] = {1, 3, 5};
  std::uniform_int_distribution<int> k_d(0, 2);
  std::uniform_int_distribution<std::size_t> s_d(1, 2);
  auto pad = [&](std::size_t k) {
    return std::uniform_int_distribution<std::size_t>(0, (k - 1) / 2)(rng);
  };
  rf::ArchSpec arch;
  arch.input_bins = 0;
  const std::size_t depth = depth_d(rng);
  for (std::size_t i = 0; i < depth; ++i) {
    const std::string name = "l" + std::to_string(i);
    const int kind = kind_d(rng);
    if (kind <= 4) {
      const Axes k{kernels[k_d(rng)], kernels[k_d(rng)]};
      arch.layers.push_back({name, LayerKind::kConv, k, {s_d(rng), s_d(rng)},
                             {pad(k.freq), pad(k.time)}});
    } else if (kind <= 6) {
      const Axes k{kernels[k_d(rng)], kernels[k_d(rng)]};
      arch.layers.push_back({name,
                             kind == 5 ? LayerKind::kMaxPool : LayerKind::kAvgPool,
                             k, {s_d(rng), s_d(rng)}, {pad(k.freq), pad(k.time)}});
    } else if (kind == 7) {
      arch.layers.push_back({name, LayerKind::kRelu});
    } else {
      const std::size_t entry = arch.layers.size();
      arch.layers.push_back({name + ".in", LayerKind::kEntry});
      const Axes k1{kernels[k_d(rng)], kernels[k_d(rng)]};
      const Axes k2{kernels[k_d(rng)], kernels[k_d(rng)]};
      arch.layers.push_back({name + ".c1", LayerKind::kConv, k1, {1, 1},
                             {(k1.freq - 1) / 2, (k1.time - 1) / 2}});
      arch.layers.push_back({name + ".r", LayerKind::kRelu});
      arch.layers.push_back({name + ".c2", LayerKind::kConv, k2, {1, 1},
                             {(k2.freq - 1) / 2, (k2.time - 1) / 2}});
      arch.layers.push_back({name + ".out", LayerKind::kExit});
      arch.skips.push_back({entry, arch.layers.size() - 1});
    }
  }
  arch.input_bins = 256;
  return arch;
}

}  // namespace rftag::testing
