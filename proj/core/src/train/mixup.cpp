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

#include "rftag/train/mixup.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "rftag/error.hpp"

namespace rftag::train {

double sample_beta(double a, double b, std::mt19937_64& rng) {
  if (!(a > 0 && b > 0)) throw ValidationError("Beta parameters must be positive");
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  for (;;) {
    const double x = ga(rng), y = gb(rng);
    if (x + y > 0) return x / (x + y);
  }
}

MixupDraw draw_mixup(std::size_t n, double alpha, std::mt19937_64& rng) {
  if (n < 2) throw ValidationError("mixup needs a batch of at least 2");
  if (!(alpha > 0)) throw ValidationError("mixup alpha must be positive");
  constexpr double kGrid = 16777216.0;  // 2^24
  MixupDraw d;
  d.lambda = std::round(sample_beta(alpha, alpha, rng) * kGrid) / kGrid;
  d.partner.resize(n);
  std::iota(d.partner.begin(), d.partner.end(), 0);
  std::shuffle(d.partner.begin(), d.partner.end(), rng);
  return d;
}

MixedBatch mixup_apply(const ad::Array<float>& x, const ad::Array<float>& y,
                       const MixupDraw& draw) {
  const std::size_t n = x.dim(0);
  if (y.dim(0) != n || draw.partner.size() != n) {
    throw ValidationError("mixup: batch sizes of inputs, labels and permutation differ");
  }
  std::vector<bool> seen(n, false);
  for (std::size_t p : draw.partner) {
    if (p >= n || seen[p]) throw ValidationError("mixup: partner list is not a permutation");
    seen[p] = true;
  }
  if (!(draw.lambda >= 0 && draw.lambda <= 1)) {
    throw ValidationError("mixup: lambda outside [0,1]");
  }
  const float lam = static_cast<float>(draw.lambda);
  const float rest = 1.0f - lam;
  auto mix = [&](const ad::Array<float>& a) {
    ad::Array<float> out(a.shape());
    const std::size_t per = a.numel() / n;
    for (std::size_t i = 0; i < n; ++i) {
      const float* self = a.data().data() + i * per;
      const float* other = a.data().data() + draw.partner[i] * per;
      float* dst = out.data().data() + i * per;
      for (std::size_t k = 0; k < per; ++k) dst[k] = lam * self[k] + rest * other[k];
    }
    return out;
  };
  return {mix(x), mix(y), draw};
}

MixedBatch mixup_batch(const ad::Array<float>& x, const ad::Array<float>& y,
                       double alpha, std::mt19937_64& rng) {
  return mixup_apply(x, y, draw_mixup(x.dim(0), alpha, rng));
}

}  // namespace rftag::train
