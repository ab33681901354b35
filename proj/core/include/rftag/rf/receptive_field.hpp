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
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rftag/autodiff/array.hpp"
#include "rftag/rf/arch.hpp"

namespace rftag::rf {

struct AxisField {
  std::size_t rf = 1;    // receptive field in input positions
  std::size_t jump = 1;  // product of strides
  friend bool operator==(const AxisField&, const AxisField&) = default;
};

struct LayerField {
  std::string name;
  AxisField freq;
  AxisField time;
  std::size_t max_rf_freq = 1;  // running maxima up to this layer
  std::size_t max_rf_time = 1;
};

struct RFReport {
  std::vector<LayerField> layers;
  std::size_t rf_freq = 1;
  std::size_t rf_time = 1;

  std::size_t rf(Axis axis) const {
    return axis == Axis::kFreq ? rf_freq : rf_time;
  }
};

// Analytic receptive field: along a path r += (k - 1) * j and j *= s per
// axis from r = j = 1; residual merges take the per-axis maximum.
RFReport compute_rf(const ArchSpec& arch);

// Aligned text table, one row per layer.
std::string format_rf_table(const RFReport& report);
// CSV with header layer,rf_freq,jump_freq,rf_time,jump_time.
std::string format_rf_csv(const RFReport& report);

// Extent along `axis` of the nonzero entries of an NCHW gradient
// (H = frequency, W = time). Returns 0 for an all-zero gradient.
std::size_t support_extent(const ad::Array<double>& grad, Axis axis,
                           std::size_t* first = nullptr,
                           std::size_t* last = nullptr);

// Gradient-connectivity oracle. Instantiates `arch` with one channel per
// layer, strictly positive weights, max pools replaced by average pools
// (same window connectivity, dense gradient), and measures along `axis`
// how many input positions reach one central output unit.
//
// `extent` is the input size along `axis`; by default it is chosen large
// enough to contain the analytic field. The other axis uses the smallest
// extent the architecture accepts.
std::size_t empirical_rf(const ArchSpec& arch, Axis axis,
                         std::optional<std::size_t> extent = std::nullopt);

// Architecture whose adjustable conv slots (in layer order) are sized by
// rho: the first rho keep their frequency kernel, the rest become 1.
struct RhoTemplate {
  ArchSpec base;
  // When set, time kernels follow the same rule with this count; when
  // unset time kernels are left as in `base`.
  std::optional<std::size_t> rho_time;

  std::size_t slots() const;
};

ArchSpec apply_rho(const RhoTemplate& tmpl, std::size_t rho);

inline constexpr std::size_t kUnboundedBudget =
    std::numeric_limits<std::size_t>::max();

// Largest rho whose frequency RF fits in `budget`; linear scan.
std::size_t max_rho_for_budget(const RhoTemplate& tmpl, std::size_t budget);

}  // namespace rftag::rf
