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

#include "rftag/rf/receptive_field.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "rftag/autodiff/ops.hpp"
#include "rftag/error.hpp"

namespace rftag::rf {

namespace {

AxisField step(AxisField in, std::size_t kernel, std::size_t stride) {
  return {in.rf + (kernel - 1) * in.jump, in.jump * stride};
}

AxisField merge(AxisField a, AxisField b) {
  return {std::max(a.rf, b.rf), std::max(a.jump, b.jump)};
}

}  // namespace

RFReport compute_rf(const ArchSpec& arch) {
  arch.validate();
  RFReport report;
  report.layers.resize(arch.layers.size());
  const AxisField seed{1, 1};
  std::size_t max_f = 1, max_t = 1;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& l = arch.layers[i];
    const AxisField pf = i ? report.layers[i - 1].freq : seed;
    const AxisField pt = i ? report.layers[i - 1].time : seed;
    LayerField out{l.name, step(pf, l.kernel.freq, l.stride.freq),
                   step(pt, l.kernel.time, l.stride.time)};
    for (const auto& s : arch.skips_into(i)) {
      const AxisField sf = s.from ? report.layers[*s.from].freq : seed;
      const AxisField st = s.from ? report.layers[*s.from].time : seed;
      out.freq = merge(out.freq, sf);
      out.time = merge(out.time, st);
    }
    max_f = std::max(max_f, out.freq.rf);
    max_t = std::max(max_t, out.time.rf);
    out.max_rf_freq = max_f;
    out.max_rf_time = max_t;
    report.layers[i] = out;
  }
  report.rf_freq = report.layers.back().freq.rf;
  report.rf_time = report.layers.back().time.rf;
  return report;
}

std::string format_rf_table(const RFReport& report) {
  std::size_t width = 5;
  for (const auto& l : report.layers) width = std::max(width, l.name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "layer" << std::right
     << std::setw(9) << "rf_freq" << std::setw(11) << "jump_freq"
     << std::setw(9) << "rf_time" << std::setw(11) << "jump_time" << '\n';
  for (const auto& l : report.layers) {
    os << std::left << std::setw(static_cast<int>(width)) << l.name
       << std::right << std::setw(9) << l.freq.rf << std::setw(11)
       << l.freq.jump << std::setw(9) << l.time.rf << std::setw(11)
       << l.time.jump << '\n';
  }
  os << "receptive field: " << report.rf_freq << " (freq) x "
     << report.rf_time << " (time)\n";
  return os.str();
}

std::string format_rf_csv(const RFReport& report) {
  std::ostringstream os;
  os << "layer,rf_freq,jump_freq,rf_time,jump_time\n";
  for (const auto& l : report.layers) {
    os << l.name << ',' << l.freq.rf << ',' << l.freq.jump << ','
       << l.time.rf << ',' << l.time.jump << '\n';
  }
  return os.str();
}

std::size_t support_extent(const ad::Array<double>& grad, Axis axis,
                           std::size_t* first, std::size_t* last) {
  const std::size_t n = grad.dim(0), c = grad.dim(1), h = grad.dim(2),
                    w = grad.dim(3);
  const std::size_t len = axis == Axis::kFreq ? h : w;
  std::vector<bool> hit(len, false);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          if (grad.at(b, ch, y, x) != 0.0) hit[axis == Axis::kFreq ? y : x] = true;
        }
  const auto lo = std::find(hit.begin(), hit.end(), true);
  if (lo == hit.end()) return 0;
  const auto hi = std::find(hit.rbegin(), hit.rend(), true);
  const auto lo_i = static_cast<std::size_t>(lo - hit.begin());
  const auto hi_i = len - 1 - static_cast<std::size_t>(hi - hit.rbegin());
  if (first) *first = lo_i;
  if (last) *last = hi_i;
  return hi_i - lo_i + 1;
}

std::size_t empirical_rf(const ArchSpec& arch, Axis axis,
                         std::optional<std::size_t> extent) {
  const RFReport analytic = compute_rf(arch);
  const std::size_t r = analytic.rf(axis);
  const std::size_t jump = axis == Axis::kFreq ? analytic.layers.back().freq.jump
                                               : analytic.layers.back().time.jump;
  const std::size_t len = extent.value_or(4 * r + 4 * jump + 8);
  const std::string bound = "input extent " + std::to_string(len) +
                            " cannot contain the analytic receptive field " +
                            std::to_string(r);
  if (len <= r) throw ValidationError(bound);
  const Axis other_axis = axis == Axis::kFreq ? Axis::kTime : Axis::kFreq;
  const std::size_t other = min_input_extent(arch, other_axis, len);
  const Axes in_ext = axis == Axis::kFreq ? Axes{len, other} : Axes{other, len};
  std::vector<Axes> extents;
  try {
    extents = propagate_extents(arch, in_ext);
  } catch (const ValidationError&) {
    throw ValidationError(bound);
  }

  using T = ad::Tensor<double>;
  ad::Tape<double> tape;
  T input = T::parameter(ad::Array<double>({1, 1, in_ext.freq, in_ext.time}, 1.0));
  std::vector<T> outputs;
  outputs.reserve(arch.layers.size());
  T cur = input;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& l = arch.layers[i];
    const ad::Pair k{l.kernel.freq, l.kernel.time};
    const ad::Pair s{l.stride.freq, l.stride.time};
    const ad::Pair p{l.padding.freq, l.padding.time};
    switch (l.kind) {
      case LayerKind::kConv: {
        const double w = 1.0 / static_cast<double>(k[0] * k[1]);
        T weight = T::constant(ad::Array<double>({1, 1, k[0], k[1]}, w));
        cur = ad::conv2d(&tape, cur, weight, T(), {s, p});
        break;
      }
      case LayerKind::kMaxPool:
      case LayerKind::kAvgPool:
        cur = ad::pool2d(&tape, cur, ad::PoolKind::kAvg, {k, s, p});
        break;
      case LayerKind::kRelu:
        cur = ad::relu(&tape, cur);
        break;
      case LayerKind::kEntry:
      case LayerKind::kExit:
        break;
    }
    for (const auto& sk : arch.skips_into(i)) {
      cur = ad::add(&tape, cur, sk.from ? outputs[*sk.from] : input);
    }
    outputs.push_back(cur);
  }
  const Axes out = extents.back();
  ad::Array<double> mask({1, 1, out.freq, out.time}, 0.0);
  mask.at(0, 0, out.freq / 2, out.time / 2) = 1.0;
  T loss = ad::sum(&tape, ad::mul(&tape, cur, T::constant(mask)));
  tape.backward(loss);

  std::size_t first = 0, last = 0;
  const std::size_t measured = support_extent(input.grad(), axis, &first, &last);
  if (measured == 0 || first == 0 || last + 1 == len) {
    throw ValidationError(bound + " without touching the border");
  }
  return measured;
}

std::size_t RhoTemplate::slots() const {
  return static_cast<std::size_t>(
      std::count_if(base.layers.begin(), base.layers.end(),
                    [](const LayerSpec& l) { return l.adjustable; }));
}

ArchSpec apply_rho(const RhoTemplate& tmpl, std::size_t rho) {
  const std::size_t n = tmpl.slots();
  if (rho > n) {
    throw ValidationError("rho " + std::to_string(rho) + " exceeds the " +
                          std::to_string(n) + " adjustable slots");
  }
  if (tmpl.rho_time && *tmpl.rho_time > n) {
    throw ValidationError("rho_time " + std::to_string(*tmpl.rho_time) +
                          " exceeds the " + std::to_string(n) +
                          " adjustable slots");
  }
  ArchSpec arch = tmpl.base;
  std::size_t slot = 0;
  for (auto& l : arch.layers) {
    if (!l.adjustable) continue;
    if (slot >= rho) {
      l.kernel.freq = 1;
      l.padding.freq = 0;
    }
    if (tmpl.rho_time && slot >= *tmpl.rho_time) {
      l.kernel.time = 1;
      l.padding.time = 0;
    }
    ++slot;
  }
  return arch;
}

std::size_t max_rho_for_budget(const RhoTemplate& tmpl, std::size_t budget) {
  const std::size_t floor = compute_rf(apply_rho(tmpl, 0)).rf_freq;
  if (budget < floor) {
    throw ValidationError("frequency RF budget " + std::to_string(budget) +
                          " is below the rho=0 floor of " +
                          std::to_string(floor));
  }
  std::size_t best = 0;
  for (std::size_t rho = 1; rho <= tmpl.slots(); ++rho) {
    if (compute_rf(apply_rho(tmpl, rho)).rf_freq <= budget) best = rho;
  }
  return best;
}

}  // namespace rftag::rf
