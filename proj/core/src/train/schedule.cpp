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

#include "rftag/train/schedule.hpp"

#include <cmath>
#include <string>

#include "rftag/error.hpp"

namespace rftag::train {

void TrainConfig::validate() const {
  const std::size_t sum = warmup_epochs + constant_epochs + decay_epochs + tail_epochs;
  if (sum != total_epochs) {
    throw ValidationError("schedule segments " + std::to_string(warmup_epochs) + "+" +
                          std::to_string(constant_epochs) + "+" +
                          std::to_string(decay_epochs) + "+" + std::to_string(tail_epochs) +
                          " do not add up to total_epochs " + std::to_string(total_epochs));
  }
  if (total_epochs == 0) throw ValidationError("total_epochs must be positive");
  if (!(lr_peak > lr_final && lr_final > 0)) {
    throw ValidationError("learning rates must satisfy lr_peak > lr_final > 0");
  }
  if (!(warmup_start_factor > 0 && warmup_start_factor <= 1)) {
    throw ValidationError("warmup_start_factor must lie in (0, 1]");
  }
  if (!(mixup_alpha >= 0) || !std::isfinite(mixup_alpha)) {
    throw ValidationError("mixup_alpha must be >= 0");
  }
  if (batch_size == 0) throw ValidationError("batch_size must be positive");
  if (crop_frames == 0) throw ValidationError("crop_frames must be positive");
  if (swa_every == 0) throw ValidationError("swa_every must be positive");
}

TrainConfig TrainConfig::scaled(std::size_t total) const {
  if (total == 0) throw ValidationError("cannot scale a schedule to 0 epochs");
  TrainConfig c = *this;
  const double f = static_cast<double>(total) / static_cast<double>(total_epochs);
  auto part = [&](std::size_t n) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * f + 0.5));
  };
  c.total_epochs = total;
  c.warmup_epochs = part(warmup_epochs);
  c.constant_epochs = part(constant_epochs);
  c.decay_epochs = part(decay_epochs);
  const std::size_t used = c.warmup_epochs + c.constant_epochs + c.decay_epochs;
  if (used > total) {
    throw ValidationError("schedule cannot be scaled to " + std::to_string(total) + " epochs");
  }
  c.tail_epochs = total - used;
  return c;
}

double lr_at(std::size_t epoch, const TrainConfig& c) {
  if (epoch >= c.total_epochs) {
    throw ValidationError("epoch " + std::to_string(epoch) + " outside [0, " +
                          std::to_string(c.total_epochs) + ")");
  }
  const std::size_t flat_start = c.warmup_epochs;
  const std::size_t decay_start = flat_start + c.constant_epochs;
  const std::size_t tail_start = decay_start + c.decay_epochs;
  if (epoch < flat_start) {
    const double t = static_cast<double>(epoch) / static_cast<double>(c.warmup_epochs);
    return c.lr_peak * (c.warmup_start_factor + (1.0 - c.warmup_start_factor) * t);
  }
  if (epoch < decay_start) return c.lr_peak;
  if (epoch < tail_start) {
    const double t = static_cast<double>(epoch - decay_start) /
                     static_cast<double>(c.decay_epochs);
    // Two-sided lerp: exact at both ends of the segment.
    return (1.0 - t) * c.lr_peak + t * c.lr_final;
  }
  return c.lr_final;
}

bool is_swa_epoch(std::size_t epoch, const TrainConfig& c) {
  return epoch >= c.warmup_epochs && (epoch - c.warmup_epochs + 1) % c.swa_every == 0;
}

}  // namespace rftag::train
