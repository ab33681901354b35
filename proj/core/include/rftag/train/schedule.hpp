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
#include <cstdint>

namespace rftag::train {

struct TrainConfig {
  std::size_t total_epochs = 200;
  std::size_t warmup_epochs = 10;
  std::size_t constant_epochs = 60;
  std::size_t decay_epochs = 50;
  std::size_t tail_epochs = 80;
  double lr_peak = 1e-4;
  double lr_final = 1e-6;
  // Warmup starts at lr_peak * warmup_start_factor.
  double warmup_start_factor = 0.01;
  double mixup_alpha = 0.3;  // 0 disables mixup
  std::size_t batch_size = 8;
  std::size_t crop_frames = 512;
  std::size_t swa_every = 3;
  bool swa_bn_refresh = true;
  std::uint64_t seed = 0;

  void validate() const;

  // Same proportions as the 200-epoch schedule, rounded, with the tail
  // absorbing the remainder. scaled(30): 2 + 9 + 8 + 11.
  TrainConfig scaled(std::size_t total) const;
};

double lr_at(std::size_t epoch, const TrainConfig& config);

// SWA absorbs at the end of epoch e when e >= warmup and
// (e - warmup + 1) is a multiple of swa_every.
bool is_swa_epoch(std::size_t epoch, const TrainConfig& config);

}  // namespace rftag::train
