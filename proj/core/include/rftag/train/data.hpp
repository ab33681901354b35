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
#include <string>
#include <vector>

#include "rftag/autodiff/array.hpp"
#include "rftag/dsp/spectrogram.hpp"

namespace rftag::train {

struct Example {
  std::string id;
  dsp::Spectrogram spec;
  std::vector<float> labels;  // multi-hot over Dataset::tags
};

struct Dataset {
  std::vector<std::string> tags;
  std::vector<Example> examples;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
  // Rejects duplicate ids, label vectors of the wrong length, non-binary
  // labels and spectrograms with a different bin count.
  void validate(std::size_t bins) const;
};

// Global scalar statistics of the training split, applied as (x-mean)/std.
struct Normalization {
  double mean = 0.0;
  double std = 1.0;
};

Normalization compute_normalization(const Dataset& data);

enum class CropMode { kRandom, kCenter };

// [1,1,bins,frames]. Inputs shorter than `frames` are tiled along time
// before cropping. `rng` is only used in random mode.
ad::Array<float> crop_or_pad(const dsp::Spectrogram& spec, std::size_t frames,
                             std::mt19937_64* rng, CropMode mode);

// Copies `frames` columns starting at `offset` of the tiled spectrogram.
ad::Array<float> window_at(const dsp::Spectrogram& spec, std::size_t offset,
                           std::size_t frames);

void normalize(ad::Array<float>& x, const Normalization& norm);

}  // namespace rftag::train
