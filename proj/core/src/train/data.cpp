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

#include "rftag/train/data.hpp"

#include <cmath>
#include <unordered_set>

#include "rftag/error.hpp"

namespace rftag::train {

void Dataset::validate(std::size_t bins) const {
  std::unordered_set<std::string> seen;
  for (const auto& e : examples) {
    if (!seen.insert(e.id).second) throw ValidationError("duplicate track id " + e.id);
    if (e.labels.size() != tags.size()) {
      throw ValidationError("track " + e.id + " has " +
                            std::to_string(e.labels.size()) + " labels for " +
                            std::to_string(tags.size()) + " tags");
    }
    for (float v : e.labels) {
      if (v != 0.0f && v != 1.0f) {
        throw ValidationError("track " + e.id + " has a non-binary label");
      }
    }
    if (e.spec.bins != bins || e.spec.frames == 0) {
      throw ValidationError("track " + e.id + " spectrogram is " +
                            std::to_string(e.spec.bins) + "x" +
                            std::to_string(e.spec.frames) + ", expected " +
                            std::to_string(bins) + " bins");
    }
  }
}

Normalization compute_normalization(const Dataset& data) {
  double sum = 0, sq = 0;
  std::size_t n = 0;
  for (const auto& e : data.examples) {
    for (float v : e.spec.values) {
      sum += v;
      sq += static_cast<double>(v) * v;
    }
    n += e.spec.values.size();
  }
  if (n == 0) throw ValidationError("cannot normalize an empty dataset");
  Normalization out;
  out.mean = sum / static_cast<double>(n);
  const double var = std::max(sq / static_cast<double>(n) - out.mean * out.mean, 0.0);
  out.std = std::max(std::sqrt(var), 1e-6);
  return out;
}

ad::Array<float> window_at(const dsp::Spectrogram& spec, std::size_t offset,
                           std::size_t frames) {
  if (frames == 0) throw ValidationError("crop length must be positive");
  if (spec.frames == 0) throw ValidationError("empty spectrogram");
  ad::Array<float> out(ad::Shape{1, 1, spec.bins, frames});
  for (std::size_t b = 0; b < spec.bins; ++b) {
    const float* row = spec.values.data() + b * spec.frames;
    float* dst = out.data().data() + b * frames;
    for (std::size_t t = 0; t < frames; ++t) dst[t] = row[(offset + t) % spec.frames];
  }
  return out;
}

ad::Array<float> crop_or_pad(const dsp::Spectrogram& spec, std::size_t frames,
                             std::mt19937_64* rng, CropMode mode) {
  if (frames == 0) throw ValidationError("crop length must be positive");
  const std::size_t len = spec.frames;
  if (len == 0) throw ValidationError("empty spectrogram");
  // Tiled length: the smallest whole number of repeats covering `frames`.
  const std::size_t tiled = len >= frames ? len : ((frames + len - 1) / len) * len;
  const std::size_t slack = tiled - frames;
  std::size_t offset = slack / 2;
  if (mode == CropMode::kRandom && slack > 0) {
    if (!rng) throw ValidationError("random crop needs a generator");
    offset = std::uniform_int_distribution<std::size_t>(0, slack)(*rng);
  }
  return window_at(spec, offset, frames);
}

void normalize(ad::Array<float>& x, const Normalization& norm) {
  const double inv = 1.0 / norm.std;
  for (float& v : x.data()) v = static_cast<float>((v - norm.mean) * inv);
}

}  // namespace rftag::train
