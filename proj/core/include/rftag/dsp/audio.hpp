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

#include <filesystem>
#include <vector>

namespace rftag::dsp {

inline constexpr double kDefaultSampleRate = 44100.0;

// Mono PCM in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  double sample_rate = kDefaultSampleRate;
};

enum class WavEncoding { kPcm16, kFloat32 };

// Reads 16-bit PCM or 32-bit float RIFF/WAVE with one or two channels.
// Stereo is averaged to mono and the result is linearly resampled to
// `target_rate` when the file rate differs.
AudioClip load_wav(const std::filesystem::path& path,
                   double target_rate = kDefaultSampleRate);

void write_wav(const std::filesystem::path& path, const AudioClip& clip,
               WavEncoding encoding = WavEncoding::kPcm16);

// Linear-interpolation resampling; output length is round(N * to / from).
std::vector<double> resample_linear(const std::vector<double>& samples,
                                    double from_rate, double to_rate);

}  // namespace rftag::dsp
