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

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rftag/dsp/audio.hpp"

namespace rftag::dsp {

inline constexpr std::size_t kWindow = 2048;
inline constexpr std::size_t kMelBins = 256;
inline constexpr std::size_t kHop75 = 512;   // 75% window overlap
inline constexpr std::size_t kHop25 = 1536;  // 25% window overlap
inline constexpr double kPowerFloor = 1e-10;
inline constexpr double kClipDb = -100.0;

// frames = floor((length - window) / hop) + 1, for length >= window.
std::size_t frame_count(std::size_t length, std::size_t window,
                        std::size_t hop);

// Power spectrum |FFT(hann * frame)|^2, unnormalized, bins 0..window/2.
// Row-major by bin: values[bin * frames + frame].
//
// With this normalization Parseval reads
//   (P[0] + 2 * sum_{0<k<N/2} P[k] + P[N/2]) / N == sum_n (w[n] x[n])^2.
struct PowerSpectrogram {
  std::size_t bins = 0;
  std::size_t frames = 0;
  std::vector<double> values;

  double at(std::size_t bin, std::size_t frame) const {
    return values[bin * frames + frame];
  }
};

std::vector<double> hann_periodic(std::size_t length);

PowerSpectrogram stft_power(const AudioClip& clip, std::size_t hop,
                            std::size_t window = kWindow);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// A-weighting gain in dB (0 dB at 1 kHz).
double a_weighting_db(double hz);

struct MelFilterbank {
  std::size_t n_mels = 0;
  std::size_t n_fft = 0;
  double sample_rate = 0;
  double fmin = 0;
  double fmax = 0;
  std::vector<double> centers_hz;  // n_mels band centers
  // n_mels x (n_fft/2 + 1), row-major.
  std::vector<double> weights;

  std::size_t fft_bins() const { return n_fft / 2 + 1; }
  double weight(std::size_t band, std::size_t bin) const {
    return weights[band * fft_bins() + bin];
  }
};

// Triangular filters whose n_mels + 2 edge/center points are equally
// spaced on the mel scale; each triangle peaks at 1 on its center and
// reaches 0 at the neighbouring centers. A band too narrow to contain an
// FFT bin collapses onto the bin nearest its center.
MelFilterbank mel_filterbank(std::size_t n_fft = kWindow,
                             std::size_t n_mels = kMelBins,
                             double sample_rate = kDefaultSampleRate,
                             double fmin = 0.0, double fmax = 22050.0);

struct Spectrogram {
  std::uint32_t bins = 0;
  std::uint32_t frames = 0;
  std::uint32_t hop = 0;
  std::uint32_t window = 0;
  // dB values, row-major by mel bin: values[bin * frames + frame].
  std::vector<float> values;
  // Set when the source clip was shorter than one window and was padded.
  bool padded = false;

  float at(std::size_t bin, std::size_t frame) const {
    return values[bin * frames + frame];
  }
  friend bool operator==(const Spectrogram&, const Spectrogram&) = default;
};

// A-weighted mel power in dB before reference normalization:
// 10 * log10(mel_power + kPowerFloor).
std::vector<double> mel_db(const AudioClip& clip, std::size_t hop,
                           const MelFilterbank& filterbank,
                           std::size_t* frames_out = nullptr);

// Full pipeline: mel_db, subtract the global maximum, clip at -100 dB.
Spectrogram logmel(const AudioClip& clip, std::size_t hop,
                   const MelFilterbank& filterbank);

// As logmel, but zero-pads clips shorter than one window and flags the
// result as padded.
Spectrogram logmel_padded(const AudioClip& clip, std::size_t hop,
                          const MelFilterbank& filterbank);

// RFSPEC01 container: magic, u32 bins/frames/hop/window, f32 values.
void write_rfspec(const std::filesystem::path& path, const Spectrogram& spec);
Spectrogram read_rfspec(const std::filesystem::path& path);
std::vector<char> encode_rfspec(const Spectrogram& spec);
Spectrogram decode_rfspec(const std::vector<char>& bytes,
                          const std::string& source = "<memory>");

}  // namespace rftag::dsp
