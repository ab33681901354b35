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

#include "rftag/dsp/spectrogram.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <mutex>
#include <numbers>
#include <string>

#include "rftag/error.hpp"

namespace rftag::dsp {

namespace {

// FFTW planning is not thread-safe; execution with new-array calls is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_,
                                 FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  // Writes |X_k|^2 for k = 0..n/2 into `power`.
  void power(double* power) {
    fftw_execute(plan_);
    for (std::size_t k = 0; k <= n_ / 2; ++k) {
      power[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
    }
  }

 private:
  std::size_t n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

constexpr char kRfspecMagic[8] = {'R', 'F', 'S', 'P', 'E', 'C', '0', '1'};

}  // namespace

std::size_t frame_count(std::size_t length, std::size_t window,
                        std::size_t hop) {
  if (hop == 0 || window == 0) {
    throw ValidationError("frame_count: hop and window must be positive");
  }
  if (length < window) {
    throw ValidationError("clip of " + std::to_string(length) +
                          " samples is shorter than one window (" +
                          std::to_string(window) + ")");
  }
  return (length - window) / hop + 1;
}

std::vector<double> hann_periodic(std::size_t length) {
  std::vector<double> w(length);
  for (std::size_t i = 0; i < length; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(length));
  }
  return w;
}

PowerSpectrogram stft_power(const AudioClip& clip, std::size_t hop,
                            std::size_t window) {
  const std::size_t frames = frame_count(clip.samples.size(), window, hop);
  const std::vector<double> hann = hann_periodic(window);
  PowerSpectrogram out;
  out.bins = window / 2 + 1;
  out.frames = frames;
  out.values.assign(out.bins * frames, 0.0);
  RealFft fft(window);
  std::vector<double> column(out.bins);
  for (std::size_t f = 0; f < frames; ++f) {
    const double* src = clip.samples.data() + f * hop;
    double* in = fft.input();
    for (std::size_t i = 0; i < window; ++i) in[i] = src[i] * hann[i];
    fft.power(column.data());
    for (std::size_t k = 0; k < out.bins; ++k) {
      out.values[k * frames + f] = column[k];
    }
  }
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

double a_weighting_db(double hz) {
  const double f2 = hz * hz;
  const double c1 = 20.598997 * 20.598997;
  const double c2 = 107.65265 * 107.65265;
  const double c3 = 737.86223 * 737.86223;
  const double c4 = 12194.217 * 12194.217;
  const double ra =
      c4 * f2 * f2 /
      ((f2 + c1) * std::sqrt((f2 + c2) * (f2 + c3)) * (f2 + c4));
  return 20.0 * std::log10(ra) + 2.0;
}

MelFilterbank mel_filterbank(std::size_t n_fft, std::size_t n_mels,
                             double sample_rate, double fmin, double fmax) {
  if (n_fft < 2 || n_mels == 0 || !(sample_rate > 0)) {
    throw ValidationError("mel_filterbank: invalid n_fft/n_mels/sample_rate");
  }
  if (!(fmin >= 0 && fmin < fmax && fmax <= sample_rate / 2)) {
    throw ValidationError("mel_filterbank: need 0 <= fmin < fmax <= sr/2, got "
                          "fmin=" + std::to_string(fmin) +
                          " fmax=" + std::to_string(fmax));
  }
  const std::size_t nbins = n_fft / 2 + 1;
  if (n_mels + 2 > nbins) {
    throw ValidationError("mel_filterbank: " + std::to_string(n_mels) +
                          " bands need more than the " +
                          std::to_string(nbins) + " FFT bins of n_fft=" +
                          std::to_string(n_fft));
  }
  MelFilterbank fb;
  fb.n_mels = n_mels;
  fb.n_fft = n_fft;
  fb.sample_rate = sample_rate;
  fb.fmin = fmin;
  fb.fmax = fmax;

  std::vector<double> pts(n_mels + 2);
  const double mlo = hz_to_mel(fmin), mhi = hz_to_mel(fmax);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    pts[i] = mel_to_hz(mlo + (mhi - mlo) * static_cast<double>(i) /
                                 static_cast<double>(n_mels + 1));
  }
  fb.centers_hz.assign(pts.begin() + 1, pts.end() - 1);
  const double bin_hz = sample_rate / static_cast<double>(n_fft);
  fb.weights.assign(n_mels * nbins, 0.0);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = pts[m], c = pts[m + 1], hi = pts[m + 2];
    double* row = fb.weights.data() + m * nbins;
    bool any = false;
    for (std::size_t k = 0; k < nbins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      double w = 0;
      if (f > lo && f <= c) {
        w = (f - lo) / (c - lo);
      } else if (f > c && f < hi) {
        w = (hi - f) / (hi - c);
      }
      row[k] = w;
      any = any || w > 0;
    }
    if (!any) {
      const auto k = std::min<std::size_t>(
          static_cast<std::size_t>(std::lround(c / bin_hz)), nbins - 1);
      row[k] = 1.0;
    }
  }
  return fb;
}

std::vector<double> mel_db(const AudioClip& clip, std::size_t hop,
                           const MelFilterbank& filterbank,
                           std::size_t* frames_out) {
  const PowerSpectrogram power = stft_power(clip, hop, filterbank.n_fft);
  const std::size_t nbins = filterbank.fft_bins();
  const std::size_t frames = power.frames;

  std::vector<double> gain(nbins);
  const double bin_hz = filterbank.sample_rate /
                        static_cast<double>(filterbank.n_fft);
  for (std::size_t k = 0; k < nbins; ++k) {
    const double f = static_cast<double>(std::max<std::size_t>(k, 1)) * bin_hz;
    gain[k] = std::pow(10.0, a_weighting_db(f) / 10.0);
  }

  std::vector<double> out(filterbank.n_mels * frames, 0.0);
  for (std::size_t m = 0; m < filterbank.n_mels; ++m) {
    const double* w = filterbank.weights.data() + m * nbins;
    double* dst = out.data() + m * frames;
    for (std::size_t k = 0; k < nbins; ++k) {
      if (w[k] == 0) continue;
      const double wk = w[k] * gain[k];
      const double* src = power.values.data() + k * frames;
      for (std::size_t t = 0; t < frames; ++t) dst[t] += wk * src[t];
    }
  }
  for (double& v : out) v = 10.0 * std::log10(v + kPowerFloor);
  if (frames_out) *frames_out = frames;
  return out;
}

Spectrogram logmel(const AudioClip& clip, std::size_t hop,
                   const MelFilterbank& filterbank) {
  std::size_t frames = 0;
  std::vector<double> db = mel_db(clip, hop, filterbank, &frames);
  const double ref = *std::max_element(db.begin(), db.end());
  Spectrogram spec;
  spec.bins = static_cast<std::uint32_t>(filterbank.n_mels);
  spec.frames = static_cast<std::uint32_t>(frames);
  spec.hop = static_cast<std::uint32_t>(hop);
  spec.window = static_cast<std::uint32_t>(filterbank.n_fft);
  spec.values.resize(db.size());
  for (std::size_t i = 0; i < db.size(); ++i) {
    spec.values[i] = static_cast<float>(std::max(db[i] - ref, kClipDb));
  }
  return spec;
}

Spectrogram logmel_padded(const AudioClip& clip, std::size_t hop,
                          const MelFilterbank& filterbank) {
  if (clip.samples.size() >= filterbank.n_fft) {
    return logmel(clip, hop, filterbank);
  }
  AudioClip padded = clip;
  padded.samples.resize(filterbank.n_fft, 0.0);
  Spectrogram spec = logmel(padded, hop, filterbank);
  spec.padded = true;
  return spec;
}

std::vector<char> encode_rfspec(const Spectrogram& spec) {
  if (spec.values.size() != std::size_t{spec.bins} * spec.frames) {
    throw ValidationError("spectrogram value count does not match bins x frames");
  }
  std::vector<char> out(sizeof(kRfspecMagic) + 16 + spec.values.size() * 4);
  char* p = out.data();
  std::memcpy(p, kRfspecMagic, sizeof(kRfspecMagic));
  p += sizeof(kRfspecMagic);
  for (std::uint32_t v : {spec.bins, spec.frames, spec.hop, spec.window}) {
    std::memcpy(p, &v, 4);
    p += 4;
  }
  std::memcpy(p, spec.values.data(), spec.values.size() * 4);
  return out;
}

Spectrogram decode_rfspec(const std::vector<char>& bytes,
                          const std::string& source) {
  constexpr std::size_t header = sizeof(kRfspecMagic) + 16;
  if (bytes.size() < header ||
      std::memcmp(bytes.data(), kRfspecMagic, sizeof(kRfspecMagic)) != 0) {
    throw ValidationError(source + " is not an RFSPEC01 file");
  }
  Spectrogram spec;
  const char* p = bytes.data() + sizeof(kRfspecMagic);
  std::memcpy(&spec.bins, p, 4);
  std::memcpy(&spec.frames, p + 4, 4);
  std::memcpy(&spec.hop, p + 8, 4);
  std::memcpy(&spec.window, p + 12, 4);
  const std::size_t count = std::size_t{spec.bins} * spec.frames;
  if (bytes.size() != header + count * 4) {
    throw ValidationError(source + ": RFSPEC01 payload size mismatch");
  }
  spec.values.resize(count);
  std::memcpy(spec.values.data(), bytes.data() + header, count * 4);
  return spec;
}

void write_rfspec(const std::filesystem::path& path, const Spectrogram& spec) {
  const std::vector<char> bytes = encode_rfspec(spec);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw RuntimeFailure("cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw RuntimeFailure("failed writing " + path.string());
}

Spectrogram read_rfspec(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open spectrogram " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(f)),
                          std::istreambuf_iterator<char>());
  return decode_rfspec(bytes, path.string());
}

}  // namespace rftag::dsp
