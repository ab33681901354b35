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

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "../support/temp_dir.hpp"
#include "rftag/dsp/audio.hpp"
#include "rftag/dsp/spectrogram.hpp"
#include "rftag/error.hpp"

namespace rftag::dsp {
namespace {

namespace fs = std::filesystem;

using rftag::testing::TempDir;

// Hand-assembled WAV bytes, independent of write_wav.
std::string wav_bytes(std::uint16_t format, std::uint16_t channels,
                      std::uint32_t rate, std::uint16_t bits,
                      const std::string& payload) {
  auto u16 = [](std::uint16_t v) { return std::string(reinterpret_cast<char*>(&v), 2); };
  auto u32 = [](std::uint32_t v) { return std::string(reinterpret_cast<char*>(&v), 4); };
  const std::uint16_t align = channels * bits / 8;
  std::string s = "RIFF" + u32(36 + payload.size()) + "WAVEfmt " + u32(16) +
                  u16(format) + u16(channels) + u32(rate) +
                  u32(rate * align) + u16(align) + u16(bits) + "data" +
                  u32(payload.size()) + payload;
  return s;
}

void put_file(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

AudioClip sine(double hz, std::size_t n, double amp = 0.5) {
  AudioClip c;
  c.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.samples[i] = amp * std::sin(2 * std::numbers::pi * hz * i / 44100.0);
  }
  return c;
}

AudioClip noise(std::size_t n, std::uint64_t seed, double amp = 0.3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-amp, amp);
  AudioClip c;
  c.samples.resize(n);
  for (double& s : c.samples) s = d(rng);
  return c;
}

TEST(LoadWav, Pcm16Scaling) {
  TempDir dir;
  std::int16_t raw[3] = {0, 16384, -32768};
  put_file(dir.path() / "a.wav",
           wav_bytes(1, 1, 44100, 16, std::string(reinterpret_cast<char*>(raw), 6)));
  auto clip = load_wav(dir.path() / "a.wav");
  ASSERT_EQ(clip.samples.size(), 3u);
  EXPECT_EQ(clip.samples[0], 0.0);
  EXPECT_EQ(clip.samples[1], 0.5);
  EXPECT_EQ(clip.samples[2], -1.0);
}

TEST(LoadWav, StereoFloatAveragedToMono) {
  TempDir dir;
  float raw[2] = {1.0f, 0.0f};
  put_file(dir.path() / "s.wav",
           wav_bytes(3, 2, 44100, 32, std::string(reinterpret_cast<char*>(raw), 8)));
  auto clip = load_wav(dir.path() / "s.wav");
  ASSERT_EQ(clip.samples.size(), 1u);
  EXPECT_EQ(clip.samples[0], 0.5);
}

TEST(LoadWav, ResamplesToTargetRate) {
  TempDir dir;
  AudioClip c = sine(300, 1000);
  c.sample_rate = 22050;
  write_wav(dir.path() / "r.wav", c, WavEncoding::kFloat32);
  auto clip = load_wav(dir.path() / "r.wav");
  EXPECT_EQ(clip.sample_rate, 44100.0);
  EXPECT_EQ(clip.samples.size(), 2000u);
  // Even output samples land on input samples.
  EXPECT_NEAR(clip.samples[10], static_cast<float>(c.samples[5]), 1e-7);
}

TEST(LoadWav, UnsupportedEncodingNamesFormat) {
  TempDir dir;
  put_file(dir.path() / "b.wav", wav_bytes(1, 1, 44100, 24, std::string(6, '\0')));
  try {
    load_wav(dir.path() / "b.wav");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("24 bits"), std::string::npos) << e.what();
  }
  put_file(dir.path() / "c.wav", "not a wav file at all");
  EXPECT_THROW(load_wav(dir.path() / "c.wav"), ValidationError);
}

TEST(WriteWav, RoundTripsPcm16) {
  TempDir dir;
  AudioClip c = sine(1000, 500);
  write_wav(dir.path() / "x.wav", c);
  auto back = load_wav(dir.path() / "x.wav");
  ASSERT_EQ(back.samples.size(), c.samples.size());
  for (std::size_t i = 0; i < c.samples.size(); ++i) {
    EXPECT_NEAR(back.samples[i], c.samples[i], 1.0 / 32768);
  }
}

TEST(Stft, SinePeaksAtExpectedBin) {
  auto p = stft_power(sine(441, 44100), kHop75);
  for (std::size_t f = 0; f < p.frames; ++f) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < p.bins; ++k) {
      if (p.at(k, f) > p.at(best, f)) best = k;
    }
    EXPECT_TRUE(best == 20 || best == 21) << best;
  }
}

TEST(Stft, SilenceIsZeroAndFrameCount) {
  AudioClip silent;
  silent.samples.assign(44100, 0.0);
  auto p = stft_power(silent, 512);
  EXPECT_EQ(p.bins, 1025u);
  EXPECT_EQ(p.frames, 83u);
  for (double v : p.values) EXPECT_EQ(v, 0.0);
}

TEST(Stft, ShortClipRejected) {
  AudioClip c;
  c.samples.assign(2047, 0.1);
  EXPECT_THROW(stft_power(c, 512), ValidationError);
}

TEST(Stft, FrameCountFormula) {
  for (std::size_t window : {16u, 64u, 2048u}) {
    for (std::size_t hop : {1u, 3u, 512u, 1536u}) {
      for (std::size_t len = window; len < window + 3000; len += 37) {
        std::size_t expected = 0;
        for (std::size_t start = 0; start + window <= len; start += hop) ++expected;
        EXPECT_EQ(frame_count(len, window, hop), expected);
      }
    }
  }
}

TEST(Stft, Parseval) {
  AudioClip c = noise(2048 + 3 * 512, 17);
  auto p = stft_power(c, 512);
  auto hann = hann_periodic(2048);
  for (std::size_t f = 0; f < p.frames; ++f) {
    double energy = 0;
    for (std::size_t i = 0; i < 2048; ++i) {
      const double v = hann[i] * c.samples[f * 512 + i];
      energy += v * v;
    }
    double spec = p.at(0, f) + p.at(1024, f);
    for (std::size_t k = 1; k < 1024; ++k) spec += 2 * p.at(k, f);
    EXPECT_NEAR(spec / 2048, energy, 1e-6 * energy);
  }
}

TEST(Mel, ScaleClosedForm) {
  EXPECT_NEAR(hz_to_mel(700), 2595 * std::log10(2.0), 1e-9);
  EXPECT_NEAR(hz_to_mel(700), 781.2, 0.05);
  EXPECT_NEAR(mel_to_hz(hz_to_mel(1234.5)), 1234.5, 1e-9);
}

TEST(Mel, FilterbankShape) {
  auto fb = mel_filterbank();
  ASSERT_EQ(fb.n_mels, 256u);
  ASSERT_EQ(fb.fft_bins(), 1025u);
  for (std::size_t m = 1; m < fb.n_mels; ++m) {
    EXPECT_GT(fb.centers_hz[m], fb.centers_hz[m - 1]);
  }
  for (std::size_t m = 0; m < fb.n_mels; ++m) {
    double best = -1;
    std::size_t best_count = 0, first = 0, last = 0;
    bool seen = false;
    for (std::size_t k = 0; k < fb.fft_bins(); ++k) {
      const double w = fb.weight(m, k);
      ASSERT_GE(w, 0.0);
      if (w > 0) {
        if (!seen) first = k;
        last = k;
        seen = true;
      }
      if (w > best) {
        best = w;
        best_count = 1;
      } else if (w == best) {
        ++best_count;
      }
    }
    ASSERT_TRUE(seen) << "empty band " << m;
    EXPECT_EQ(best_count, 1u) << "band " << m;
    // Contiguous support, rising then falling.
    std::size_t k = first;
    while (k < last && fb.weight(m, k + 1) >= fb.weight(m, k)) ++k;
    while (k < last && fb.weight(m, k + 1) < fb.weight(m, k) &&
           fb.weight(m, k + 1) > 0) ++k;
    EXPECT_EQ(k, last) << "band " << m << " is not a single bump";
  }
  const double bin_hz = 44100.0 / 2048;
  for (std::size_t k = 0; k < fb.fft_bins(); ++k) {
    const double f = k * bin_hz;
    if (f < fb.centers_hz.front() || f > fb.centers_hz.back()) continue;
    double total = 0;
    for (std::size_t m = 0; m < fb.n_mels; ++m) total += fb.weight(m, k);
    EXPECT_GT(total, 0.0) << "bin " << k;
  }
}

TEST(Mel, InvalidRangesRejected) {
  EXPECT_THROW(mel_filterbank(2048, 256, 44100, 100, 50), ValidationError);
  EXPECT_THROW(mel_filterbank(2048, 256, 44100, 0, 30000), ValidationError);
  EXPECT_THROW(mel_filterbank(64, 40, 44100, 0, 22050), ValidationError);
}

TEST(Logmel, SilenceIsFlat) {
  AudioClip silent;
  silent.samples.assign(8192, 0.0);
  auto s = logmel(silent, 512, mel_filterbank());
  for (float v : s.values) EXPECT_EQ(v, s.values.front());
}

TEST(Logmel, ReferenceMaxIsZeroAndClipped) {
  auto s = logmel(sine(2000, 20000), 512, mel_filterbank());
  EXPECT_EQ(s.bins, 256u);
  EXPECT_EQ(s.frames, frame_count(20000, 2048, 512));
  float mx = -1e9f;
  for (float v : s.values) {
    EXPECT_LE(v, 0.f);
    EXPECT_GE(v, -100.f);
    EXPECT_TRUE(std::isfinite(v));
    mx = std::max(mx, v);
  }
  EXPECT_EQ(mx, 0.f);
}

TEST(Logmel, GainShiftsByConstantBeforeNormalization) {
  auto fb = mel_filterbank();
  AudioClip c = noise(10000, 5);
  AudioClip loud = c;
  for (double& v : loud.samples) v *= 2;
  auto a = mel_db(c, 512, fb);
  auto b = mel_db(loud, 512, fb);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(b[i] - a[i], 20 * std::log10(2.0), 1e-3);
  }
  auto na = logmel(c, 512, fb);
  auto nb = logmel(loud, 512, fb);
  for (std::size_t i = 0; i < na.values.size(); ++i) {
    // Entries near the power floor shift slightly less than 6.02 dB.
    EXPECT_NEAR(na.values[i], nb.values[i], na.values[i] > -80 ? 1e-4 : 1e-2);
  }
}

TEST(Logmel, PureFunction) {
  auto fb = mel_filterbank();
  AudioClip c = noise(9000, 8);
  EXPECT_EQ(logmel(c, 1536, fb), logmel(c, 1536, fb));
}

TEST(Logmel, ShortClipPaddedWithFlag) {
  auto fb = mel_filterbank();
  AudioClip c = noise(1000, 3);
  EXPECT_THROW(logmel(c, 512, fb), ValidationError);
  auto s = logmel_padded(c, 512, fb);
  EXPECT_TRUE(s.padded);
  EXPECT_EQ(s.frames, 1u);
}

TEST(Rfspec, ByteStableRoundTrip) {
  TempDir dir;
  auto s = logmel(noise(6000, 9), 512, mel_filterbank());
  write_rfspec(dir.path() / "a.rfspec", s);
  auto back = read_rfspec(dir.path() / "a.rfspec");
  EXPECT_EQ(back, s);
  EXPECT_EQ(encode_rfspec(back), encode_rfspec(s));
  auto bytes = encode_rfspec(s);
  EXPECT_EQ(std::string(bytes.data(), 8), "RFSPEC01");
  std::uint32_t bins;
  std::memcpy(&bins, bytes.data() + 8, 4);
  EXPECT_EQ(bins, 256u);
  bytes.pop_back();
  EXPECT_THROW(decode_rfspec(bytes), ValidationError);
}

}  // namespace
}  // namespace rftag::dsp
