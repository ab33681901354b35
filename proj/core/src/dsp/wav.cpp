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

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "rftag/dsp/audio.hpp"
#include "rftag/error.hpp"

namespace rftag::dsp {

namespace {

static_assert(std::endian::native == std::endian::little,
              "WAV I/O assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename U>
U read_le(const std::vector<char>& buf, std::size_t off) {
  U v;
  std::memcpy(&v, buf.data() + off, sizeof(U));
  return v;
}

template <typename U>
void put_le(std::string& out, U v) {
  char bytes[sizeof(U)];
  std::memcpy(bytes, &v, sizeof(U));
  out.append(bytes, sizeof(U));
}

}  // namespace

std::vector<double> resample_linear(const std::vector<double>& samples,
                                    double from_rate, double to_rate) {
  if (!(from_rate > 0) || !(to_rate > 0)) {
    throw ValidationError("resample: rates must be positive");
  }
  if (samples.empty() || from_rate == to_rate) return samples;
  const auto out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(samples.size()) * to_rate / from_rate));
  std::vector<double> out(std::max<std::size_t>(out_len, 1));
  const double step = from_rate / to_rate;
  const std::size_t last = samples.size() - 1;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double pos = static_cast<double>(i) * step;
    const auto lo = std::min(static_cast<std::size_t>(pos), last);
    const std::size_t hi = std::min(lo + 1, last);
    const double frac = std::min(pos - static_cast<double>(lo), 1.0);
    out[i] = samples[lo] + (samples[hi] - samples[lo]) * frac;
  }
  return out;
}

AudioClip load_wav(const std::filesystem::path& path, double target_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open audio file " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  const std::string where = " in " + path.string();
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw ValidationError("not a RIFF/WAVE file" + where);
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t off = 12;
  while (off + 8 <= buf.size()) {
    const std::uint32_t len = read_le<std::uint32_t>(buf, off + 4);
    const std::size_t body = off + 8;
    if (body + len > buf.size() && std::memcmp(buf.data() + off, "data", 4)) {
      throw ValidationError("truncated chunk" + where);
    }
    if (std::memcmp(buf.data() + off, "fmt ", 4) == 0) {
      if (len < 16) throw ValidationError("short fmt chunk" + where);
      format = read_le<std::uint16_t>(buf, body);
      channels = read_le<std::uint16_t>(buf, body + 2);
      rate = read_le<std::uint32_t>(buf, body + 4);
      bits = read_le<std::uint16_t>(buf, body + 14);
      if (format == kFormatExtensible && len >= 26) {
        format = read_le<std::uint16_t>(buf, body + 24);
      }
    } else if (std::memcmp(buf.data() + off, "data", 4) == 0) {
      data = buf.data() + body;
      data_len = std::min<std::size_t>(len, buf.size() - body);
    }
    off = body + len + (len & 1u);
  }
  if (format == 0) throw ValidationError("missing fmt chunk" + where);
  if (!data) throw ValidationError("missing data chunk" + where);
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32) {
    throw ValidationError("unsupported WAV encoding (format tag " +
                          std::to_string(format) + ", " +
                          std::to_string(bits) + " bits)" + where +
                          "; expected 16-bit PCM or 32-bit float");
  }
  if (channels < 1 || channels > 2) {
    throw ValidationError("unsupported channel count " +
                          std::to_string(channels) + where);
  }
  if (rate == 0) throw ValidationError("zero sample rate" + where);

  const std::size_t width = bits / 8;
  const std::size_t frames = data_len / (width * channels);
  AudioClip clip;
  clip.sample_rate = rate;
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0;
    for (std::size_t ch = 0; ch < channels; ++ch) {
      const char* p = data + (i * channels + ch) * width;
      if (pcm16) {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        acc += static_cast<double>(v) / 32768.0;
      } else {
        float v;
        std::memcpy(&v, p, 4);
        acc += static_cast<double>(v);
      }
    }
    clip.samples[i] = acc / channels;
  }
  if (clip.sample_rate != target_rate) {
    clip.samples = resample_linear(clip.samples, clip.sample_rate, target_rate);
    clip.sample_rate = target_rate;
  }
  return clip;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip,
               WavEncoding encoding) {
  const bool pcm16 = encoding == WavEncoding::kPcm16;
  const std::uint16_t bits = pcm16 ? 16 : 32;
  const std::uint32_t rate = static_cast<std::uint32_t>(clip.sample_rate);
  const auto data_len =
      static_cast<std::uint32_t>(clip.samples.size() * (bits / 8));
  std::string out;
  out.reserve(44 + data_len);
  out.append("RIFF");
  put_le<std::uint32_t>(out, 36 + data_len);
  out.append("WAVEfmt ");
  put_le<std::uint32_t>(out, 16);
  put_le<std::uint16_t>(out, pcm16 ? kFormatPcm : kFormatFloat);
  put_le<std::uint16_t>(out, 1);
  put_le<std::uint32_t>(out, rate);
  put_le<std::uint32_t>(out, rate * (bits / 8));
  put_le<std::uint16_t>(out, bits / 8);
  put_le<std::uint16_t>(out, bits);
  out.append("data");
  put_le<std::uint32_t>(out, data_len);
  for (double s : clip.samples) {
    const double c = std::clamp(s, -1.0, 1.0);
    if (pcm16) {
      const auto v = static_cast<std::int16_t>(
          std::clamp(std::lround(c * 32768.0), -32768L, 32767L));
      put_le(out, v);
    } else {
      put_le(out, static_cast<float>(c));
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw RuntimeFailure("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw RuntimeFailure("failed writing " + path.string());
}

}  // namespace rftag::dsp
