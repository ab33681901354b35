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

#include "rftag/pipeline/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include "rftag/dsp/spectrogram.hpp"
#include "rftag/error.hpp"

namespace rftag::pipeline {

namespace {

constexpr std::size_t kFirstBin = 24;
constexpr std::size_t kLastBin = 232;

std::uint64_t split_code(const std::string& split) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : split) h = (h ^ c) * 1099511628211ULL;
  return h;
}

void add_tone(std::vector<double>& out, double sr, double lo_hz, double hi_hz,
              std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t n = out.size();
  const double freq = lo_hz + (hi_hz - lo_hz) * u(rng);
  const double amp = 0.1 + 0.2 * u(rng);
  const double phase = 2 * std::numbers::pi * u(rng);
  const std::size_t start = static_cast<std::size_t>(0.4 * u(rng) * static_cast<double>(n));
  const std::size_t min_len = n / 2;
  const std::size_t len =
      min_len + static_cast<std::size_t>(u(rng) * static_cast<double>(n - start - min_len));
  const std::size_t fade = static_cast<std::size_t>(0.02 * sr);
  for (std::size_t i = 0; i < len && start + i < n; ++i) {
    double env = 1.0;
    if (i < fade) env = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / fade);
    if (len - i < fade) {
      env *= 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(len - i) / fade);
    }
    out[start + i] += amp * env * std::sin(2 * std::numbers::pi * freq * static_cast<double>(i) / sr + phase);
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw RuntimeFailure("cannot write " + path.string());
  f << text;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_tags == 0) throw ValidationError("synth: n_tags must be positive");
  if (band_bins == 0 || band_bins >= 32) {
    throw ValidationError("synth: band_bins must lie in [1, 31]");
  }
  const std::size_t slot = (kLastBin - kFirstBin) / (2 * n_tags);
  if (slot < band_bins + 1) {
    throw ValidationError("synth: " + std::to_string(n_tags) + " tags of " +
                          std::to_string(band_bins) + " bins do not fit the mel range");
  }
  if (clip_seconds <= 0.1) throw ValidationError("synth: clip_seconds must exceed 0.1");
  if (sample_rate < 8000) throw ValidationError("synth: sample_rate too low");
  if (!(tag_probability > 0 && tag_probability < 1)) {
    throw ValidationError("synth: tag_probability must lie in (0, 1)");
  }
  if (!(label_noise >= 0 && label_noise < 0.5)) {
    throw ValidationError("synth: label_noise must lie in [0, 0.5)");
  }
  if (train + val + test == 0) throw ValidationError("synth: no clips requested");
}

std::vector<std::string> synth_tags(const SynthConfig& config) {
  std::vector<std::string> tags;
  for (std::size_t k = 0; k < config.n_tags; ++k) tags.push_back("tone" + std::to_string(k));
  return tags;
}

std::vector<SynthBand> synth_bands(const SynthConfig& config) {
  config.validate();
  const auto fb = dsp::mel_filterbank(dsp::kWindow, dsp::kMelBins,
                                      config.sample_rate, 0.0,
                                      config.sample_rate / 2.0);
  const std::size_t slot = (kLastBin - kFirstBin) / (2 * config.n_tags);
  std::vector<SynthBand> bands;
  const auto tags = synth_tags(config);
  for (std::size_t s = 0; s < 2 * config.n_tags; ++s) {
    SynthBand b;
    b.first_bin = kFirstBin + s * slot + (slot - config.band_bins) / 2;
    b.last_bin = b.first_bin + config.band_bins - 1;
    b.lo_hz = fb.centers_hz[b.first_bin];
    b.hi_hz = fb.centers_hz[b.last_bin];
    b.distractor = s % 2 == 1;
    b.name = b.distractor ? "distractor" + std::to_string(s / 2) : tags[s / 2];
    bands.push_back(b);
  }
  return bands;
}

SynthClip synth_clip(const SynthConfig& config, const std::string& split, std::size_t index) {
  const auto bands = synth_bands(config);
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed),
                    static_cast<std::uint32_t>(config.seed >> 32),
                    static_cast<std::uint32_t>(split_code(split)),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  SynthClip clip;
  char id[64];
  std::snprintf(id, sizeof(id), "%s_%04zu", split.c_str(), index);
  clip.id = id;
  clip.split = split;
  clip.audio.sample_rate = config.sample_rate;
  const auto n = static_cast<std::size_t>(config.clip_seconds * config.sample_rate);
  clip.audio.samples.assign(n, 0.0);
  std::normal_distribution<double> noise(0.0, config.noise_level);
  for (double& s : clip.audio.samples) s = noise(rng);

  std::vector<bool> present(config.n_tags, false);
  for (std::size_t k = 0; k < config.n_tags; ++k) present[k] = u(rng) < config.tag_probability;
  // Every tag appears at least once early in each split, and no clip is
  // left without a tag.
  if (index < config.n_tags) present[index] = true;
  if (std::none_of(present.begin(), present.end(), [](bool b) { return b; })) {
    present[std::uniform_int_distribution<std::size_t>(0, config.n_tags - 1)(rng)] = true;
  }
  const double sr = config.sample_rate;
  for (std::size_t k = 0; k < config.n_tags; ++k) {
    if (present[k]) add_tone(clip.audio.samples, sr, bands[2 * k].lo_hz, bands[2 * k].hi_hz, rng);
  }
  std::vector<bool> labeled = present;
  if (split == "train" && config.label_noise > 0) {
    // Separate stream, so the audio is the same at every noise level.
    std::seed_seq noise_seq{static_cast<std::uint32_t>(config.seed),
                            static_cast<std::uint32_t>(config.seed >> 32),
                            static_cast<std::uint32_t>(index), 0x6e6f6973u};
    std::mt19937_64 flip(noise_seq);
    for (std::size_t k = 0; k < config.n_tags; ++k) {
      if (u(flip) < config.label_noise) labeled[k] = !labeled[k];
    }
    if (std::none_of(labeled.begin(), labeled.end(), [](bool b) { return b; })) labeled = present;
  }
  for (std::size_t k = 0; k < config.n_tags; ++k) {
    if (labeled[k]) clip.tags.push_back(bands[2 * k].name);
  }
  const std::size_t nd =
      std::uniform_int_distribution<std::size_t>(0, config.max_distractors)(rng);
  for (std::size_t d = 0; d < nd; ++d) {
    const auto& b = bands[2 * std::uniform_int_distribution<std::size_t>(0, config.n_tags - 1)(rng) + 1];
    add_tone(clip.audio.samples, sr, b.lo_hz, b.hi_hz, rng);
  }
  double peak = 0;
  for (double s : clip.audio.samples) peak = std::max(peak, std::abs(s));
  if (peak > 0.99) {
    for (double& s : clip.audio.samples) s *= 0.99 / peak;
  }
  return clip;
}

std::size_t synth_count(const SynthConfig& config, const std::string& split) {
  if (split == "train") return config.train;
  if (split == "val") return config.val;
  if (split == "test") return config.test;
  throw ValidationError("unknown split `" + split + "`");
}

train::Dataset synth_split(const SynthConfig& config, const std::string& split,
                           std::size_t hop) {
  const std::size_t n = synth_count(config, split);
  const auto fb = dsp::mel_filterbank(dsp::kWindow, dsp::kMelBins, config.sample_rate, 0.0,
                                      config.sample_rate / 2.0);
  train::Dataset data;
  data.tags = synth_tags(config);
  for (std::size_t i = 0; i < n; ++i) {
    SynthClip c = synth_clip(config, split, i);
    train::Example ex;
    ex.id = c.id;
    ex.spec = dsp::logmel(c.audio, hop, fb);
    ex.labels.assign(data.tags.size(), 0.0f);
    for (const auto& t : c.tags) {
      const auto it = std::find(data.tags.begin(), data.tags.end(), t);
      ex.labels[static_cast<std::size_t>(it - data.tags.begin())] = 1.0f;
    }
    data.examples.push_back(std::move(ex));
  }
  return data;
}

SynthOutput write_synth_dataset(const SynthConfig& config, const std::filesystem::path& dir) {
  config.validate();
  std::filesystem::create_directories(dir / "audio");
  SynthOutput out;
  out.tags = synth_tags(config);
  out.train_manifest = dir / "train.tsv";
  out.val_manifest = dir / "val.tsv";
  out.test_manifest = dir / "test.tsv";
  out.vocabulary = dir / "tags.txt";
  const std::pair<std::string, std::size_t> splits[] = {
      {"train", config.train}, {"val", config.val}, {"test", config.test}};
  for (const auto& [split, count] : splits) {
    std::string manifest = "track_id\tpath\ttags\n";
    for (std::size_t i = 0; i < count; ++i) {
      const SynthClip c = synth_clip(config, split, i);
      const std::string rel = "audio/" + c.id + ".wav";
      dsp::write_wav(dir / rel, c.audio, dsp::WavEncoding::kPcm16);
      manifest += c.id + "\t" + rel + "\t";
      for (std::size_t t = 0; t < c.tags.size(); ++t) manifest += (t ? "," : "") + c.tags[t];
      manifest += "\n";
    }
    write_text(dir / (split + ".tsv"), manifest);
  }
  std::string vocab;
  for (const auto& t : out.tags) vocab += t + "\n";
  write_text(out.vocabulary, vocab);
  std::string bands = "band\tfirst_mel_bin\tlast_mel_bin\tlo_hz\thi_hz\tdistractor\n";
  for (const auto& b : synth_bands(config)) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s\t%zu\t%zu\t%.1f\t%.1f\t%d\n", b.name.c_str(), b.first_bin,
                  b.last_bin, b.lo_hz, b.hi_hz, b.distractor ? 1 : 0);
    bands += buf;
  }
  write_text(dir / "bands.tsv", bands);
  return out;
}

}  // namespace rftag::pipeline
