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
#include <filesystem>
#include <string>
#include <vector>

#include "rftag/dsp/audio.hpp"
#include "rftag/dsp/spectrogram.hpp"
#include "rftag/train/data.hpp"

namespace rftag::pipeline {

// Tagging task built from tones: tag k is present when a tone sounds
// inside its own narrow mel band. Distractor tones sit in the bands
// between tag bands, and white noise covers everything.
struct SynthConfig {
  std::size_t n_tags = 4;
  std::size_t train = 200;
  std::size_t val = 50;
  std::size_t test = 50;
  double clip_seconds = 1.5;
  double sample_rate = 44100.0;
  std::size_t band_bins = 12;  // mel bins per band; must stay below 32
  double tag_probability = 0.35;
  std::size_t max_distractors = 2;
  double noise_level = 0.01;
  // Probability that a train-split tag cell is flipped in the labels. The
  // audio does not change; val and test labels stay clean.
  double label_noise = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthBand {
  std::string name;
  std::size_t first_bin = 0;  // inclusive mel bins
  std::size_t last_bin = 0;
  double lo_hz = 0;
  double hi_hz = 0;
  bool distractor = false;
};

std::vector<SynthBand> synth_bands(const SynthConfig& config);

struct SynthClip {
  std::string id;
  std::string split;
  std::vector<std::string> tags;
  dsp::AudioClip audio;
};

std::vector<std::string> synth_tags(const SynthConfig& config);

// Deterministic in (seed, split, index).
SynthClip synth_clip(const SynthConfig& config, const std::string& split, std::size_t index);

std::size_t synth_count(const SynthConfig& config, const std::string& split);

// Log-mel features of one split computed in memory, without touching disk.
train::Dataset synth_split(const SynthConfig& config, const std::string& split,
                           std::size_t hop = dsp::kHop75);

struct SynthOutput {
  std::filesystem::path train_manifest;
  std::filesystem::path val_manifest;
  std::filesystem::path test_manifest;
  std::filesystem::path vocabulary;
  std::vector<std::string> tags;
};

// Writes audio/<id>.wav, train/val/test.tsv manifests, tags.txt and
// bands.tsv under `dir`.
SynthOutput write_synth_dataset(const SynthConfig& config, const std::filesystem::path& dir);

}  // namespace rftag::pipeline
