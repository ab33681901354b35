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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rftag/eval/metrics.hpp"
#include "rftag/train/data.hpp"

namespace rftag::pipeline {

struct ManifestEntry {
  std::string id;
  std::string path;  // as written in the file
  std::filesystem::path resolved;  // relative paths resolve against the manifest directory
  std::vector<std::string> tags;
  std::size_t line = 0;
};

struct Manifest {
  std::filesystem::path source;
  std::string split;  // train, val, test or empty
  std::vector<std::string> vocabulary;
  std::vector<ManifestEntry> entries;
};

// One tag per line; blank lines and lines starting with # are ignored.
std::vector<std::string> read_vocabulary(const std::filesystem::path& path);

// "train", "val" or "test" when the file stem names one, else "".
std::string split_from_filename(const std::filesystem::path& path);

Manifest parse_manifest_text(const std::string& text, const std::filesystem::path& source,
                             const std::optional<std::vector<std::string>>& vocabulary = {});

// Header track_id<TAB>path<TAB>tags, tags comma separated. Without a
// vocabulary the sorted union of all tags is used.
Manifest parse_manifest(const std::filesystem::path& path,
                        const std::optional<std::filesystem::path>& vocabulary = {},
                        const std::string& split = "");

std::string format_manifest(const Manifest& manifest);

eval::LabelSet manifest_labels(const Manifest& manifest);

// Feature settings used when a manifest points at audio instead of
// RFSPEC01 files.
struct FeatureOptions {
  std::size_t hop = 512;
  double sample_rate = 44100.0;
};

// ".rfspec" entries are read as stored; anything else is decoded as WAV
// and turned into log-mel features. Workers are capped by thread_limit().
train::Dataset load_dataset(const Manifest& manifest, const FeatureOptions& features = {});

// RFTAG_THREADS when set and positive, else the hardware concurrency.
std::size_t thread_limit();

}  // namespace rftag::pipeline
