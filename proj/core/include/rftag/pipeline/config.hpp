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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rftag/pipeline/synth.hpp"
#include "rftag/train/schedule.hpp"
#include "rftag/zoo/model.hpp"

namespace rftag::pipeline {

// Every setting a run can take, as "section.key" -> value text. Starts
// from the defaults; files and overrides may only touch known keys.
class RunConfig {
 public:
  RunConfig();

  static const std::vector<std::pair<std::string, std::string>>& defaults();

  // INI: [section] headers, key = value lines, # or ; comments.
  // Relative path values resolve against `base`, or the working directory
  // when it is empty.
  void merge_text(const std::string& text, const std::string& origin = "config",
                  const std::filesystem::path& base = {});
  void merge_file(const std::filesystem::path& path);
  // "section.key=value".
  void apply_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  bool has_value(const std::string& key) const { return !get(key).empty(); }
  std::size_t get_size(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::optional<std::size_t> get_optional_size(const std::string& key) const;
  std::vector<std::size_t> get_size_list(const std::string& key) const;

  // Parses every typed key so a bad value fails before any work starts.
  void validate() const;

  zoo::ModelConfig model_config(std::size_t n_tags) const;
  train::TrainConfig train_config() const;
  SynthConfig synth_config() const;
  std::size_t hop() const;

  // Resolved config as INI, sections in a fixed order.
  std::string format() const;
  void write(const std::filesystem::path& path) const;

 private:
  void set_relative(const std::string& key, const std::string& value,
                    const std::filesystem::path& base);

  std::map<std::string, std::string> values_;
};

// "75%" -> 512, "25%" -> 1536; a plain integer is taken as the hop itself.
std::size_t hop_for_overlap(const std::string& preset);

}  // namespace rftag::pipeline
