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

#include "rftag/pipeline/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "rftag/dsp/spectrogram.hpp"
#include "rftag/error.hpp"

namespace rftag::pipeline {

namespace {

std::string trim(const std::string& s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

const std::set<std::string> kPathKeys = {"run.out_dir", "data.train", "data.val", "data.test",
                                         "data.vocabulary"};

}  // namespace

const std::vector<std::pair<std::string, std::string>>& RunConfig::defaults() {
  static const std::vector<std::pair<std::string, std::string>> table = {
      {"run.out_dir", ""},
      {"run.seed", "0"},
      {"data.train", ""},
      {"data.val", ""},
      {"data.test", ""},
      {"data.vocabulary", ""},
      {"dsp.overlap", "75%"},
      {"dsp.sample_rate", "44100"},
      {"model.template", "cp_resnet"},
      {"model.rho", ""},
      {"model.rho_time", ""},
      {"model.frequency_aware", "false"},
      {"model.shake_shake", "false"},
      {"train.epochs", "200"},
      {"train.lr_peak", "1e-4"},
      {"train.lr_final", "1e-6"},
      {"train.warmup_start_factor", "0.01"},
      {"train.mixup_alpha", "0.3"},
      {"train.batch_size", "8"},
      {"train.crop_frames", "512"},
      {"train.swa_every", "3"},
      {"train.swa_bn_refresh", "true"},
      {"eval.max_swa", "4"},
      {"sweep.budgets", "48,256"},
      {"synth.n_tags", "4"},
      {"synth.train", "200"},
      {"synth.val", "50"},
      {"synth.test", "50"},
      {"synth.clip_seconds", "1.5"},
      {"synth.band_bins", "12"},
      {"synth.tag_probability", "0.35"},
      {"synth.max_distractors", "2"},
      {"synth.noise_level", "0.01"},
      {"synth.label_noise", "0"},
      {"synth.seed", "0"},
  };
  return table;
}

RunConfig::RunConfig() {
  for (const auto& [k, v] : defaults()) values_[k] = v;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  set_relative(key, value, std::filesystem::current_path());
}

void RunConfig::set_relative(const std::string& key, const std::string& value,
                             const std::filesystem::path& base) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ValidationError("unknown config key `" + key + "`");
  if (kPathKeys.contains(key) && !value.empty()) {
    // Stored absolute so the resolved config reruns from anywhere.
    it->second = std::filesystem::absolute(base / value).lexically_normal().string();
  } else {
    it->second = value;
  }
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ValidationError("unknown config key `" + key + "`");
  return it->second;
}

void RunConfig::merge_text(const std::string& text, const std::string& origin,
                           const std::filesystem::path& base) {
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const std::string at = origin + ":" + std::to_string(n) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ValidationError(at + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(at + "expected key = value");
    if (section.empty()) throw ValidationError(at + "key outside of a [section]");
    const std::string key = section + "." + trim(line.substr(0, eq));
    try {
      set_relative(key, trim(line.substr(eq + 1)),
                   base.empty() ? std::filesystem::current_path() : base);
    } catch (const ValidationError& e) {
      throw ValidationError(at + e.what());
    }
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("config not found: " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  // Relative paths in a file are relative to that file.
  merge_text(s.str(), path.string(), std::filesystem::absolute(path).parent_path());
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError("override must look like section.key=value, got `" + assignment + "`");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::size_t RunConfig::get_size(const std::string& key) const {
  const std::string& v = get(key);
  char* end = nullptr;
  errno = 0;
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || v[0] == '-' || *end != '\0' || errno != 0) {
    throw ValidationError("config " + key + ": expected a non-negative integer, got `" + v + "`");
  }
  return static_cast<std::size_t>(x);
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || !std::isfinite(x)) {
    throw ValidationError("config " + key + ": expected a number, got `" + v + "`");
  }
  return x;
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError("config " + key + ": expected true or false, got `" + v + "`");
}

std::optional<std::size_t> RunConfig::get_optional_size(const std::string& key) const {
  const std::string& v = get(key);
  if (v.empty() || v == "none") return std::nullopt;
  return get_size(key);
}

std::vector<std::size_t> RunConfig::get_size_list(const std::string& key) const {
  std::vector<std::size_t> out;
  std::istringstream in(get(key));
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    char* end = nullptr;
    const unsigned long long x = std::strtoull(item.c_str(), &end, 10);
    if (item.empty() || item[0] == '-' || *end != '\0') {
      throw ValidationError("config " + key + ": bad list entry `" + item + "`");
    }
    out.push_back(static_cast<std::size_t>(x));
  }
  if (out.empty()) throw ValidationError("config " + key + ": empty list");
  return out;
}

std::size_t hop_for_overlap(const std::string& preset) {
  if (preset == "75%" || preset == "75") return dsp::kHop75;
  if (preset == "25%" || preset == "25") return dsp::kHop25;
  char* end = nullptr;
  const unsigned long long x = std::strtoull(preset.c_str(), &end, 10);
  if (!preset.empty() && preset.back() != '%' && *end == '\0' && x > 0) {
    return static_cast<std::size_t>(x);
  }
  throw ValidationError("dsp.overlap: expected 75%, 25% or a hop in samples, got `" + preset + "`");
}

std::size_t RunConfig::hop() const { return hop_for_overlap(get("dsp.overlap")); }

zoo::ModelConfig RunConfig::model_config(std::size_t n_tags) const {
  zoo::ModelConfig m;
  m.template_name = get("model.template");
  m.rho = get_optional_size("model.rho");
  m.rho_time = get_optional_size("model.rho_time");
  m.frequency_aware = get_bool("model.frequency_aware");
  m.shake_shake = get_bool("model.shake_shake");
  m.n_tags = n_tags;
  m.seed = get_size("run.seed");
  return m;
}

train::TrainConfig RunConfig::train_config() const {
  train::TrainConfig base;
  base.lr_peak = get_double("train.lr_peak");
  base.lr_final = get_double("train.lr_final");
  base.warmup_start_factor = get_double("train.warmup_start_factor");
  base.mixup_alpha = get_double("train.mixup_alpha");
  base.batch_size = get_size("train.batch_size");
  base.crop_frames = get_size("train.crop_frames");
  base.swa_every = get_size("train.swa_every");
  base.swa_bn_refresh = get_bool("train.swa_bn_refresh");
  base.seed = get_size("run.seed");
  const std::size_t epochs = get_size("train.epochs");
  train::TrainConfig c = epochs == base.total_epochs ? base : base.scaled(epochs);
  c.validate();
  return c;
}

SynthConfig RunConfig::synth_config() const {
  SynthConfig s;
  s.n_tags = get_size("synth.n_tags");
  s.train = get_size("synth.train");
  s.val = get_size("synth.val");
  s.test = get_size("synth.test");
  s.clip_seconds = get_double("synth.clip_seconds");
  s.sample_rate = get_double("dsp.sample_rate");
  s.band_bins = get_size("synth.band_bins");
  s.tag_probability = get_double("synth.tag_probability");
  s.max_distractors = get_size("synth.max_distractors");
  s.noise_level = get_double("synth.noise_level");
  s.label_noise = get_double("synth.label_noise");
  s.seed = get_size("synth.seed");
  s.validate();
  return s;
}

void RunConfig::validate() const {
  hop();
  if (get_double("dsp.sample_rate") <= 0) throw ValidationError("dsp.sample_rate must be positive");
  model_config(1).validate();
  train_config();
  synth_config();
  get_size("eval.max_swa");
  get_size_list("sweep.budgets");
}

std::string RunConfig::format() const {
  std::string out;
  std::string section;
  for (const auto& [key, _] : defaults()) {
    const auto dot = key.find('.');
    const std::string s = key.substr(0, dot);
    if (s != section) {
      out += (section.empty() ? "[" : "\n[") + s + "]\n";
      section = s;
    }
    out += key.substr(dot + 1) + " = " + values_.at(key) + "\n";
  }
  return out;
}

void RunConfig::write(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw RuntimeFailure("cannot write " + path.string());
  f << format();
}

}  // namespace rftag::pipeline
