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

#include "rftag/pipeline/manifest.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "rftag/dsp/audio.hpp"
#include "rftag/dsp/spectrogram.hpp"
#include "rftag/error.hpp"

namespace rftag::pipeline {

namespace {

std::string read_file(const std::filesystem::path& path, const char* what) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError(std::string(what) + " not found: " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string trim(std::string s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

std::vector<std::string> read_vocabulary(const std::filesystem::path& path) {
  std::istringstream in(read_file(path, "vocabulary"));
  std::vector<std::string> tags;
  std::set<std::string> seen;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (!seen.insert(line).second) {
      throw ValidationError(path.string() + ":" + std::to_string(n) + ": duplicate tag `" +
                            line + "`");
    }
    tags.push_back(line);
  }
  if (tags.empty()) throw ValidationError(path.string() + ": empty vocabulary");
  return tags;
}

std::string split_from_filename(const std::filesystem::path& path) {
  const std::string stem = path.stem().string();
  for (const char* s : {"train", "val", "test"}) {
    if (stem == s || stem.starts_with(std::string(s) + "_") ||
        stem.ends_with(std::string("_") + s)) {
      return s;
    }
  }
  return "";
}

Manifest parse_manifest_text(const std::string& text, const std::filesystem::path& source,
                             const std::optional<std::vector<std::string>>& vocabulary) {
  Manifest m;
  m.source = source;
  const std::string where = source.empty() ? "manifest" : source.string();
  const std::filesystem::path base = source.empty() ? std::filesystem::path{} : source.parent_path();
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  bool header = false;
  std::map<std::string, std::size_t> first_line;
  std::set<std::string> all_tags;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cols = split_on(line, '\t');
    const std::string at = where + ":" + std::to_string(n) + ": ";
    if (!header) {
      if (cols.size() < 3 || trim(cols[0]) != "track_id" || trim(cols[1]) != "path" ||
          trim(cols[2]) != "tags") {
        throw ValidationError(at + "expected header track_id<TAB>path<TAB>tags");
      }
      header = true;
      continue;
    }
    if (cols.size() < 2 || trim(cols[1]).empty()) throw ValidationError(at + "missing path column");
    if (cols.size() < 3 || trim(cols[2]).empty()) throw ValidationError(at + "empty tag cell");
    if (cols.size() > 3) throw ValidationError(at + "expected 3 columns, got " + std::to_string(cols.size()));
    ManifestEntry e;
    e.id = trim(cols[0]);
    if (e.id.empty()) throw ValidationError(at + "empty track_id");
    const auto [it, fresh] = first_line.emplace(e.id, n);
    if (!fresh) {
      throw ValidationError(where + ": duplicate track_id `" + e.id + "` on lines " +
                            std::to_string(it->second) + " and " + std::to_string(n));
    }
    e.path = trim(cols[1]);
    e.resolved = std::filesystem::path(e.path).is_absolute() ? std::filesystem::path(e.path)
                                                             : base / e.path;
    std::set<std::string> own;
    for (auto t : split_on(cols[2], ',')) {
      t = trim(t);
      if (t.empty()) throw ValidationError(at + "empty tag in `" + cols[2] + "`");
      if (own.insert(t).second) e.tags.push_back(t);
    }
    e.line = n;
    all_tags.insert(e.tags.begin(), e.tags.end());
    m.entries.push_back(std::move(e));
  }
  if (!header) throw ValidationError(where + ": empty manifest");
  if (vocabulary) {
    const std::set<std::string> known(vocabulary->begin(), vocabulary->end());
    for (const auto& e : m.entries) {
      for (const auto& t : e.tags) {
        if (!known.contains(t)) {
          throw ValidationError(where + ":" + std::to_string(e.line) + ": unknown tag `" + t + "`");
        }
      }
    }
    m.vocabulary = *vocabulary;
  } else {
    m.vocabulary.assign(all_tags.begin(), all_tags.end());
  }
  return m;
}

Manifest parse_manifest(const std::filesystem::path& path,
                        const std::optional<std::filesystem::path>& vocabulary,
                        const std::string& split) {
  std::optional<std::vector<std::string>> vocab;
  if (vocabulary) vocab = read_vocabulary(*vocabulary);
  Manifest m = parse_manifest_text(read_file(path, "manifest"), path, vocab);
  m.split = split.empty() ? split_from_filename(path) : split;
  if (!m.split.empty() && m.split != "train" && m.split != "val" && m.split != "test") {
    throw ValidationError("unknown split `" + m.split + "`");
  }
  return m;
}

std::string format_manifest(const Manifest& manifest) {
  std::string out = "track_id\tpath\ttags\n";
  for (const auto& e : manifest.entries) {
    out += e.id + "\t" + e.path + "\t";
    for (std::size_t i = 0; i < e.tags.size(); ++i) out += (i ? "," : "") + e.tags[i];
    out += "\n";
  }
  return out;
}

eval::LabelSet manifest_labels(const Manifest& manifest) {
  eval::LabelSet labels;
  labels.tags = manifest.vocabulary;
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < labels.tags.size(); ++i) col[labels.tags[i]] = i;
  for (const auto& e : manifest.entries) {
    labels.ids.push_back(e.id);
    std::vector<std::uint8_t> row(labels.tags.size(), 0);
    for (const auto& t : e.tags) {
      const auto it = col.find(t);
      if (it == col.end()) throw ValidationError("unknown tag `" + t + "`");
      row[it->second] = 1;
    }
    labels.values.insert(labels.values.end(), row.begin(), row.end());
  }
  return labels;
}

std::size_t thread_limit() {
  if (const char* env = std::getenv("RFTAG_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

train::Dataset load_dataset(const Manifest& manifest, const FeatureOptions& features) {
  train::Dataset data;
  data.tags = manifest.vocabulary;
  const auto labels = manifest_labels(manifest);
  const std::size_t n = manifest.entries.size();
  data.examples.resize(n);
  const auto fb = dsp::mel_filterbank(dsp::kWindow, dsp::kMelBins, features.sample_rate, 0.0,
                                      features.sample_rate / 2.0);
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const auto& e = manifest.entries[i];
      try {
        auto& ex = data.examples[i];
        ex.id = e.id;
        if (e.resolved.extension() == ".rfspec") {
          ex.spec = dsp::read_rfspec(e.resolved);
        } else {
          ex.spec = dsp::logmel_padded(dsp::load_wav(e.resolved, features.sample_rate),
                                       features.hop, fb);
        }
        ex.labels.resize(data.tags.size());
        for (std::size_t t = 0; t < data.tags.size(); ++t) {
          ex.labels[t] = static_cast<float>(labels.at(i, t));
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(thread_limit(), std::max<std::size_t>(n, 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  if (!data.empty()) data.validate(data.examples.front().spec.bins);
  return data;
}

}  // namespace rftag::pipeline
