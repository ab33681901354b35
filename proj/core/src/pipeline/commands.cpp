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

#include "rftag/pipeline/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "rftag/dsp/audio.hpp"
#include "rftag/dsp/spectrogram.hpp"
#include "rftag/error.hpp"
#include "rftag/eval/inference.hpp"
#include "rftag/rf/receptive_field.hpp"

namespace rftag::pipeline {

namespace {

std::string slurp(const std::filesystem::path& path, const char* what) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError(std::string(what) + " not found: " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
  return buf;
}

// File names derived from track ids keep [A-Za-z0-9._-].
std::string safe_name(const std::string& id) {
  std::string out = id;
  for (char& c : out) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-')) c = '_';
  }
  if (out.empty() || out[0] == '.') out = "_" + out;
  return out;
}

struct IndexRow {
  std::string file;
  std::string source_hash;
  std::string output_hash;
};

constexpr const char* kIndexHeader = "track_id\tfile\tsource_hash\toutput_hash";

std::map<std::string, IndexRow> read_index(const std::filesystem::path& path) {
  std::map<std::string, IndexRow> rows;
  std::ifstream f(path);
  if (!f) return rows;
  std::string line;
  std::getline(f, line);
  while (std::getline(f, line)) {
    std::istringstream in(line);
    std::string id;
    IndexRow r;
    if (std::getline(in, id, '\t') && std::getline(in, r.file, '\t') &&
        std::getline(in, r.source_hash, '\t') && std::getline(in, r.output_hash)) {
      rows[id] = r;
    }
  }
  return rows;
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) h = (h ^ p[i]) * 1099511628211ULL;
  return h;
}

std::uint64_t file_hash(const std::filesystem::path& path) {
  const std::string bytes = slurp(path, "file");
  return fnv1a(bytes.data(), bytes.size());
}

bool write_if_changed(const std::filesystem::path& path, const std::string& bytes) {
  {
    std::ifstream f(path, std::ios::binary);
    if (f) {
      std::ostringstream s;
      s << f.rdbuf();
      if (s.str() == bytes) return false;
    }
  }
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw RuntimeFailure("cannot write " + tmp);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw RuntimeFailure("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
  return true;
}

ExtractResult extract(const Manifest& manifest, const std::filesystem::path& out_dir,
                      const RunConfig& config) {
  const std::size_t hop = config.hop();
  const double rate = config.get_double("dsp.sample_rate");
  std::filesystem::create_directories(out_dir);
  ExtractResult result;
  result.index = out_dir / "index.tsv";
  result.manifest = out_dir / manifest.source.filename();
  if (std::filesystem::exists(result.manifest) && std::filesystem::exists(manifest.source) &&
      std::filesystem::equivalent(result.manifest, manifest.source)) {
    throw ValidationError("extract output would overwrite its own manifest " +
                          manifest.source.string());
  }
  auto index = read_index(result.index);
  const std::string settings = "hop=" + std::to_string(hop) + ";rate=" + g17(rate) +
                               ";window=" + std::to_string(dsp::kWindow) +
                               ";mels=" + std::to_string(dsp::kMelBins);
  const auto fb = dsp::mel_filterbank(dsp::kWindow, dsp::kMelBins, rate, 0.0, rate / 2.0);

  const std::size_t n = manifest.entries.size();
  std::vector<std::optional<IndexRow>> fresh(n);
  std::vector<std::string> errors(n);
  std::vector<std::uint8_t> wrote(n, 0);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const auto& e = manifest.entries[i];
      try {
        const std::string bytes = slurp(e.resolved, "audio file");
        std::uint64_t h = fnv1a(bytes.data(), bytes.size());
        h = fnv1a(settings.data(), settings.size(), h);
        IndexRow row{safe_name(e.id) + ".rfspec", hex64(h), ""};
        const auto out_path = out_dir / row.file;
        const auto it = index.find(e.id);
        if (it != index.end() && it->second.file == row.file &&
            it->second.source_hash == row.source_hash && std::filesystem::exists(out_path) &&
            hex64(file_hash(out_path)) == it->second.output_hash) {
          fresh[i] = it->second;
          continue;
        }
        const auto clip = dsp::load_wav(e.resolved, rate);
        const auto encoded = dsp::encode_rfspec(dsp::logmel_padded(clip, hop, fb));
        const std::string out_bytes(encoded.begin(), encoded.end());
        wrote[i] = write_if_changed(out_path, out_bytes) ? 1 : 0;
        row.output_hash = hex64(fnv1a(out_bytes.data(), out_bytes.size()));
        fresh[i] = row;
      } catch (const std::exception& ex) {
        errors[i] = ex.what();
      }
    }
  };
  const std::size_t workers = std::min(thread_limit(), std::max<std::size_t>(n, 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  Manifest out = manifest;
  out.entries.clear();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = manifest.entries[i];
    if (!fresh[i]) {
      result.failures.emplace_back(e.id, errors[i]);
      index.erase(e.id);
      continue;
    }
    index[e.id] = *fresh[i];
    if (wrote[i]) {
      ++result.written;
    } else {
      ++result.skipped;
    }
    ManifestEntry m = e;
    m.path = fresh[i]->file;
    out.entries.push_back(m);
  }
  std::string text = std::string(kIndexHeader) + "\n";
  for (const auto& [id, r] : index) {
    text += id + "\t" + r.file + "\t" + r.source_hash + "\t" + r.output_hash + "\n";
  }
  write_if_changed(result.index, text);
  write_if_changed(result.manifest, format_manifest(out));
  return result;
}

RunData load_run_data(const RunConfig& config) {
  if (!config.has_value("data.train") || !config.has_value("data.val")) {
    throw ValidationError("data.train and data.val must be set");
  }
  std::optional<std::filesystem::path> vocab;
  if (config.has_value("data.vocabulary")) vocab = config.get("data.vocabulary");
  const Manifest tr = parse_manifest(config.get("data.train"), vocab, "train");
  std::optional<std::vector<std::string>> tags = tr.vocabulary;
  Manifest va = parse_manifest_text(slurp(config.get("data.val"), "manifest"),
                                    config.get("data.val"), tags);
  va.split = "val";
  FeatureOptions features{config.hop(), config.get_double("dsp.sample_rate")};
  RunData d;
  d.tags = tr.vocabulary;
  d.train = load_dataset(tr, features);
  d.val = load_dataset(va, features);
  if (d.train.empty() || d.val.empty()) throw ValidationError("train and val splits must not be empty");
  const std::size_t bins = d.train.examples.front().spec.bins;
  d.val.validate(bins);
  return d;
}

train::RunArtifacts run_training(const RunConfig& config, const RunData& data,
                                 const std::filesystem::path& out_dir, std::ostream* log) {
  config.validate();
  auto mc = config.model_config(data.tags.size());
  mc.input_bins = data.train.examples.front().spec.bins;
  const auto tc = config.train_config();
  std::filesystem::create_directories(out_dir);
  RunConfig resolved = config;
  resolved.set("run.out_dir", std::filesystem::absolute(out_dir).string());
  resolved.write(out_dir / "config.ini");
  zoo::Model model = zoo::build_model<float>(mc);
  zoo::ConfigEcho echo;
  echo["dsp.hop"] = std::to_string(config.hop());
  echo["dsp.sample_rate"] = config.get("dsp.sample_rate");
  return train::train(model, data.train, data.val, tc, out_dir, echo, log);
}

std::string format_sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = std::string(kSweepHeader) + "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.budget) + ",";
    out += (r.rho ? std::to_string(*r.rho) : "") + ",";
    out += (r.rf_freq ? std::to_string(*r.rf_freq) : "") + ",";
    out += r.variant + "," + r.split + ",";
    if (r.pr_auc) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6f", *r.pr_auc);
      out += buf;
    } else {
      out += "nan";
    }
    out += "\n";
  }
  return out;
}

SweepResult rf_sweep(const RunConfig& config, const std::vector<std::size_t>& budgets,
                     const std::filesystem::path& out_dir, std::ostream* log) {
  if (budgets.empty()) throw ValidationError("rf-sweep needs at least one budget");
  config.validate();
  if (!config.has_value("data.test")) throw ValidationError("data.test must be set for rf-sweep");
  const RunData data = load_run_data(config);
  const Manifest te = parse_manifest_text(slurp(config.get("data.test"), "manifest"),
                                          config.get("data.test"), data.tags);
  const train::Dataset test = load_dataset(te, {config.hop(), config.get_double("dsp.sample_rate")});
  const auto labels_val = train::labels_of(data.val);
  const auto labels_test = train::labels_of(test);

  auto mc = config.model_config(data.tags.size());
  mc.input_bins = data.train.examples.front().spec.bins;
  const rf::RhoTemplate tmpl{mc.resolved_base(), mc.rho_time};

  SweepResult result;
  std::filesystem::create_directories(out_dir);
  for (const std::size_t budget : budgets) {
    std::vector<SweepRow> rows;
    for (const char* variant : {"best", "swa"}) {
      for (const char* split : {"val", "test"}) rows.push_back({budget, {}, {}, variant, split, {}});
    }
    try {
      const std::size_t rho = rf::max_rho_for_budget(tmpl, budget);
      const std::size_t rf_freq = rf::compute_rf(rf::apply_rho(tmpl, rho)).rf_freq;
      for (auto& r : rows) {
        r.rho = rho;
        r.rf_freq = rf_freq;
      }
      RunConfig member = config;
      member.set("model.rho", std::to_string(rho));
      const auto dir = out_dir / ("budget_" + std::to_string(budget));
      if (log) *log << "budget " << budget << ": rho " << rho << ", rf_freq " << rf_freq << "\n";
      const auto art = run_training(member, data, dir, log);
      if (art.swa.empty()) throw RuntimeFailure("run produced no SWA checkpoint");
      const std::filesystem::path ckpts[] = {art.best, art.swa.back()};
      for (std::size_t v = 0; v < 2; ++v) {
        auto ck = zoo::load_checkpoint(ckpts[v]);
        const auto opts = eval::inference_options(ck.echo);
        rows[2 * v].pr_auc = eval::macro_pr_auc(eval::predict(ck.model, data.val, opts), labels_val).macro_pr_auc;
        rows[2 * v + 1].pr_auc = eval::macro_pr_auc(eval::predict(ck.model, test, opts), labels_test).macro_pr_auc;
      }
    } catch (const std::exception& e) {
      result.failures.push_back("budget " + std::to_string(budget) + ": " + e.what());
      if (log) *log << "budget " << budget << " failed: " << e.what() << "\n";
    }
    result.rows.insert(result.rows.end(), rows.begin(), rows.end());
    write_if_changed(out_dir / "sweep.csv", format_sweep_csv(result.rows));
  }
  return result;
}

PredictResult predict_manifest(const std::filesystem::path& source,
                               const std::filesystem::path& manifest_path, std::size_t max_swa) {
  if (!std::filesystem::exists(source)) {
    throw ValidationError("checkpoint not found: " + source.string());
  }
  PredictResult out;
  if (std::filesystem::is_directory(source)) {
    out.members = eval::snapshot_members(source, max_swa);
  } else {
    out.members = {source};
  }
  std::vector<eval::PredictionSet> sets;
  std::optional<train::Dataset> data;
  std::vector<std::string> tags;
  for (const auto& path : out.members) {
    auto ck = zoo::load_checkpoint(path);
    const auto ck_tags = eval::echo_tags(ck.echo);
    if (!data) {
      tags = ck_tags;
      const Manifest m = parse_manifest_text(slurp(manifest_path, "manifest"), manifest_path, tags);
      FeatureOptions features;
      if (ck.echo.contains("dsp.hop")) features.hop = std::stoul(ck.echo.at("dsp.hop"));
      if (ck.echo.contains("dsp.sample_rate")) features.sample_rate = std::stod(ck.echo.at("dsp.sample_rate"));
      data = load_dataset(m, features);
    } else if (ck_tags != tags) {
      throw ValidationError(path.string() + " was trained on a different tag vocabulary");
    }
    sets.push_back(eval::predict(ck.model, *data, eval::inference_options(ck.echo)));
  }
  out.predictions = eval::ensemble_average(sets);
  return out;
}

eval::LabelSet load_labels(const std::filesystem::path& path,
                           const std::vector<std::string>& vocabulary) {
  const std::string text = slurp(path, "labels");
  if (text.starts_with("track_id\tpath\ttags")) {
    return manifest_labels(parse_manifest_text(text, path, vocabulary));
  }
  return eval::parse_labels(text, path.string());
}

std::vector<std::filesystem::path> read_member_list(const std::filesystem::path& path) {
  std::istringstream in(slurp(path, "member list"));
  std::vector<std::filesystem::path> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    const auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] == '#') continue;
    std::filesystem::path p = line.substr(b);
    out.push_back(p.is_absolute() ? p : path.parent_path() / p);
  }
  if (out.empty()) throw ValidationError(path.string() + ": no ensemble members listed");
  return out;
}

}  // namespace rftag::pipeline
