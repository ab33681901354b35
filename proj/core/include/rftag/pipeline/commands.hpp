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
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rftag/eval/metrics.hpp"
#include "rftag/pipeline/config.hpp"
#include "rftag/pipeline/manifest.hpp"
#include "rftag/train/trainer.hpp"

namespace rftag::pipeline {

// 64-bit FNV-1a.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 14695981039346656037ULL);
std::uint64_t file_hash(const std::filesystem::path& path);

// Writes only when the bytes differ; returns whether it wrote.
bool write_if_changed(const std::filesystem::path& path, const std::string& bytes);

// ---- extract

struct ExtractResult {
  std::size_t written = 0;
  std::size_t skipped = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // id, reason
  std::filesystem::path index;
  std::filesystem::path manifest;  // same name as the input, pointing at .rfspec files
};

// One <id>.rfspec per track plus index.tsv (track_id, file, source hash,
// output hash). A track whose source hash, settings and output file are
// unchanged is skipped. Files are processed by up to thread_limit() workers.
ExtractResult extract(const Manifest& manifest, const std::filesystem::path& out_dir,
                      const RunConfig& config);

// ---- training

struct RunData {
  train::Dataset train;
  train::Dataset val;
  std::vector<std::string> tags;
};

RunData load_run_data(const RunConfig& config);

// Writes config.ini and trains into run.out_dir.
train::RunArtifacts run_training(const RunConfig& config, const RunData& data,
                                 const std::filesystem::path& out_dir, std::ostream* log);

// ---- rf sweep

struct SweepRow {
  std::size_t budget = 0;
  std::optional<std::size_t> rho;
  std::optional<std::size_t> rf_freq;
  std::string variant;  // best or swa
  std::string split;    // val or test
  std::optional<double> pr_auc;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<std::string> failures;  // "budget B: reason"
};

// Per budget: rho = max_rho_for_budget, train into out_dir/budget_B,
// score best.ckpt and the last SWA checkpoint on val and test.
SweepResult rf_sweep(const RunConfig& config, const std::vector<std::size_t>& budgets,
                     const std::filesystem::path& out_dir, std::ostream* log);

inline constexpr const char* kSweepHeader = "budget,rho,rf_freq,variant,split,pr_auc";
std::string format_sweep_csv(const std::vector<SweepRow>& rows);

// ---- inference and evaluation

// `source` is a run directory (snapshot ensemble: best plus up to max_swa
// SWA checkpoints) or a single .ckpt file. Manifest tags are checked
// against the checkpoint vocabulary.
struct PredictResult {
  eval::PredictionSet predictions;
  std::vector<std::filesystem::path> members;
};

PredictResult predict_manifest(const std::filesystem::path& source,
                               const std::filesystem::path& manifest, std::size_t max_swa);

// Ground truth from a manifest (.tsv with a track_id/path/tags header) or
// a 0/1 label table.
eval::LabelSet load_labels(const std::filesystem::path& path,
                           const std::vector<std::string>& vocabulary);

// Member list: one predictions file per line, relative to the list file;
// blank lines and # comments are skipped.
std::vector<std::filesystem::path> read_member_list(const std::filesystem::path& path);

}  // namespace rftag::pipeline
