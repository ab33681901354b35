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
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rftag::eval {

struct ThresholdSet {
  std::vector<std::string> tags;
  std::vector<double> thresholds;
  std::vector<double> f1;          // validation F1 at the chosen threshold
  std::vector<bool> flagged;       // fell back to 0.5
  std::string metric = "f1";
  std::string source = "val";
};

// Row-major [track][tag].
struct PredictionSet {
  std::vector<std::string> ids;
  std::vector<std::string> tags;
  std::vector<double> scores;
  std::optional<std::vector<std::uint8_t>> decisions;
  std::optional<ThresholdSet> thresholds;

  std::size_t tracks() const { return ids.size(); }
  double score(std::size_t track, std::size_t tag) const {
    return scores[track * tags.size() + tag];
  }
  // Scores in [0,1], unique ids, consistent sizes.
  void validate() const;
};

// Binary ground truth with the same layout.
struct LabelSet {
  std::vector<std::string> ids;
  std::vector<std::string> tags;
  std::vector<std::uint8_t> values;

  std::uint8_t at(std::size_t track, std::size_t tag) const {
    return values[track * tags.size() + tag];
  }
};

// Sum over descending score thresholds of (R_k - R_{k-1}) * P_k. Without
// ties this is the mean precision at each positive. Tied scores enter
// together, which keeps the value independent of how ties are ordered
// (the ranking itself orders ties by ascending id). Throws when there is no
// positive.
double average_precision(std::span<const double> scores,
                         std::span<const std::uint8_t> labels,
                         std::span<const std::string> ids);

struct EvalReport {
  std::vector<std::string> tags;
  std::vector<std::optional<double>> ap;  // nullopt: no positives, excluded
  std::vector<std::size_t> positives;
  double macro_pr_auc = 0.0;

  std::vector<std::string> excluded() const;
};

EvalReport macro_pr_auc(const PredictionSet& preds, const LabelSet& labels);

PredictionSet ensemble_average(const std::vector<PredictionSet>& members);

ThresholdSet tune_thresholds(const PredictionSet& preds, const LabelSet& labels);

// decision = score >= threshold.
PredictionSet apply_thresholds(PredictionSet preds, const ThresholdSet& t);

// Re-expresses `preds` in the track and tag order of `ids`/`tags`.
PredictionSet reorder(const PredictionSet& preds,
                      const std::vector<std::string>& ids,
                      const std::vector<std::string>& tags);

// TSV: header track_id<TAB>tag..., scores to 6 decimals.
std::string format_predictions(const PredictionSet& preds);
std::string format_decisions(const PredictionSet& preds);
void write_predictions(const std::filesystem::path& path, const PredictionSet& preds);
void write_decisions(const std::filesystem::path& path, const PredictionSet& preds);
PredictionSet parse_predictions(const std::string& text,
                                const std::string& origin = "predictions");
PredictionSet read_predictions(const std::filesystem::path& path);
// Same layout with 0/1 entries.
LabelSet parse_labels(const std::string& text, const std::string& origin = "labels");
LabelSet read_labels(const std::filesystem::path& path);

// CSV tag,ap,positives then a macro_pr_auc=<value> footer.
std::string format_report(const EvalReport& report);

std::string format_thresholds(const ThresholdSet& t);
ThresholdSet parse_thresholds(const std::string& text,
                              const std::string& origin = "thresholds");

}  // namespace rftag::eval
