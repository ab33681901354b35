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
#include <iosfwd>
#include <string>
#include <vector>

#include "rftag/autodiff/adam.hpp"
#include "rftag/eval/metrics.hpp"
#include "rftag/train/data.hpp"
#include "rftag/train/schedule.hpp"
#include "rftag/zoo/model.hpp"

namespace rftag::train {

struct EpochMetrics {
  std::size_t epoch = 0;
  double lr = 0;
  double train_loss = 0;
  double val_pr_auc = 0;
  bool is_best = false;
  bool swa_saved = false;
};

struct RunArtifacts {
  std::filesystem::path dir;
  std::filesystem::path best;
  double best_val = -1;
  std::size_t best_epoch = 0;
  std::vector<std::filesystem::path> swa;  // in absorption order
  std::vector<EpochMetrics> metrics;
  std::filesystem::path metrics_csv;
  Normalization norm;
};

eval::LabelSet labels_of(const Dataset& data);

// One optimizer step on a prepared batch; returns the pre-update loss.
// Throws RuntimeFailure on a non-finite loss.
double train_step(zoo::Model& model, ad::Adam<float>& optimizer,
                  const ad::Array<float>& x, const ad::Array<float>& y, double lr);

// Recomputes every batch-norm running statistic from scratch as an equal
// weight average over one pass of center crops of `data`.
void refresh_batchnorm(zoo::Model& model, const Dataset& data, std::size_t crop_frames,
                       std::size_t batch_size, const Normalization& norm);

// Writes metrics.csv, best.ckpt and swa_epoch{E}.ckpt into `out_dir`.
// `echo` is merged into every checkpoint's key=value block.
RunArtifacts train(zoo::Model& model, const Dataset& train_set, const Dataset& val_set,
                   const TrainConfig& config, const std::filesystem::path& out_dir,
                   const zoo::ConfigEcho& echo = {}, std::ostream* log = nullptr);

std::string format_metrics_row(const EpochMetrics& m);
inline constexpr const char* kMetricsHeader = "epoch,lr,train_loss,val_pr_auc,is_best,swa_saved";

}  // namespace rftag::train
