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
#include <string>
#include <vector>

#include "rftag/eval/metrics.hpp"
#include "rftag/train/data.hpp"
#include "rftag/zoo/model.hpp"

namespace rftag::eval {

struct InferenceOptions {
  std::size_t crop_frames = 512;
  train::Normalization norm;
  std::size_t batch = 16;  // windows per forward
};

// Keys a training run writes into every checkpoint's config echo.
namespace echo_key {
inline constexpr const char* kTags = "data.tags";
inline constexpr const char* kNormMean = "data.norm_mean";
inline constexpr const char* kNormStd = "data.norm_std";
inline constexpr const char* kCropFrames = "data.crop_frames";
inline constexpr const char* kValPrAuc = "val_pr_auc";
inline constexpr const char* kEpoch = "epoch";
inline constexpr const char* kKind = "kind";
}  // namespace echo_key

InferenceOptions inference_options(const zoo::ConfigEcho& echo);
std::vector<std::string> echo_tags(const zoo::ConfigEcho& echo);

// Window starts: hop crop/2 from 0, plus one window flush with the end
// when the hop grid does not reach it. Tracks no longer than the crop get
// a single (tiled) window.
std::vector<std::size_t> window_offsets(std::size_t frames, std::size_t crop);

// Track score = mean over windows of sigmoid(logits), eval mode.
PredictionSet predict(zoo::Model& model, const train::Dataset& data,
                      const InferenceOptions& options);

struct SnapshotEnsemble {
  PredictionSet predictions;
  std::vector<std::filesystem::path> members;  // best first, then SWA by epoch
  std::size_t swa_available = 0;
};

// best.ckpt plus the (up to) 4 most recent swa_epoch{E}.ckpt in `run_dir`.
std::vector<std::filesystem::path> snapshot_members(const std::filesystem::path& run_dir,
                                                    std::size_t max_swa = 4,
                                                    std::size_t* swa_available = nullptr);

SnapshotEnsemble snapshot_ensemble(const std::filesystem::path& run_dir,
                                   const train::Dataset& data, std::size_t max_swa = 4);

}  // namespace rftag::eval
