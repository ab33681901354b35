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
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rftag/autodiff/ops.hpp"
#include "rftag/rf/arch.hpp"
#include "rftag/rf/receptive_field.hpp"

namespace rftag::zoo {

struct ModelConfig {
  // "cp_resnet", "desk_resnet" or a path to an .arch file.
  std::string template_name = "desk_resnet";
  // Resolved from template_name when it has no layers.
  rf::ArchSpec base;
  std::optional<std::size_t> rho;  // nullopt keeps every slot at full size
  std::optional<std::size_t> rho_time;
  bool frequency_aware = false;
  bool shake_shake = false;
  std::size_t n_tags = 1;
  std::size_t input_bins = 256;
  std::uint64_t seed = 0;

  void validate() const;
  rf::ArchSpec resolved_base() const;
  // The template after the rho mechanism has been applied.
  rf::ArchSpec arch() const;
};

rf::ArchSpec resolve_template(const std::string& name, std::size_t input_bins);

struct ShakeDraw {
  double alpha = 0.5;
  double beta = 0.5;
  ad::Mode mode = ad::Mode::kEval;

  static ShakeDraw eval() { return {}; }
  static ShakeDraw sample(std::mt19937_64& rng);
};

template <typename T>
struct BasicModel {
  ModelConfig config;
  rf::ArchSpec arch;
  std::map<std::string, ad::Tensor<T>> params;
  std::map<std::string, ad::BatchNormState<T>> bn;
  std::mt19937_64 shake_rng;
  // Draws used by the most recent forward, one per shaken block.
  std::vector<ShakeDraw> last_draws;

  std::vector<ad::Tensor<T>> parameters() const;
  std::size_t parameter_count() const;
  std::size_t min_frames() const;
  // Output channels of the last feature map, before the head.
  std::size_t feature_channels() const;
};

using Model = BasicModel<float>;

template <typename T>
BasicModel<T> build_model(const ModelConfig& config);

// Deep copy: parameters get their own storage.
template <typename T>
BasicModel<T> clone_model(const BasicModel<T>& model);

template <typename T>
struct ForwardOptions {
  ad::Mode mode = ad::Mode::kEval;
  ad::Tape<T>* tape = nullptr;
  // Overrides the batch-norm mode only; shake follows `mode`.
  std::optional<ad::Mode> bn_mode;
  // Uses this draw for every shaken block instead of sampling.
  std::optional<ShakeDraw> shake;
  ad::BatchNormOptions bn_options{};
};

// Appends the frequency coordinate plane f/(F-1).
template <typename T>
ad::Tensor<T> fa_channel(ad::Tape<T>* tape, const ad::Tensor<T>& input);

// skip + alpha*b1 + (1-alpha)*b2 with beta / 1-beta on the way back.
template <typename T>
ad::Tensor<T> shake_block(ad::Tape<T>* tape, const ad::Tensor<T>& skip,
                          const ad::Tensor<T>& branch1,
                          const ad::Tensor<T>& branch2, const ShakeDraw& draw);

// Last feature map before global pooling, [N,C,F',T'].
template <typename T>
ad::Tensor<T> forward_features(BasicModel<T>& model, const ad::Tensor<T>& batch,
                               const ForwardOptions<T>& options = {});

// Logits [N, n_tags].
template <typename T>
ad::Tensor<T> forward(BasicModel<T>& model, const ad::Tensor<T>& batch,
                      const ForwardOptions<T>& options = {});

// Gradient connectivity of the central feature unit through the model with
// all weights made positive. Max pools route gradient to one cell, so the
// support is the union over `trials` random positive inputs.
std::size_t model_empirical_rf(const BasicModel<double>& model, rf::Axis axis,
                               std::size_t trials = 32,
                               std::uint64_t seed = 1);

// Checkpoint I/O. `extras` is echoed in the key=value block.
using ConfigEcho = std::map<std::string, std::string>;

std::string encode_checkpoint(const Model& model, const ConfigEcho& extras = {});
void save_checkpoint(const Model& model, const std::filesystem::path& path,
                     const ConfigEcho& extras = {});

struct LoadedCheckpoint {
  Model model;
  ConfigEcho echo;  // every key, model.* included
};

LoadedCheckpoint decode_checkpoint(const std::string& bytes,
                                   const std::string& origin = "checkpoint");
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

ConfigEcho config_echo(const ModelConfig& config, const rf::ArchSpec& arch);
ModelConfig config_from_echo(const ConfigEcho& echo);

}  // namespace rftag::zoo
