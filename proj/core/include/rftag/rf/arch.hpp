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
#include <string_view>
#include <vector>

namespace rftag::rf {

// Per-axis pair: frequency first, time second.
struct Axes {
  std::size_t freq = 1;
  std::size_t time = 1;
  friend bool operator==(const Axes&, const Axes&) = default;
};

enum class Axis { kFreq, kTime };

inline std::size_t get(const Axes& a, Axis axis) {
  return axis == Axis::kFreq ? a.freq : a.time;
}

enum class LayerKind {
  kConv,     // convolution (+ batch norm in built models)
  kMaxPool,
  kAvgPool,
  kRelu,     // elementwise
  kEntry,    // residual block entry marker (identity)
  kExit,     // residual block exit marker (identity)
};

std::string_view kind_name(LayerKind kind);
bool is_elementwise(LayerKind kind);

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::kRelu;
  Axes kernel{1, 1};
  Axes stride{1, 1};
  Axes padding{0, 0};
  bool adjustable = false;
  // Output channels of a conv layer. 0 keeps the incoming channel count.
  std::size_t channels = 0;
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Residual edge: the output of `from` (a layer index, or nullopt for the
// network input) is added to the output of layer `to`. Layers strictly
// after `from` up to and including `to` form the block's transform branch.
struct SkipEdge {
  std::optional<std::size_t> from;
  std::size_t to = 0;
  friend bool operator==(const SkipEdge&, const SkipEdge&) = default;
};

struct ArchSpec {
  std::size_t input_bins = 256;
  // 0 when the architecture accepts any frame count.
  std::size_t input_frames = 0;
  std::size_t input_channels = 1;
  std::vector<LayerSpec> layers;
  std::vector<SkipEdge> skips;

  // Throws ValidationError on malformed layers, unknown or cyclic skips.
  void validate() const;
  std::optional<std::size_t> find(std::string_view name) const;
  // Skip edges whose destination is `layer`.
  std::vector<SkipEdge> skips_into(std::size_t layer) const;
  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

// Line-oriented text format:
//   input <bins> <frames> [channels]
//   <name> <kind> <kf>,<kt> <sf>,<st> <pf>,<pt> <adjustable 0|1> [channels]
//   skip <from>-><to>          (from may be "input")
// '#' starts a comment. Kinds: conv maxpool avgpool relu entry exit.
ArchSpec parse_arch(std::string_view text);
std::string format_arch(const ArchSpec& arch);
ArchSpec load_arch(const std::filesystem::path& path);

// Spatial extents after every layer for a given input; throws when any
// extent drops below one or a skip joins mismatched extents.
std::vector<Axes> propagate_extents(const ArchSpec& arch, Axes input);

// Smallest input extent along `axis` that the architecture accepts, with
// the other axis held at `other`.
std::size_t min_input_extent(const ArchSpec& arch, Axis axis,
                             std::size_t other);

// Output channels after every layer (conv layers with channels == 0 keep
// the incoming count).
std::vector<std::size_t> propagate_channels(const ArchSpec& arch);

struct StemConv {
  Axes kernel{3, 3};
  Axes stride{1, 1};
  std::size_t channels = 32;
};

struct StagePlan {
  std::size_t channels = 32;
  std::size_t blocks = 3;
  bool pool_first = false;
};

// A ResNet feature extractor: stem convs, then stages of residual blocks
// with two adjustable 3x3 convs each.
struct ResNetPlan {
  std::vector<StemConv> stem;
  std::vector<StagePlan> stages;
};

// Stem 3x3/2 then 3x3/1, four stages of three blocks (32, 64, 128, 256
// channels), max-pool 2x2 at the entry of the first two stages.
ResNetPlan cp_resnet_plan();

// Desk-scale variant for CPU experiments: stem 5x5/2 with 8 channels,
// three pooled stages of two blocks (8, 16, 16 channels).
ResNetPlan desk_resnet_plan();

ArchSpec build_resnet(const ResNetPlan& plan, std::size_t input_bins = 256);

}  // namespace rftag::rf
