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

#include "rftag/rf/arch.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "rftag/error.hpp"

namespace rftag::rf {

namespace {

struct KindName {
  LayerKind kind;
  std::string_view name;
};

constexpr KindName kKinds[] = {
    {LayerKind::kConv, "conv"},   {LayerKind::kMaxPool, "maxpool"},
    {LayerKind::kAvgPool, "avgpool"}, {LayerKind::kRelu, "relu"},
    {LayerKind::kEntry, "entry"}, {LayerKind::kExit, "exit"},
};

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream is{std::string(line)};
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::size_t parse_uint(std::string_view s, std::size_t line_no) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ValidationError("arch line " + std::to_string(line_no) +
                          ": expected an unsigned integer, got '" +
                          std::string(s) + "'");
  }
  return v;
}

Axes parse_axes(std::string_view s, std::size_t line_no) {
  const auto comma = s.find(',');
  if (comma == std::string_view::npos) {
    throw ValidationError("arch line " + std::to_string(line_no) +
                          ": expected <freq>,<time>, got '" + std::string(s) +
                          "'");
  }
  return {parse_uint(s.substr(0, comma), line_no),
          parse_uint(s.substr(comma + 1), line_no)};
}

std::size_t out_extent(std::size_t in, std::size_t k, std::size_t s,
                       std::size_t p) {
  if (k > in + 2 * p) return 0;
  return (in + 2 * p - k) / s + 1;
}

}  // namespace

std::string_view kind_name(LayerKind kind) {
  for (const auto& k : kKinds) {
    if (k.kind == kind) return k.name;
  }
  return "?";
}

bool is_elementwise(LayerKind kind) {
  return kind == LayerKind::kRelu || kind == LayerKind::kEntry ||
         kind == LayerKind::kExit;
}

std::optional<std::size_t> ArchSpec::find(std::string_view name) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].name == name) return i;
  }
  return std::nullopt;
}

std::vector<SkipEdge> ArchSpec::skips_into(std::size_t layer) const {
  std::vector<SkipEdge> out;
  for (const auto& s : skips) {
    if (s.to == layer) out.push_back(s);
  }
  return out;
}

void ArchSpec::validate() const {
  if (layers.empty()) throw ValidationError("architecture has no layers");
  if (input_bins == 0 || input_channels == 0) {
    throw ValidationError("architecture input extents must be positive");
  }
  std::set<std::string> names;
  for (const auto& l : layers) {
    if (l.name.empty() || l.name == "input" || l.name == "skip") {
      throw ValidationError("invalid layer name '" + l.name + "'");
    }
    if (!names.insert(l.name).second) {
      throw ValidationError("duplicate layer name '" + l.name + "'");
    }
    if (l.kernel.freq == 0 || l.kernel.time == 0 || l.stride.freq == 0 ||
        l.stride.time == 0) {
      throw ValidationError("layer '" + l.name +
                            "': kernel and stride must be >= 1");
    }
    if (is_elementwise(l.kind) &&
        (l.kernel != Axes{1, 1} || l.stride != Axes{1, 1} ||
         l.padding != Axes{0, 0})) {
      throw ValidationError("layer '" + l.name +
                            "': elementwise layers need kernel=stride=1, "
                            "padding 0");
    }
    if (l.adjustable && l.kind != LayerKind::kConv) {
      throw ValidationError("layer '" + l.name +
                            "': only conv layers can be adjustable");
    }
  }
  for (const auto& s : skips) {
    if (s.to >= layers.size()) {
      throw ValidationError("skip edge targets a missing layer");
    }
    if (s.from && *s.from >= s.to) {
      throw ValidationError("skip " + layers[*s.from].name + "->" +
                            layers[s.to].name +
                            " points backwards: the graph would be cyclic");
    }
  }
}

ArchSpec parse_arch(std::string_view text) {
  ArchSpec arch;
  std::vector<std::pair<std::string, std::string>> pending_skips;
  std::vector<std::size_t> skip_lines;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) {
      raw.resize(hash);
    }
    const auto tok = split_ws(raw);
    if (tok.empty()) continue;
    const std::string where = "arch line " + std::to_string(line_no);
    if (tok[0] == "input") {
      if (tok.size() < 3 || tok.size() > 4) {
        throw ValidationError(where + ": expected 'input <bins> <frames> [channels]'");
      }
      arch.input_bins = parse_uint(tok[1], line_no);
      arch.input_frames = parse_uint(tok[2], line_no);
      if (tok.size() == 4) arch.input_channels = parse_uint(tok[3], line_no);
      continue;
    }
    if (tok[0] == "skip") {
      const auto arrow = tok.size() == 2 ? tok[1].find("->") : std::string::npos;
      if (arrow == std::string::npos) {
        throw ValidationError(where + ": expected 'skip <from>-><to>'");
      }
      pending_skips.emplace_back(tok[1].substr(0, arrow), tok[1].substr(arrow + 2));
      skip_lines.push_back(line_no);
      continue;
    }
    LayerSpec layer;
    layer.name = tok[0];
    if (tok.size() < 2) throw ValidationError(where + ": missing layer kind");
    const auto kind = std::find_if(std::begin(kKinds), std::end(kKinds),
                                   [&](const KindName& k) { return k.name == tok[1]; });
    if (kind == std::end(kKinds)) {
      throw ValidationError(where + ": unknown layer kind '" + tok[1] + "'");
    }
    layer.kind = kind->kind;
    if (tok.size() == 2 && is_elementwise(layer.kind)) {
      arch.layers.push_back(layer);
      continue;
    }
    if (tok.size() != 6 && tok.size() != 7) {
      throw ValidationError(where +
                            ": expected '<name> <kind> kf,kt sf,st pf,pt "
                            "<adjustable> [channels]'");
    }
    layer.kernel = parse_axes(tok[2], line_no);
    layer.stride = parse_axes(tok[3], line_no);
    layer.padding = parse_axes(tok[4], line_no);
    const std::size_t adj = parse_uint(tok[5], line_no);
    if (adj > 1) throw ValidationError(where + ": adjustable must be 0 or 1");
    layer.adjustable = adj == 1;
    if (tok.size() == 7) layer.channels = parse_uint(tok[6], line_no);
    arch.layers.push_back(layer);
  }
  for (std::size_t i = 0; i < pending_skips.size(); ++i) {
    const auto& [from, to] = pending_skips[i];
    const std::string where = "arch line " + std::to_string(skip_lines[i]);
    SkipEdge edge;
    if (from != "input") {
      const auto idx = arch.find(from);
      if (!idx) throw ValidationError(where + ": unknown skip source '" + from + "'");
      edge.from = *idx;
    }
    const auto dst = arch.find(to);
    if (!dst) throw ValidationError(where + ": unknown skip target '" + to + "'");
    edge.to = *dst;
    arch.skips.push_back(edge);
  }
  arch.validate();
  return arch;
}

std::string format_arch(const ArchSpec& arch) {
  std::ostringstream os;
  os << "input " << arch.input_bins << ' ' << arch.input_frames << ' '
     << arch.input_channels << '\n';
  for (const auto& l : arch.layers) {
    os << l.name << ' ' << kind_name(l.kind) << ' ' << l.kernel.freq << ','
       << l.kernel.time << ' ' << l.stride.freq << ',' << l.stride.time << ' '
       << l.padding.freq << ',' << l.padding.time << ' '
       << (l.adjustable ? 1 : 0);
    if (l.channels) os << ' ' << l.channels;
    os << '\n';
  }
  for (const auto& s : arch.skips) {
    os << "skip " << (s.from ? arch.layers[*s.from].name : "input") << "->"
       << arch.layers[s.to].name << '\n';
  }
  return os.str();
}

ArchSpec load_arch(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open architecture file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_arch(ss.str());
}

std::vector<Axes> propagate_extents(const ArchSpec& arch, Axes input) {
  std::vector<Axes> out(arch.layers.size());
  Axes cur = input;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& l = arch.layers[i];
    cur = {out_extent(cur.freq, l.kernel.freq, l.stride.freq, l.padding.freq),
           out_extent(cur.time, l.kernel.time, l.stride.time, l.padding.time)};
    if (cur.freq == 0 || cur.time == 0) {
      throw ValidationError("input " + std::to_string(input.freq) + "x" +
                            std::to_string(input.time) +
                            " is too small: layer '" + l.name +
                            "' has no output");
    }
    for (const auto& s : arch.skips_into(i)) {
      const Axes src = s.from ? out[*s.from] : input;
      if (src != cur) {
        throw ValidationError(
            "skip into '" + l.name + "' joins extents " +
            std::to_string(src.freq) + "x" + std::to_string(src.time) +
            " and " + std::to_string(cur.freq) + "x" + std::to_string(cur.time));
      }
    }
    out[i] = cur;
  }
  return out;
}

std::size_t min_input_extent(const ArchSpec& arch, Axis axis,
                             std::size_t other) {
  constexpr std::size_t kLimit = 1 << 16;
  for (std::size_t n = 1; n <= kLimit; ++n) {
    const Axes in = axis == Axis::kFreq ? Axes{n, other} : Axes{other, n};
    try {
      propagate_extents(arch, in);
      return n;
    } catch (const ValidationError&) {
    }
  }
  throw ValidationError("architecture accepts no input extent up to " +
                        std::to_string(kLimit));
}

std::vector<std::size_t> propagate_channels(const ArchSpec& arch) {
  std::vector<std::size_t> out(arch.layers.size());
  std::size_t cur = arch.input_channels;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& l = arch.layers[i];
    if (l.kind == LayerKind::kConv && l.channels) cur = l.channels;
    out[i] = cur;
  }
  return out;
}

ResNetPlan cp_resnet_plan() {
  ResNetPlan p;
  p.stem = {{{3, 3}, {2, 2}, 32}, {{3, 3}, {1, 1}, 32}};
  p.stages = {{32, 3, true}, {64, 3, true}, {128, 3, false}, {256, 3, false}};
  return p;
}

ResNetPlan desk_resnet_plan() {
  ResNetPlan p;
  p.stem = {{{5, 5}, {2, 2}, 8}};
  p.stages = {{8, 2, true}, {16, 2, true}, {16, 2, true}};
  return p;
}

ArchSpec build_resnet(const ResNetPlan& plan, std::size_t input_bins) {
  ArchSpec arch;
  arch.input_bins = input_bins;
  auto add = [&](LayerSpec l) {
    arch.layers.push_back(std::move(l));
    return arch.layers.size() - 1;
  };
  for (std::size_t i = 0; i < plan.stem.size(); ++i) {
    const auto& s = plan.stem[i];
    const std::string name = "stem" + std::to_string(i + 1);
    add({name, LayerKind::kConv, s.kernel, s.stride,
         {(s.kernel.freq - 1) / 2, (s.kernel.time - 1) / 2}, false,
         s.channels});
    add({name + ".relu", LayerKind::kRelu});
  }
  for (std::size_t si = 0; si < plan.stages.size(); ++si) {
    const auto& st = plan.stages[si];
    const std::string stage = "s" + std::to_string(si + 1);
    if (st.pool_first) {
      add({stage + ".pool", LayerKind::kMaxPool, {2, 2}, {2, 2}, {0, 0}});
    }
    for (std::size_t b = 0; b < st.blocks; ++b) {
      const std::string blk = stage + "b" + std::to_string(b + 1);
      const std::size_t entry = add({blk + ".in", LayerKind::kEntry});
      add({blk + ".c1", LayerKind::kConv, {3, 3}, {1, 1}, {1, 1}, true,
           st.channels});
      add({blk + ".r1", LayerKind::kRelu});
      add({blk + ".c2", LayerKind::kConv, {3, 3}, {1, 1}, {1, 1}, true,
           st.channels});
      const std::size_t exit = add({blk + ".out", LayerKind::kExit});
      arch.skips.push_back({entry, exit});
      add({blk + ".relu", LayerKind::kRelu});
    }
  }
  arch.validate();
  return arch;
}

}  // namespace rftag::rf
