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

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rftag/error.hpp"
#include "rftag/zoo/model.hpp"

namespace rftag::zoo {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'R', 'F', 'C', 'K', 'P', 'T', '0', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

std::uint32_t to_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffULL) {
    throw ValidationError(std::string("checkpoint: ") + what + " too large");
  }
  return static_cast<std::uint32_t>(v);
}

void put_entry(std::string& out, const std::string& name,
               const ad::Array<float>& a) {
  put_u32(out, to_u32(name.size(), "name"));
  out += name;
  put_u32(out, to_u32(a.rank(), "rank"));
  for (std::size_t d : a.shape()) put_u32(out, to_u32(d, "extent"));
  out.append(reinterpret_cast<const char*>(a.data().data()),
             a.numel() * sizeof(float));
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& origin)
      : b_(bytes), origin_(origin) {}

  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) {
      throw ValidationError(origin_ + ": truncated checkpoint at byte " +
                            std::to_string(pos_));
    }
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, b_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::pair<std::string, ad::Array<float>> entry() {
    std::string name = str(u32());
    const std::uint32_t rank = u32();
    if (rank == 0 || rank > 8) {
      throw ValidationError(origin_ + ": entry " + name + " has rank " +
                            std::to_string(rank));
    }
    ad::Shape shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = u32();
      if (d == 0) throw ValidationError(origin_ + ": entry " + name + " has a zero extent");
      numel *= d;
    }
    need(numel * sizeof(float));
    std::vector<float> data(numel);
    std::memcpy(data.data(), b_.data() + pos_, numel * sizeof(float));
    pos_ += numel * sizeof(float);
    return {std::move(name), ad::Array<float>(shape, std::move(data))};
  }
  bool done() const { return pos_ == b_.size(); }
  const std::string& origin() const { return origin_; }

 private:
  const std::string& b_;
  std::string origin_;
  std::size_t pos_ = 0;
};

std::string join_lines(const std::string& text) {
  std::string out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (!out.empty()) out += ';';
    out += line;
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ValidationError("checkpoint: " + key + " must be a boolean, got " + v);
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long n = 0;
  try {
    n = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty()) {
    throw ValidationError("checkpoint: " + key + " must be an integer, got " + v);
  }
  return static_cast<std::size_t>(n);
}

const std::string& require(const ConfigEcho& echo, const std::string& key) {
  auto it = echo.find(key);
  if (it == echo.end()) throw ValidationError("checkpoint: missing key " + key);
  return it->second;
}

}  // namespace

ConfigEcho config_echo(const ModelConfig& config, const rf::ArchSpec& arch) {
  ConfigEcho e;
  e["model.template"] = config.template_name;
  if (config.rho) e["model.rho"] = std::to_string(*config.rho);
  if (config.rho_time) e["model.rho_time"] = std::to_string(*config.rho_time);
  e["model.frequency_aware"] = config.frequency_aware ? "true" : "false";
  e["model.shake_shake"] = config.shake_shake ? "true" : "false";
  e["model.n_tags"] = std::to_string(config.n_tags);
  e["model.input_bins"] = std::to_string(config.input_bins);
  e["model.seed"] = std::to_string(config.seed);
  e["model.arch"] = join_lines(rf::format_arch(arch));
  return e;
}

ModelConfig config_from_echo(const ConfigEcho& echo) {
  ModelConfig c;
  c.template_name = require(echo, "model.template");
  if (auto it = echo.find("model.rho"); it != echo.end()) {
    c.rho = parse_size(it->first, it->second);
  }
  if (auto it = echo.find("model.rho_time"); it != echo.end()) {
    c.rho_time = parse_size(it->first, it->second);
  }
  c.frequency_aware =
      parse_bool("model.frequency_aware", require(echo, "model.frequency_aware"));
  c.shake_shake = parse_bool("model.shake_shake", require(echo, "model.shake_shake"));
  c.n_tags = parse_size("model.n_tags", require(echo, "model.n_tags"));
  c.input_bins = parse_size("model.input_bins", require(echo, "model.input_bins"));
  c.seed = parse_size("model.seed", require(echo, "model.seed"));
  std::string arch = require(echo, "model.arch");
  for (char& ch : arch) {
    if (ch == ';') ch = '\n';
  }
  c.base = rf::parse_arch(arch);
  return c;
}

std::string encode_checkpoint(const Model& model, const ConfigEcho& extras) {
  ConfigEcho echo = config_echo(model.config, model.arch);
  for (const auto& [k, v] : extras) {
    if (echo.count(k)) throw ValidationError("checkpoint: extra key " + k + " is reserved");
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw ValidationError("checkpoint: key " + k + " is not a valid key=value line");
    }
    echo[k] = v;
  }
  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, to_u32(model.params.size(), "parameter count"));
  for (const auto& [name, t] : model.params) put_entry(out, name, t.value());
  put_u32(out, to_u32(2 * model.bn.size(), "statistic count"));
  for (const auto& [name, st] : model.bn) {
    put_entry(out, name + ".running_mean", st.running_mean);
    put_entry(out, name + ".running_var", st.running_var);
  }
  std::string text;
  for (const auto& [k, v] : echo) text += k + "=" + v + "\n";
  put_u32(out, to_u32(text.size(), "config block"));
  out += text;
  return out;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path,
                     const ConfigEcho& extras) {
  const std::string bytes = encode_checkpoint(model, extras);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw RuntimeFailure("cannot write checkpoint " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw RuntimeFailure("failed writing checkpoint " + path.string());
}

LoadedCheckpoint decode_checkpoint(const std::string& bytes,
                                   const std::string& origin) {
  Reader r(bytes, origin);
  if (r.str(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw ValidationError(origin + ": not an RFCKPT01 checkpoint");
  }
  std::map<std::string, ad::Array<float>> params;
  const std::uint32_t np = r.u32();
  for (std::uint32_t i = 0; i < np; ++i) params.insert(r.entry());
  std::map<std::string, ad::Array<float>> stats;
  const std::uint32_t ns = r.u32();
  for (std::uint32_t i = 0; i < ns; ++i) stats.insert(r.entry());
  const std::string text = r.str(r.u32());
  if (!r.done()) throw ValidationError(origin + ": trailing bytes after config block");

  ConfigEcho echo;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(origin + ": malformed config line '" + line + "'");
    }
    echo[line.substr(0, eq)] = line.substr(eq + 1);
  }

  LoadedCheckpoint out{build_model<float>(config_from_echo(echo)), {}};
  Model& m = out.model;
  if (params.size() != m.params.size()) {
    throw ValidationError(origin + ": holds " + std::to_string(params.size()) +
                          " parameters, architecture expects " +
                          std::to_string(m.params.size()));
  }
  for (auto& [name, t] : m.params) {
    auto it = params.find(name);
    if (it == params.end()) throw ValidationError(origin + ": missing parameter " + name);
    if (it->second.shape() != t.shape()) {
      throw ValidationError(origin + ": parameter " + name + " has shape " +
                            ad::shape_str(it->second.shape()) + ", expected " +
                            ad::shape_str(t.shape()));
    }
    t.mutable_value() = std::move(it->second);
  }
  if (stats.size() != 2 * m.bn.size()) {
    throw ValidationError(origin + ": batch-norm statistic count mismatch");
  }
  for (auto& [name, st] : m.bn) {
    auto mean = stats.find(name + ".running_mean");
    auto var = stats.find(name + ".running_var");
    if (mean == stats.end() || var == stats.end() ||
        mean->second.shape() != st.running_mean.shape() ||
        var->second.shape() != st.running_var.shape()) {
      throw ValidationError(origin + ": bad batch-norm statistics for " + name);
    }
    st.running_mean = std::move(mean->second);
    st.running_var = std::move(var->second);
    st.populated = true;
  }
  out.echo = std::move(echo);
  return out;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("checkpoint not found: " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return decode_checkpoint(ss.str(), path.string());
}

}  // namespace rftag::zoo
