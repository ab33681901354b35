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

#include "rftag/eval/inference.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "rftag/error.hpp"

namespace rftag::eval {

namespace {

const std::string& need(const zoo::ConfigEcho& echo, const char* key) {
  auto it = echo.find(key);
  if (it == echo.end()) {
    throw ValidationError(std::string("checkpoint lacks training metadata key ") + key);
  }
  return it->second;
}

double to_double(const std::string& s, const char* key) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) {
    throw ValidationError(std::string("checkpoint key ") + key + " is not a number: " + s);
  }
  return v;
}

}  // namespace

InferenceOptions inference_options(const zoo::ConfigEcho& echo) {
  InferenceOptions o;
  o.norm.mean = to_double(need(echo, echo_key::kNormMean), echo_key::kNormMean);
  o.norm.std = to_double(need(echo, echo_key::kNormStd), echo_key::kNormStd);
  const double crop = to_double(need(echo, echo_key::kCropFrames), echo_key::kCropFrames);
  if (crop < 1 || crop != std::floor(crop)) {
    throw ValidationError("checkpoint crop length must be a positive integer");
  }
  o.crop_frames = static_cast<std::size_t>(crop);
  return o;
}

std::vector<std::string> echo_tags(const zoo::ConfigEcho& echo) {
  std::vector<std::string> tags;
  std::istringstream is(need(echo, echo_key::kTags));
  std::string t;
  while (std::getline(is, t, ',')) tags.push_back(t);
  return tags;
}

std::vector<std::size_t> window_offsets(std::size_t frames, std::size_t crop) {
  if (crop == 0) throw ValidationError("window length must be positive");
  if (frames <= crop) return {0};
  const std::size_t hop = std::max<std::size_t>(1, crop / 2);
  std::vector<std::size_t> out;
  for (std::size_t off = 0; off + crop <= frames; off += hop) out.push_back(off);
  if (out.back() + crop < frames) out.push_back(frames - crop);
  return out;
}

PredictionSet predict(zoo::Model& model, const train::Dataset& data,
                      const InferenceOptions& options) {
  if (data.tags.size() != model.config.n_tags) {
    throw ValidationError("model predicts " + std::to_string(model.config.n_tags) +
                          " tags but the dataset has " + std::to_string(data.tags.size()));
  }
  const std::size_t crop = std::max(options.crop_frames, model.min_frames());
  const std::size_t bins = model.config.input_bins;
  const std::size_t n_tags = data.tags.size();

  struct Window {
    std::size_t track;
    std::size_t offset;
    bool tiled;
  };
  std::vector<Window> windows;
  std::vector<std::size_t> count(data.size(), 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& spec = data.examples[i].spec;
    if (spec.frames <= crop) {
      windows.push_back({i, 0, true});
    } else {
      for (std::size_t off : window_offsets(spec.frames, crop)) windows.push_back({i, off, false});
    }
  }

  PredictionSet out;
  out.tags = data.tags;
  for (const auto& e : data.examples) out.ids.push_back(e.id);
  out.scores.assign(data.size() * n_tags, 0.0);

  const std::size_t per = bins * crop;
  for (std::size_t start = 0; start < windows.size(); start += options.batch) {
    const std::size_t nb = std::min(options.batch, windows.size() - start);
    ad::Array<float> x(ad::Shape{nb, 1, bins, crop});
    for (std::size_t b = 0; b < nb; ++b) {
      const Window& w = windows[start + b];
      const auto& spec = data.examples[w.track].spec;
      ad::Array<float> one = w.tiled ? train::crop_or_pad(spec, crop, nullptr,
                                                          train::CropMode::kCenter)
                                     : train::window_at(spec, w.offset, crop);
      std::copy(one.data().begin(), one.data().end(), x.data().begin() + b * per);
    }
    train::normalize(x, options.norm);
    const auto logits = zoo::forward(model, ad::Tensor<float>::constant(std::move(x)));
    for (std::size_t b = 0; b < nb; ++b) {
      const std::size_t track = windows[start + b].track;
      ++count[track];
      for (std::size_t j = 0; j < n_tags; ++j) {
        const double z = logits.value()[b * n_tags + j];
        out.scores[track * n_tags + j] += 1.0 / (1.0 + std::exp(-z));
      }
    }
  }
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t j = 0; j < n_tags; ++j)
      out.scores[i * n_tags + j] /= static_cast<double>(count[i]);
  return out;
}

std::vector<std::filesystem::path> snapshot_members(const std::filesystem::path& run_dir,
                                                    std::size_t max_swa,
                                                    std::size_t* swa_available) {
  const auto best = run_dir / "best.ckpt";
  if (!std::filesystem::exists(best)) {
    throw ValidationError("no best-validation checkpoint at " + best.string());
  }
  std::map<std::size_t, std::filesystem::path> swa;
  if (std::filesystem::is_directory(run_dir)) {
    for (const auto& entry : std::filesystem::directory_iterator(run_dir)) {
      const std::string name = entry.path().filename().string();
      if (!name.starts_with("swa_epoch") || !name.ends_with(".ckpt")) continue;
      const std::string num = name.substr(9, name.size() - 9 - 5);
      if (num.empty() || !std::all_of(num.begin(), num.end(), ::isdigit)) continue;
      swa.emplace(std::stoull(num), entry.path());
    }
  }
  if (swa.empty()) {
    throw ValidationError("no SWA checkpoints (swa_epoch{E}.ckpt) in " + run_dir.string());
  }
  if (swa_available) *swa_available = swa.size();
  std::vector<std::filesystem::path> out{best};
  auto it = swa.begin();
  std::advance(it, swa.size() > max_swa ? swa.size() - max_swa : 0);
  for (; it != swa.end(); ++it) out.push_back(it->second);
  return out;
}

SnapshotEnsemble snapshot_ensemble(const std::filesystem::path& run_dir,
                                   const train::Dataset& data, std::size_t max_swa) {
  SnapshotEnsemble out;
  out.members = snapshot_members(run_dir, max_swa, &out.swa_available);
  std::vector<PredictionSet> sets;
  for (const auto& path : out.members) {
    auto ck = zoo::load_checkpoint(path);
    if (echo_tags(ck.echo) != data.tags) {
      throw ValidationError(path.string() + " was trained on a different tag vocabulary");
    }
    sets.push_back(predict(ck.model, data, inference_options(ck.echo)));
  }
  out.predictions = ensemble_average(sets);
  return out;
}

}  // namespace rftag::eval
