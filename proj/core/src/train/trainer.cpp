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

#include "rftag/train/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>

#include "rftag/error.hpp"
#include "rftag/eval/inference.hpp"
#include "rftag/train/mixup.hpp"
#include "rftag/train/swa.hpp"

namespace rftag::train {

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join_tags(const std::vector<std::string>& tags) {
  std::string out;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i].find(',') != std::string::npos) {
      throw ValidationError("tag names may not contain ',': " + tags[i]);
    }
    if (i) out += ',';
    out += tags[i];
  }
  return out;
}

struct Batch {
  ad::Array<float> x;
  ad::Array<float> y;
};

Batch gather(const Dataset& data, const std::vector<std::size_t>& idx, std::size_t crop,
             std::size_t bins, std::mt19937_64* rng, CropMode mode, const Normalization& norm) {
  const std::size_t n = idx.size(), t = data.tags.size();
  Batch b{ad::Array<float>(ad::Shape{n, 1, bins, crop}), ad::Array<float>(ad::Shape{n, t})};
  const std::size_t per = bins * crop;
  for (std::size_t i = 0; i < n; ++i) {
    const Example& e = data.examples[idx[i]];
    const auto one = crop_or_pad(e.spec, crop, rng, mode);
    std::copy(one.data().begin(), one.data().end(), b.x.data().begin() + i * per);
    std::copy(e.labels.begin(), e.labels.end(), b.y.data().begin() + i * t);
  }
  normalize(b.x, norm);
  return b;
}

double validation_score(zoo::Model& model, const Dataset& val, std::size_t crop,
                        const Normalization& norm) {
  eval::InferenceOptions opt;
  opt.crop_frames = crop;
  opt.norm = norm;
  return eval::macro_pr_auc(eval::predict(model, val, opt), labels_of(val)).macro_pr_auc;
}

}  // namespace

eval::LabelSet labels_of(const Dataset& data) {
  eval::LabelSet l;
  l.tags = data.tags;
  for (const auto& e : data.examples) {
    l.ids.push_back(e.id);
    for (float v : e.labels) l.values.push_back(v != 0.0f);
  }
  return l;
}

double train_step(zoo::Model& model, ad::Adam<float>& optimizer, const ad::Array<float>& x,
                  const ad::Array<float>& y, double lr) {
  ad::Tape<float> tape;
  zoo::ForwardOptions<float> opt;
  opt.mode = ad::Mode::kTrain;
  opt.tape = &tape;
  const auto logits = zoo::forward(model, ad::Tensor<float>::constant(x), opt);
  const auto loss = ad::bce_with_logits(&tape, logits, y);
  const double value = loss.value()[0];
  if (!std::isfinite(value)) throw RuntimeFailure("non-finite training loss");
  optimizer.zero_grad();
  tape.backward(loss);
  optimizer.step(lr);
  return value;
}

void refresh_batchnorm(zoo::Model& model, const Dataset& data, std::size_t crop_frames,
                       std::size_t batch_size, const Normalization& norm) {
  if (data.empty()) throw ValidationError("batch-norm refresh needs data");
  for (auto& [name, st] : model.bn) {
    st = ad::BatchNormState<float>::empty(st.running_mean.numel());
  }
  const std::size_t crop = std::max(crop_frames, model.min_frames());
  zoo::ForwardOptions<float> opt;
  opt.bn_mode = ad::Mode::kTrain;
  opt.bn_options.momentum = std::nullopt;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(start + batch_size, data.size()); ++i) idx.push_back(i);
    Batch b = gather(data, idx, crop, model.config.input_bins, nullptr, CropMode::kCenter, norm);
    zoo::forward(model, ad::Tensor<float>::constant(std::move(b.x)), opt);
  }
}

std::string format_metrics_row(const EpochMetrics& m) {
  return std::to_string(m.epoch) + "," + g17(m.lr) + "," + g17(m.train_loss) + "," +
         g17(m.val_pr_auc) + "," + (m.is_best ? "1" : "0") + "," + (m.swa_saved ? "1" : "0");
}

RunArtifacts train(zoo::Model& model, const Dataset& train_set, const Dataset& val_set,
                   const TrainConfig& config, const std::filesystem::path& out_dir,
                   const zoo::ConfigEcho& echo, std::ostream* log) {
  config.validate();
  if (train_set.empty()) throw ValidationError("training split is empty");
  if (val_set.empty()) throw ValidationError("validation split is empty");
  if (train_set.tags != val_set.tags) {
    throw ValidationError("training and validation splits use different tag lists");
  }
  if (train_set.tags.size() != model.config.n_tags) {
    throw ValidationError("model has " + std::to_string(model.config.n_tags) +
                          " outputs for " + std::to_string(train_set.tags.size()) + " tags");
  }
  train_set.validate(model.config.input_bins);
  val_set.validate(model.config.input_bins);
  const std::size_t crop = config.crop_frames;
  if (crop < model.min_frames()) {
    throw ValidationError("crop_frames " + std::to_string(crop) +
                          " is below the model minimum of " + std::to_string(model.min_frames()));
  }

  std::filesystem::create_directories(out_dir);
  RunArtifacts art;
  art.dir = out_dir;
  art.metrics_csv = out_dir / "metrics.csv";
  art.norm = compute_normalization(train_set);

  zoo::ConfigEcho base = echo;
  base[eval::echo_key::kTags] = join_tags(train_set.tags);
  base[eval::echo_key::kNormMean] = g17(art.norm.mean);
  base[eval::echo_key::kNormStd] = g17(art.norm.std);
  base[eval::echo_key::kCropFrames] = std::to_string(crop);

  std::ofstream csv(art.metrics_csv, std::ios::trunc);
  if (!csv) throw RuntimeFailure("cannot write " + art.metrics_csv.string());
  csv << kMetricsHeader << '\n';

  std::mt19937_64 rng(config.seed);
  ad::Adam<float> optimizer(model.parameters());
  SWAState swa;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t bins = model.config.input_bins;

  for (std::size_t epoch = 0; epoch < config.total_epochs; ++epoch) {
    EpochMetrics m;
    m.epoch = epoch;
    m.lr = lr_at(epoch, config);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::vector<std::size_t> idx(order.begin() + start,
                                   order.begin() + std::min(start + config.batch_size, order.size()));
      Batch b = gather(train_set, idx, crop, bins, &rng, CropMode::kRandom, art.norm);
      if (config.mixup_alpha > 0 && idx.size() >= 2) {
        MixedBatch mixed = mixup_batch(b.x, b.y, config.mixup_alpha, rng);
        b.x = std::move(mixed.x);
        b.y = std::move(mixed.y);
      }
      try {
        loss_sum += train_step(model, optimizer, b.x, b.y, m.lr);
      } catch (const RuntimeFailure&) {
        throw RuntimeFailure("non-finite training loss at epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(batches));
      }
      ++batches;
    }
    m.train_loss = loss_sum / static_cast<double>(batches);
    m.val_pr_auc = validation_score(model, val_set, crop, art.norm);

    if (m.val_pr_auc > art.best_val) {
      m.is_best = true;
      art.best_val = m.val_pr_auc;
      art.best_epoch = epoch;
      art.best = out_dir / "best.ckpt";
      zoo::ConfigEcho e = base;
      e[eval::echo_key::kKind] = "best";
      e[eval::echo_key::kEpoch] = std::to_string(epoch);
      e[eval::echo_key::kValPrAuc] = g17(m.val_pr_auc);
      zoo::save_checkpoint(model, art.best, e);
    }

    if (is_swa_epoch(epoch, config)) {
      swa_update(swa, snapshot(model));
      zoo::Model averaged = swa_model(model, swa);
      if (config.swa_bn_refresh) {
        refresh_batchnorm(averaged, train_set, crop, config.batch_size, art.norm);
      }
      zoo::ConfigEcho e = base;
      e[eval::echo_key::kKind] = "swa";
      e[eval::echo_key::kEpoch] = std::to_string(epoch);
      e["swa_count"] = std::to_string(swa.count);
      e[eval::echo_key::kValPrAuc] = g17(validation_score(averaged, val_set, crop, art.norm));
      const auto path = out_dir / ("swa_epoch" + std::to_string(epoch) + ".ckpt");
      zoo::save_checkpoint(averaged, path, e);
      art.swa.push_back(path);
      m.swa_saved = true;
    }

    art.metrics.push_back(m);
    csv << format_metrics_row(m) << '\n';
    csv.flush();
    if (log) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "epoch %zu lr %.3g loss %.5f val_pr_auc %.4f%s%s\n",
                    epoch, m.lr, m.train_loss, m.val_pr_auc, m.is_best ? " best" : "",
                    m.swa_saved ? " swa" : "");
      *log << buf << std::flush;
    }
  }
  return art;
}

}  // namespace rftag::train
