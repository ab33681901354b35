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

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "rftag/autodiff/ops.hpp"
#include "rftag/dsp/spectrogram.hpp"
#include "rftag/eval/metrics.hpp"

using namespace rftag;

namespace {

ad::Array<float> random_array(ad::Shape shape, std::uint64_t seed) {
  ad::Array<float> a(shape);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd(0, 1);
  for (float& v : a.data()) v = nd(rng);
  return a;
}

// Args: channels, frequency bins, frames. 3x3 same-padding conv, batch 8.
void BM_Conv2dForwardBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto f = static_cast<std::size_t>(state.range(1));
  const auto t = static_cast<std::size_t>(state.range(2));
  auto x = ad::Tensor<float>::parameter(random_array({8, c, f, t}, 1));
  auto w = ad::Tensor<float>::parameter(random_array({c, c, 3, 3}, 2));
  for (auto _ : state) {
    ad::Tape<float> tape;
    auto y = ad::conv2d(&tape, x, w, ad::Tensor<float>{}, {{1, 1}, {1, 1}});
    auto loss = ad::sum(&tape, y);
    tape.backward(loss);
    benchmark::DoNotOptimize(w.grad());
  }
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_Conv2dForwardBackward)->Args({8, 64, 64})->Args({16, 32, 32})->Unit(benchmark::kMillisecond);

void BM_Conv2dForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  auto x = ad::Tensor<float>::constant(random_array({8, c, 64, 64}, 1));
  auto w = ad::Tensor<float>::constant(random_array({c, c, 3, 3}, 2));
  for (auto _ : state) {
    auto y = ad::conv2d<float>(nullptr, x, w, ad::Tensor<float>{}, {{1, 1}, {1, 1}});
    benchmark::DoNotOptimize(y.value().data().data());
  }
}
BENCHMARK(BM_Conv2dForward)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

// Seconds of audio at 44.1 kHz.
void BM_LogMel(benchmark::State& state) {
  dsp::AudioClip clip;
  clip.samples.resize(static_cast<std::size_t>(state.range(0) * 44100));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0, 0.1);
  for (double& s : clip.samples) s = nd(rng);
  const auto bank = dsp::mel_filterbank();
  for (auto _ : state) {
    auto spec = dsp::logmel(clip, dsp::kHop75, bank);
    benchmark::DoNotOptimize(spec);
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(clip.samples.size() * sizeof(double)));
}
BENCHMARK(BM_LogMel)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_StftPower(benchmark::State& state) {
  dsp::AudioClip clip;
  clip.samples.resize(10 * 44100);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0, 0.1);
  for (double& s : clip.samples) s = nd(rng);
  for (auto _ : state) {
    auto p = dsp::stft_power(clip, dsp::kHop75);
    benchmark::DoNotOptimize(p.values.data());
  }
}
BENCHMARK(BM_StftPower)->Unit(benchmark::kMillisecond);

// Tracks per tag; 56 tags like the full tag set.
void BM_MacroPrAuc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  constexpr std::size_t kTags = 56;
  eval::PredictionSet p;
  eval::LabelSet l;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t i = 0; i < n; ++i) {
    p.ids.push_back("t" + std::to_string(i));
  }
  l.ids = p.ids;
  for (std::size_t k = 0; k < kTags; ++k) p.tags.push_back("tag" + std::to_string(k));
  l.tags = p.tags;
  for (std::size_t i = 0; i < n * kTags; ++i) {
    const bool pos = u(rng) < 0.1 || i % n == 0;
    l.values.push_back(pos);
    p.scores.push_back(std::min(1.0, u(rng) * 0.7 + (pos ? 0.3 : 0.0)));
  }
  for (auto _ : state) {
    auto r = eval::macro_pr_auc(p, l);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_MacroPrAuc)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
