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

#include "rftag/zoo/model.hpp"

#include <cmath>

#include "rftag/error.hpp"

namespace rftag::zoo {

using ad::Array;
using ad::Mode;
using ad::Shape;
using ad::Tape;
using ad::Tensor;
using rf::LayerKind;

rf::ArchSpec resolve_template(const std::string& name, std::size_t input_bins) {
  rf::ArchSpec arch;
  if (name == "cp_resnet") {
    arch = rf::build_resnet(rf::cp_resnet_plan(), input_bins);
  } else if (name == "desk_resnet") {
    arch = rf::build_resnet(rf::desk_resnet_plan(), input_bins);
  } else {
    arch = rf::load_arch(name);
  }
  return arch;
}

void ModelConfig::validate() const {
  if (n_tags == 0) throw ValidationError("model: n_tags must be at least 1");
  if (input_bins == 0) throw ValidationError("model: input_bins must be positive");
  arch();
}

rf::ArchSpec ModelConfig::resolved_base() const {
  rf::ArchSpec b = base.layers.empty() ? resolve_template(template_name, input_bins)
                                       : base;
  if (b.input_bins != input_bins) {
    throw ValidationError("model: architecture expects " +
                          std::to_string(b.input_bins) + " bins but input_bins is " +
                          std::to_string(input_bins));
  }
  b.validate();
  return b;
}

rf::ArchSpec ModelConfig::arch() const {
  rf::RhoTemplate tmpl{resolved_base(), rho_time};
  return rf::apply_rho(tmpl, rho.value_or(tmpl.slots()));
}

ShakeDraw ShakeDraw::sample(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ShakeDraw d;
  d.alpha = u(rng);
  d.beta = u(rng);
  d.mode = Mode::kTrain;
  return d;
}

template <typename T>
std::vector<Tensor<T>> BasicModel<T>::parameters() const {
  std::vector<Tensor<T>> out;
  out.reserve(params.size());
  for (const auto& [name, t] : params) out.push_back(t);
  return out;
}

template <typename T>
std::size_t BasicModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.numel();
  return n;
}

template <typename T>
std::size_t BasicModel<T>::min_frames() const {
  return rf::min_input_extent(arch, rf::Axis::kTime, config.input_bins);
}

template <typename T>
std::size_t BasicModel<T>::feature_channels() const {
  return rf::propagate_channels(arch).back();
}

template <typename T>
Tensor<T> fa_channel(Tape<T>* tape, const Tensor<T>& input) {
  if (input.shape().size() != 4) {
    throw ValidationError("fa_channel: expected [N,C,F,T], got " +
                          ad::shape_str(input.shape()));
  }
  const std::size_t f = input.shape()[2], t = input.shape()[3];
  Array<T> plane(Shape{f, t});
  for (std::size_t y = 0; y < f; ++y) {
    const T v = f > 1 ? static_cast<T>(static_cast<double>(y) /
                                       static_cast<double>(f - 1))
                      : T{0};
    for (std::size_t x = 0; x < t; ++x) plane[y * t + x] = v;
  }
  return ad::append_channel(tape, input, plane);
}

template <typename T>
Tensor<T> shake_block(Tape<T>* tape, const Tensor<T>& skip,
                      const Tensor<T>& branch1, const Tensor<T>& branch2,
                      const ShakeDraw& draw) {
  if (branch1.shape() != branch2.shape() || branch1.shape() != skip.shape()) {
    throw ValidationError("shake_block: branch shapes " +
                          ad::shape_str(branch1.shape()) + " and " +
                          ad::shape_str(branch2.shape()) +
                          " must match the skip path " +
                          ad::shape_str(skip.shape()));
  }
  const bool eval = draw.mode == Mode::kEval;
  const T alpha = eval ? T(0.5) : static_cast<T>(draw.alpha);
  const T beta = eval ? T(0.5) : static_cast<T>(draw.beta);
  return ad::add(tape, skip, ad::mix(tape, branch1, branch2, alpha, beta));
}

namespace {

// Walks the architecture once. In init mode parameters are created on
// first use, so construction and inference share one traversal.
template <typename T>
class Runner {
 public:
  Runner(BasicModel<T>& model, const ForwardOptions<T>& options, bool init,
         std::mt19937_64* init_rng)
      : m_(model),
        o_(options),
        init_(init),
        rng_(init_rng),
        bn_mode_(options.bn_mode.value_or(options.mode)),
        shaken_(model.arch.skips.size(), false) {
    if (m_.config.shake_shake) {
      for (std::size_t s = 0; s < m_.arch.skips.size(); ++s) {
        const auto& e = m_.arch.skips[s];
        if (e.from && m_.arch.layers[*e.from].kind == LayerKind::kEntry &&
            !shake_from(*e.from)) {
          shaken_[s] = true;
        }
      }
    }
  }

  Tensor<T> features(const Tensor<T>& x) {
    input_ = x;
    std::vector<Tensor<T>> outputs(m_.arch.layers.size());
    return run(0, m_.arch.layers.size(), x, "", outputs);
  }

  Tensor<T> head(const Tensor<T>& feat) {
    Tape<T>* tape = o_.tape;
    Tensor<T> pooled = ad::pool2d(tape, feat, ad::PoolKind::kGlobalAvg);
    const std::size_t n = feat.shape()[0], c = feat.shape()[1];
    Tensor<T> flat = ad::reshape(tape, pooled, Shape{n, c});
    const Tensor<T>& w = param("head.weight", Shape{c, m_.config.n_tags}, c);
    const Tensor<T>& b = param("head.bias", Shape{m_.config.n_tags}, 0);
    return ad::linear(tape, flat, w, b);
  }

 private:
  std::optional<std::size_t> shake_from(std::size_t entry) const {
    for (std::size_t s = 0; s < m_.arch.skips.size(); ++s) {
      if (shaken_[s] && m_.arch.skips[s].from == entry) return s;
    }
    return std::nullopt;
  }

  // fan_in > 0 draws He-normal values, 0 fills with `fill`.
  const Tensor<T>& param(const std::string& name, const Shape& shape,
                         std::size_t fan_in, T fill = T{0}) {
    auto it = m_.params.find(name);
    if (it == m_.params.end()) {
      if (!init_) throw RuntimeFailure("model has no parameter " + name);
      Array<T> v(shape, fill);
      if (fan_in > 0) {
        std::normal_distribution<double> nd(
            0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
        for (T& x : v.data()) x = static_cast<T>(nd(*rng_));
      }
      it = m_.params.emplace(name, Tensor<T>::parameter(std::move(v))).first;
    } else if (it->second.shape() != shape) {
      throw ValidationError("parameter " + name + " has shape " +
                            ad::shape_str(it->second.shape()) + ", expected " +
                            ad::shape_str(shape));
    }
    return it->second;
  }

  Tensor<T> conv_bn(const std::string& name, Tensor<T> x, std::size_t cout,
                    ad::Pair k, ad::Pair s, ad::Pair p) {
    Tape<T>* tape = o_.tape;
    if (m_.config.frequency_aware) x = fa_channel(tape, x);
    const std::size_t cin = x.shape()[1];
    const Tensor<T>& w =
        param(name + ".weight", Shape{cout, cin, k[0], k[1]}, cin * k[0] * k[1]);
    Tensor<T> y = ad::conv2d(tape, x, w, Tensor<T>(), {s, p});
    const Tensor<T>& gamma = param(name + ".bn.gamma", Shape{cout}, 0, T{1});
    const Tensor<T>& beta = param(name + ".bn.beta", Shape{cout}, 0, T{0});
    auto st = m_.bn.find(name + ".bn");
    if (st == m_.bn.end()) {
      if (!init_) throw RuntimeFailure("model has no batch-norm state " + name);
      st = m_.bn.emplace(name + ".bn", ad::BatchNormState<T>::identity(cout)).first;
    }
    return ad::batchnorm2d(tape, y, gamma, beta, st->second, bn_mode_,
                           o_.bn_options);
  }

  Tensor<T> skip_path(const rf::SkipEdge& e, std::size_t skip_count,
                      const std::vector<Tensor<T>>& outputs, std::size_t cout) {
    Tensor<T> src = e.from ? outputs[*e.from] : input_;
    if (src.shape()[1] == cout) return src;
    std::string name = m_.arch.layers[e.to].name + ".proj";
    if (skip_count > 1) {
      name += "." + (e.from ? m_.arch.layers[*e.from].name : std::string("input"));
    }
    return conv_bn(name, src, cout, {1, 1}, {1, 1}, {0, 0});
  }

  ShakeDraw next_draw() {
    if (o_.shake) return *o_.shake;
    if (o_.mode == Mode::kEval) return ShakeDraw::eval();
    return ShakeDraw::sample(m_.shake_rng);
  }

  Tensor<T> run(std::size_t begin, std::size_t end, Tensor<T> cur,
                const std::string& suffix, std::vector<Tensor<T>> outputs) {
    Tape<T>* tape = o_.tape;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& l = m_.arch.layers[i];
      const ad::Pair k{l.kernel.freq, l.kernel.time};
      const ad::Pair s{l.stride.freq, l.stride.time};
      const ad::Pair p{l.padding.freq, l.padding.time};
      switch (l.kind) {
        case LayerKind::kConv:
          cur = conv_bn(l.name + suffix, cur,
                        l.channels ? l.channels : cur.shape()[1], k, s, p);
          break;
        case LayerKind::kMaxPool:
          cur = ad::pool2d(tape, cur, ad::PoolKind::kMax, {k, s, p});
          break;
        case LayerKind::kAvgPool:
          cur = ad::pool2d(tape, cur, ad::PoolKind::kAvg, {k, s, p});
          break;
        case LayerKind::kRelu:
          cur = ad::relu(tape, cur);
          break;
        case LayerKind::kEntry:
        case LayerKind::kExit:
          break;
      }
      const auto into = m_.arch.skips_into(i);
      for (std::size_t si = 0; si < m_.arch.skips.size(); ++si) {
        const auto& e = m_.arch.skips[si];
        if (e.to != i || shaken_[si]) continue;
        cur = ad::add(tape, cur, skip_path(e, into.size(), outputs, cur.shape()[1]));
      }
      outputs[i] = cur;

      if (auto s_idx = shake_from(i)) {
        const auto& e = m_.arch.skips[*s_idx];
        Tensor<T> b1 = run(i + 1, e.to + 1, cur, suffix, outputs);
        Tensor<T> b2 = run(i + 1, e.to + 1, cur, suffix + ".s2", outputs);
        const ShakeDraw draw = next_draw();
        m_.last_draws.push_back(draw);
        Tensor<T> sk = skip_path(e, m_.arch.skips_into(e.to).size(), outputs,
                                 b1.shape()[1]);
        // Other skips into the exit were added inside both branches; the
        // convex mix passes them through unchanged.
        cur = shake_block(tape, sk, b1, b2, draw);
        outputs[e.to] = cur;
        i = e.to;
      }
    }
    return cur;
  }

  BasicModel<T>& m_;
  const ForwardOptions<T>& o_;
  bool init_;
  std::mt19937_64* rng_;
  Mode bn_mode_;
  std::vector<bool> shaken_;
  Tensor<T> input_;
};

template <typename T>
void check_batch(const BasicModel<T>& m, const Tensor<T>& batch,
                 bool check_bins) {
  const Shape& s = batch.shape();
  if (s.size() != 4) {
    throw ValidationError("model input must be [N,C,F,T], got " +
                          ad::shape_str(s));
  }
  if (s[1] != m.arch.input_channels) {
    throw ValidationError("model input has " + std::to_string(s[1]) +
                          " channels, expected " +
                          std::to_string(m.arch.input_channels));
  }
  if (check_bins && s[2] != m.config.input_bins) {
    throw ValidationError("model input has " + std::to_string(s[2]) +
                          " frequency bins, expected " +
                          std::to_string(m.config.input_bins));
  }
  const std::size_t min_t = check_bins ? m.min_frames()
                                       : rf::min_input_extent(m.arch, rf::Axis::kTime, s[2]);
  if (s[3] < min_t) {
    throw ValidationError("model input has " + std::to_string(s[3]) +
                          " frames but the architecture needs at least " +
                          std::to_string(min_t));
  }
}

template <typename T>
Tensor<T> run_features(BasicModel<T>& model, const Tensor<T>& batch,
                       const ForwardOptions<T>& options, bool check_bins) {
  check_batch(model, batch, check_bins);
  model.last_draws.clear();
  Runner<T> r(model, options, false, nullptr);
  return r.features(batch);
}

}  // namespace

template <typename T>
BasicModel<T> build_model(const ModelConfig& config) {
  config.validate();
  BasicModel<T> m;
  m.config = config;
  m.arch = config.arch();
  m.shake_rng.seed(config.seed ^ 0x5eedc0ffee5eedULL);
  std::mt19937_64 init_rng(config.seed);
  const std::size_t frames = m.min_frames();
  ForwardOptions<T> opt;
  Runner<T> r(m, opt, true, &init_rng);
  Tensor<T> probe(Array<T>(
      Shape{1, m.arch.input_channels, config.input_bins, frames}, T{0}));
  r.head(r.features(probe));
  m.last_draws.clear();
  return m;
}

template <typename T>
BasicModel<T> clone_model(const BasicModel<T>& model) {
  BasicModel<T> out;
  out.config = model.config;
  out.arch = model.arch;
  out.bn = model.bn;
  out.shake_rng = model.shake_rng;
  for (const auto& [name, t] : model.params) {
    out.params.emplace(name, Tensor<T>(t.value(), t.requires_grad()));
  }
  return out;
}

template <typename T>
Tensor<T> forward_features(BasicModel<T>& model, const Tensor<T>& batch,
                           const ForwardOptions<T>& options) {
  return run_features(model, batch, options, true);
}

template <typename T>
Tensor<T> forward(BasicModel<T>& model, const Tensor<T>& batch,
                  const ForwardOptions<T>& options) {
  Tensor<T> feat = run_features(model, batch, options, true);
  Runner<T> r(model, options, false, nullptr);
  return r.head(feat);
}

std::size_t model_empirical_rf(const BasicModel<double>& model, rf::Axis axis,
                               std::size_t trials, std::uint64_t seed) {
  BasicModel<double> m;
  m.config = model.config;
  m.arch = model.arch;
  for (const auto& [name, t] : model.params) {
    Array<double> v = t.value();
    if (name.ends_with(".weight")) {
      const std::size_t fan = v.numel() / v.dim(0);
      v.fill(1.0 / static_cast<double>(fan));
      // The coordinate plane does not depend on the input, so it adds no
      // support; left positive it would steer every max pool the same way.
      if (m.config.frequency_aware && v.rank() == 4) {
        for (std::size_t o = 0; o < v.dim(0); ++o)
          for (std::size_t y = 0; y < v.dim(2); ++y)
            for (std::size_t x = 0; x < v.dim(3); ++x) v.at(o, v.dim(1) - 1, y, x) = 0.0;
      }
    } else if (name.ends_with(".gamma")) {
      v.fill(1.0);
    } else {
      v.fill(0.0);
    }
    m.params.emplace(name, Tensor<double>::constant(std::move(v)));
  }
  for (const auto& [name, st] : model.bn) {
    m.bn.emplace(name, ad::BatchNormState<double>::identity(st.running_mean.numel()));
  }

  const rf::RFReport analytic = rf::compute_rf(m.arch);
  const std::size_t r = analytic.rf(axis);
  const auto& last = analytic.layers.back();
  const std::size_t jump = axis == rf::Axis::kFreq ? last.freq.jump : last.time.jump;
  const std::size_t len = 4 * r + 4 * jump + 8;
  const rf::Axis other_axis = axis == rf::Axis::kFreq ? rf::Axis::kTime : rf::Axis::kFreq;
  const std::size_t other = rf::min_input_extent(m.arch, other_axis, len);
  const rf::Axes in = axis == rf::Axis::kFreq ? rf::Axes{len, other}
                                              : rf::Axes{other, len};

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::vector<bool> hit(len, false);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    Tape<double> tape;
    Array<double> x(Shape{1, m.arch.input_channels, in.freq, in.time});
    for (double& v : x.data()) v = u(rng);
    Tensor<double> input = Tensor<double>::parameter(std::move(x));
    ForwardOptions<double> opt;
    opt.tape = &tape;
    Tensor<double> feat = run_features(m, input, opt, false);
    const Shape& fs = feat.shape();
    Array<double> mask(fs, 0.0);
    for (std::size_t c = 0; c < fs[1]; ++c) mask.at(0, c, fs[2] / 2, fs[3] / 2) = 1.0;
    tape.backward(ad::sum(&tape, ad::mul(&tape, feat, Tensor<double>::constant(mask))));
    std::size_t first = 0, lastp = 0;
    if (rf::support_extent(input.grad(), axis, &first, &lastp) == 0) continue;
    const Array<double>& g = input.grad();
    for (std::size_t y = 0; y < g.dim(2); ++y)
      for (std::size_t xx = 0; xx < g.dim(3); ++xx)
        for (std::size_t c = 0; c < g.dim(1); ++c)
          if (g.at(0, c, y, xx) != 0.0) hit[axis == rf::Axis::kFreq ? y : xx] = true;
  }
  const auto lo = std::find(hit.begin(), hit.end(), true);
  if (lo == hit.end()) throw RuntimeFailure("model has no gradient path to its input");
  const auto hi = std::find(hit.rbegin(), hit.rend(), true);
  const std::size_t lo_i = static_cast<std::size_t>(lo - hit.begin());
  const std::size_t hi_i = len - 1 - static_cast<std::size_t>(hi - hit.rbegin());
  if (lo_i == 0 || hi_i + 1 == len) {
    throw RuntimeFailure("receptive field support reached the input border");
  }
  return hi_i - lo_i + 1;
}

#define RFTAG_INSTANTIATE_MODEL(T)                                             \
  template struct BasicModel<T>;                                               \
  template BasicModel<T> build_model<T>(const ModelConfig&);                   \
  template BasicModel<T> clone_model(const BasicModel<T>&);                    \
  template Tensor<T> fa_channel(Tape<T>*, const Tensor<T>&);                   \
  template Tensor<T> shake_block(Tape<T>*, const Tensor<T>&, const Tensor<T>&, \
                                 const Tensor<T>&, const ShakeDraw&);          \
  template Tensor<T> forward_features(BasicModel<T>&, const Tensor<T>&,        \
                                      const ForwardOptions<T>&);               \
  template Tensor<T> forward(BasicModel<T>&, const Tensor<T>&,                 \
                             const ForwardOptions<T>&);

RFTAG_INSTANTIATE_MODEL(float)
RFTAG_INSTANTIATE_MODEL(double)

}  // namespace rftag::zoo
