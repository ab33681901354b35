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

#include "rftag/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "rftag/error.hpp"

namespace rftag::ad {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

void require_rank(const Shape& s, std::size_t rank, const char* op,
                  const char* what) {
  if (s.size() != rank) {
    throw ValidationError(std::string(op) + ": " + what + " must have rank " +
                          std::to_string(rank) + ", got " + shape_str(s));
  }
}

void require_same(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw ValidationError(std::string(op) + ": shape mismatch " +
                          shape_str(a) + " vs " + shape_str(b));
  }
}

std::size_t out_extent(std::size_t in, std::size_t k, std::size_t s,
                       std::size_t p, const char* op) {
  if (s == 0) throw ValidationError(std::string(op) + ": stride must be >= 1");
  if (k == 0 || k > in + 2 * p) {
    throw ValidationError(std::string(op) + ": kernel " + std::to_string(k) +
                          " exceeds padded extent " +
                          std::to_string(in + 2 * p));
  }
  return (in + 2 * p - k) / s + 1;
}

struct ConvGeometry {
  std::size_t c, h, w, kh, kw, sh, sw, ph, pw, oh, ow;
  std::size_t rows() const { return c * kh * kw; }
  std::size_t cols() const { return oh * ow; }
};

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
  const std::size_t cols = g.cols();
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        T* row = col + ((c * g.kh + i) * g.kw + j) * cols;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * g.sh + i) -
                                   static_cast<std::ptrdiff_t>(g.ph);
          T* dst = row + oy * g.ow;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill(dst, dst + g.ow, T{0});
            continue;
          }
          const T* src = x + (c * g.h + static_cast<std::size_t>(y)) * g.w;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t xx =
                static_cast<std::ptrdiff_t>(ox * g.sw + j) -
                static_cast<std::ptrdiff_t>(g.pw);
            dst[ox] = (xx < 0 || xx >= static_cast<std::ptrdiff_t>(g.w))
                          ? T{0}
                          : src[xx];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* x) {
  const std::size_t cols = g.cols();
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const T* row = col + ((c * g.kh + i) * g.kw + j) * cols;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * g.sh + i) -
                                   static_cast<std::ptrdiff_t>(g.ph);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.h)) continue;
          T* dst = x + (c * g.h + static_cast<std::size_t>(y)) * g.w;
          const T* src = row + oy * g.ow;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t xx =
                static_cast<std::ptrdiff_t>(ox * g.sw + j) -
                static_cast<std::ptrdiff_t>(g.pw);
            if (xx >= 0 && xx < static_cast<std::ptrdiff_t>(g.w)) {
              dst[xx] += src[ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// conv2d

template <typename T>
Tensor<T> conv2d(Tape<T>* tape, const Tensor<T>& input,
                 const Tensor<T>& weight, const Tensor<T>& bias,
                 Conv2dParams params) {
  require_rank(input.shape(), 4, "conv2d", "input");
  require_rank(weight.shape(), 4, "conv2d", "weight");
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  if (xs[1] != ws[1]) {
    throw ValidationError("conv2d: input " + shape_str(xs) + " has " +
                          std::to_string(xs[1]) + " channels but weight " +
                          shape_str(ws) + " expects " + std::to_string(ws[1]));
  }
  const std::size_t n = xs[0];
  const std::size_t o = ws[0];
  if (bias.defined() && bias.shape() != Shape{o}) {
    throw ValidationError("conv2d: bias " + shape_str(bias.shape()) +
                          " does not match weight " + shape_str(ws));
  }
  ConvGeometry g{};
  g.c = xs[1];
  g.h = xs[2];
  g.w = xs[3];
  g.kh = ws[2];
  g.kw = ws[3];
  g.sh = params.stride[0];
  g.sw = params.stride[1];
  g.ph = params.padding[0];
  g.pw = params.padding[1];
  g.oh = out_extent(g.h, g.kh, g.sh, g.ph, "conv2d");
  g.ow = out_extent(g.w, g.kw, g.sw, g.pw, "conv2d");

  const std::size_t k = g.rows();
  const std::size_t p = g.cols();
  Array<T> out(Shape{n, o, g.oh, g.ow});
  std::vector<T> col(k * p);
  ConstMatMap<T> wmat(weight.value().data().data(), o, k);
  const std::size_t in_stride = g.c * g.h * g.w;
  for (std::size_t b = 0; b < n; ++b) {
    im2col(input.value().data().data() + b * in_stride, g, col.data());
    MatMap<T> omat(out.data().data() + b * o * p, o, p);
    omat.noalias() = wmat * ConstMatMap<T>(col.data(), k, p);
    if (bias.defined()) {
      for (std::size_t oc = 0; oc < o; ++oc) {
        omat.row(oc).array() += bias.value()[oc];
      }
    }
  }

  return Tape<T>::record(
      tape, "conv2d", std::move(out), {&input, &weight, &bias},
      [input, weight, bias, g, n, o](const Array<T>& gout) {
        const std::size_t k = g.rows();
        const std::size_t p = g.cols();
        const std::size_t in_stride = g.c * g.h * g.w;
        std::vector<T> col(k * p);
        std::vector<T> dcol(k * p);
        ConstMatMap<T> wmat(weight.value().data().data(), o, k);
        Array<T> dx;
        if (input.requires_grad()) dx = Array<T>(input.shape());
        Array<T> dw;
        if (weight.requires_grad()) dw = Array<T>(weight.shape());
        for (std::size_t b = 0; b < n; ++b) {
          ConstMatMap<T> gmat(gout.data().data() + b * o * p, o, p);
          if (weight.requires_grad()) {
            im2col(input.value().data().data() + b * in_stride, g, col.data());
            MatMap<T>(dw.data().data(), o, k).noalias() +=
                gmat * ConstMatMap<T>(col.data(), k, p).transpose();
          }
          if (input.requires_grad()) {
            MatMap<T>(dcol.data(), k, p).noalias() = wmat.transpose() * gmat;
            col2im_add(dcol.data(), g, dx.data().data() + b * in_stride);
          }
        }
        if (input.requires_grad()) input.accumulate_grad(dx);
        if (weight.requires_grad()) weight.accumulate_grad(dw);
        if (bias.requires_grad()) {
          Array<T> db(Shape{o});
          for (std::size_t b = 0; b < n; ++b) {
            for (std::size_t oc = 0; oc < o; ++oc) {
              const T* row = gout.data().data() + (b * o + oc) * p;
              T acc{0};
              for (std::size_t i = 0; i < p; ++i) acc += row[i];
              db[oc] += acc;
            }
          }
          bias.accumulate_grad(db);
        }
      });
}

// ---------------------------------------------------------------------------
// batchnorm2d

template <typename T>
BatchNormState<T> BatchNormState<T>::empty(std::size_t channels) {
  BatchNormState s;
  s.running_mean = Array<T>(Shape{channels}, T{0});
  s.running_var = Array<T>(Shape{channels}, T{1});
  return s;
}

template <typename T>
BatchNormState<T> BatchNormState<T>::identity(std::size_t channels) {
  BatchNormState s = empty(channels);
  s.populated = true;
  return s;
}

template <typename T>
Tensor<T> batchnorm2d(Tape<T>* tape, const Tensor<T>& input,
                      const Tensor<T>& gamma, const Tensor<T>& beta,
                      BatchNormState<T>& state, Mode mode,
                      BatchNormOptions options) {
  require_rank(input.shape(), 4, "batchnorm2d", "input");
  const Shape& xs = input.shape();
  const std::size_t n = xs[0], c = xs[1], hw = xs[2] * xs[3];
  const Shape cs{c};
  require_same(gamma.shape(), cs, "batchnorm2d gamma");
  require_same(beta.shape(), cs, "batchnorm2d beta");
  require_same(state.running_mean.shape(), cs, "batchnorm2d running stats");
  if (!(options.eps > 0)) {
    throw ValidationError("batchnorm2d: eps must be positive");
  }
  const T eps = static_cast<T>(options.eps);
  const std::size_t m = n * hw;
  const T* x = input.value().data().data();

  Array<T> mean(cs), invstd(cs);
  if (mode == Mode::kTrain) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0;
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = x + (b * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) s += p[i];
      }
      const double mu = s / static_cast<double>(m);
      double ss = 0;
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = x + (b * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          const double d = p[i] - mu;
          ss += d * d;
        }
      }
      const double var = ss / static_cast<double>(m);
      mean[ch] = static_cast<T>(mu);
      invstd[ch] = static_cast<T>(1.0 / std::sqrt(var + options.eps));
      const double unbiased = m > 1 ? ss / static_cast<double>(m - 1) : var;
      const double w = options.momentum
                           ? *options.momentum
                           : 1.0 / static_cast<double>(state.updates + 1);
      state.running_mean[ch] =
          static_cast<T>((1 - w) * state.running_mean[ch] + w * mu);
      state.running_var[ch] =
          static_cast<T>((1 - w) * state.running_var[ch] + w * unbiased);
    }
    ++state.updates;
    state.populated = true;
  } else {
    if (!state.populated) {
      throw ValidationError(
          "batchnorm2d: eval mode requires populated running statistics");
    }
    for (std::size_t ch = 0; ch < c; ++ch) {
      mean[ch] = state.running_mean[ch];
      invstd[ch] = T{1} / std::sqrt(state.running_var[ch] + eps);
    }
  }

  Array<T> xhat(xs);
  Array<T> out(xs);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = (b * c + ch) * hw;
      const T g = gamma.value()[ch], be = beta.value()[ch];
      for (std::size_t i = 0; i < hw; ++i) {
        const T xh = (x[off + i] - mean[ch]) * invstd[ch];
        xhat[off + i] = xh;
        out[off + i] = g * xh + be;
      }
    }
  }

  return Tape<T>::record(
      tape, "batchnorm2d", std::move(out), {&input, &gamma, &beta},
      [input, gamma, beta, xhat = std::move(xhat), invstd, mode, n, c, hw,
       m](const Array<T>& gout) {
        Array<T> dgamma(Shape{c}), dbeta(Shape{c});
        for (std::size_t b = 0; b < n; ++b) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (b * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
              dgamma[ch] += gout[off + i] * xhat[off + i];
              dbeta[ch] += gout[off + i];
            }
          }
        }
        if (input.requires_grad()) {
          Array<T> dx(input.shape());
          for (std::size_t ch = 0; ch < c; ++ch) {
            const T g = gamma.value()[ch];
            if (mode == Mode::kEval) {
              for (std::size_t b = 0; b < n; ++b) {
                const std::size_t off = (b * c + ch) * hw;
                for (std::size_t i = 0; i < hw; ++i) {
                  dx[off + i] = gout[off + i] * g * invstd[ch];
                }
              }
              continue;
            }
            // dx = g*invstd/m * (m*dy - sum(dy) - xhat*sum(dy*xhat))
            const T sum_dy = dbeta[ch];
            const T sum_dy_xhat = dgamma[ch];
            const T k = g * invstd[ch] / static_cast<T>(m);
            for (std::size_t b = 0; b < n; ++b) {
              const std::size_t off = (b * c + ch) * hw;
              for (std::size_t i = 0; i < hw; ++i) {
                dx[off + i] = k * (static_cast<T>(m) * gout[off + i] - sum_dy -
                                   xhat[off + i] * sum_dy_xhat);
              }
            }
          }
          input.accumulate_grad(dx);
        }
        if (gamma.requires_grad()) gamma.accumulate_grad(dgamma);
        if (beta.requires_grad()) beta.accumulate_grad(dbeta);
      });
}

// ---------------------------------------------------------------------------
// elementwise

template <typename T>
Tensor<T> elementwise(Tape<T>* tape, const Tensor<T>& input,
                      Activation kind) {
  Array<T> out(input.value());
  for (T& v : out.data()) {
    if (kind == Activation::kRelu) {
      v = v > T{0} ? v : T{0};
    } else {
      v = v >= T{0} ? T{1} / (T{1} + std::exp(-v))
                    : std::exp(v) / (T{1} + std::exp(v));
    }
  }
  Array<T> saved = out;
  return Tape<T>::record(
      tape, kind == Activation::kRelu ? "relu" : "sigmoid", std::move(out),
      {&input}, [input, kind, y = std::move(saved)](const Array<T>& gout) {
        Array<T> dx(gout.shape());
        for (std::size_t i = 0; i < dx.numel(); ++i) {
          dx[i] = kind == Activation::kRelu
                      ? (y[i] > T{0} ? gout[i] : T{0})
                      : gout[i] * y[i] * (T{1} - y[i]);
        }
        input.accumulate_grad(dx);
      });
}

// ---------------------------------------------------------------------------
// pool2d

template <typename T>
Tensor<T> pool2d(Tape<T>* tape, const Tensor<T>& input, PoolKind kind,
                 Pool2dParams params) {
  require_rank(input.shape(), 4, "pool2d", "input");
  const Shape xs = input.shape();
  const std::size_t n = xs[0], c = xs[1], h = xs[2], w = xs[3];
  if (kind == PoolKind::kGlobalAvg) {
    params.kernel = {h, w};
    params.stride = {1, 1};
    params.padding = {0, 0};
  }
  const auto [kh, kw] = params.kernel;
  const auto [sh, sw] = params.stride;
  const auto [ph, pw] = params.padding;
  const std::size_t oh = out_extent(h, kh, sh, ph, "pool2d");
  const std::size_t ow = out_extent(w, kw, sw, pw, "pool2d");
  const bool is_max = kind == PoolKind::kMax;

  Array<T> out(Shape{n, c, oh, ow});
  // For max pooling, the flat input index of each window's argmax (or -1
  // when the window lies entirely in padding).
  std::vector<std::ptrdiff_t> argmax;
  if (is_max) argmax.assign(out.numel(), -1);
  const T inv_area = T{1} / static_cast<T>(kh * kw);
  const T* x = input.value().data().data();
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t oi = (plane * oh + oy) * ow + ox;
        T best = -std::numeric_limits<T>::infinity();
        T acc{0};
        for (std::size_t i = 0; i < kh; ++i) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * sh + i) -
                                   static_cast<std::ptrdiff_t>(ph);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t j = 0; j < kw; ++j) {
            const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(ox * sw + j) -
                                      static_cast<std::ptrdiff_t>(pw);
            if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(w)) continue;
            const std::size_t ii =
                (plane * h + static_cast<std::size_t>(y)) * w +
                static_cast<std::size_t>(xx);
            if (is_max) {
              if (x[ii] > best) {
                best = x[ii];
                argmax[oi] = static_cast<std::ptrdiff_t>(ii);
              }
            } else {
              acc += x[ii];
            }
          }
        }
        out[oi] = is_max ? (argmax[oi] < 0 ? T{0} : best) : acc * inv_area;
      }
    }
  }

  return Tape<T>::record(
      tape, is_max ? "max_pool2d" : "avg_pool2d", std::move(out), {&input},
      [input, is_max, argmax = std::move(argmax), n, c, h, w, oh, ow, kh, kw,
       sh, sw, ph, pw, inv_area](const Array<T>& gout) {
        Array<T> dx(input.shape());
        for (std::size_t plane = 0; plane < n * c; ++plane) {
          for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const std::size_t oi = (plane * oh + oy) * ow + ox;
              if (is_max) {
                if (argmax[oi] >= 0) dx[argmax[oi]] += gout[oi];
                continue;
              }
              const T gv = gout[oi] * inv_area;
              for (std::size_t i = 0; i < kh; ++i) {
                const std::ptrdiff_t y =
                    static_cast<std::ptrdiff_t>(oy * sh + i) -
                    static_cast<std::ptrdiff_t>(ph);
                if (y < 0 || y >= static_cast<std::ptrdiff_t>(h)) continue;
                for (std::size_t j = 0; j < kw; ++j) {
                  const std::ptrdiff_t xx =
                      static_cast<std::ptrdiff_t>(ox * sw + j) -
                      static_cast<std::ptrdiff_t>(pw);
                  if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(w)) continue;
                  dx[(plane * h + static_cast<std::size_t>(y)) * w +
                     static_cast<std::size_t>(xx)] += gv;
                }
              }
            }
          }
        }
        input.accumulate_grad(dx);
      });
}

// ---------------------------------------------------------------------------
// linear

template <typename T>
Tensor<T> linear(Tape<T>* tape, const Tensor<T>& input,
                 const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank(input.shape(), 2, "linear", "input");
  require_rank(weight.shape(), 2, "linear", "weight");
  const std::size_t n = input.shape()[0], f = input.shape()[1];
  const std::size_t o = weight.shape()[1];
  if (weight.shape()[0] != f) {
    throw ValidationError("linear: input " + shape_str(input.shape()) +
                          " incompatible with weight " +
                          shape_str(weight.shape()));
  }
  if (bias.defined() && bias.shape() != Shape{o}) {
    throw ValidationError("linear: bias " + shape_str(bias.shape()) +
                          " does not match weight " +
                          shape_str(weight.shape()));
  }
  Array<T> out(Shape{n, o});
  MatMap<T> om(out.data().data(), n, o);
  om.noalias() = ConstMatMap<T>(input.value().data().data(), n, f) *
                 ConstMatMap<T>(weight.value().data().data(), f, o);
  if (bias.defined()) {
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < o; ++j) om(r, j) += bias.value()[j];
    }
  }
  return Tape<T>::record(
      tape, "linear", std::move(out), {&input, &weight, &bias},
      [input, weight, bias, n, f, o](const Array<T>& gout) {
        ConstMatMap<T> gm(gout.data().data(), n, o);
        if (input.requires_grad()) {
          Array<T> dx(input.shape());
          MatMap<T>(dx.data().data(), n, f).noalias() =
              gm * ConstMatMap<T>(weight.value().data().data(), f, o)
                       .transpose();
          input.accumulate_grad(dx);
        }
        if (weight.requires_grad()) {
          Array<T> dw(weight.shape());
          MatMap<T>(dw.data().data(), f, o).noalias() =
              ConstMatMap<T>(input.value().data().data(), n, f).transpose() *
              gm;
          weight.accumulate_grad(dw);
        }
        if (bias.requires_grad()) {
          Array<T> db(Shape{o});
          for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t j = 0; j < o; ++j) db[j] += gm(r, j);
          }
          bias.accumulate_grad(db);
        }
      });
}

// ---------------------------------------------------------------------------
// bce_with_logits

template <typename T>
Tensor<T> bce_with_logits(Tape<T>* tape, const Tensor<T>& logits,
                          const Array<T>& targets) {
  require_same(logits.shape(), targets.shape(), "bce_with_logits");
  for (T y : targets.data()) {
    if (!(y >= T{0} && y <= T{1})) {
      throw ValidationError("bce_with_logits: target " + std::to_string(y) +
                            " outside [0,1]");
    }
  }
  const std::size_t count = logits.numel();
  double total = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const double z = logits.value()[i];
    const double y = targets[i];
    total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  Array<T> out(Shape{}, static_cast<T>(total / static_cast<double>(count)));
  return Tape<T>::record(
      tape, "bce_with_logits", std::move(out), {&logits},
      [logits, targets, count](const Array<T>& gout) {
        Array<T> dz(logits.shape());
        const T k = gout[0] / static_cast<T>(count);
        for (std::size_t i = 0; i < count; ++i) {
          const T z = logits.value()[i];
          const T s = z >= T{0} ? T{1} / (T{1} + std::exp(-z))
                                : std::exp(z) / (T{1} + std::exp(z));
          dz[i] = k * (s - targets[i]);
        }
        logits.accumulate_grad(dz);
      });
}

// ---------------------------------------------------------------------------
// small algebra

template <typename T>
Tensor<T> add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a.shape(), b.shape(), "add");
  Array<T> out(a.value());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b.value()[i];
  return Tape<T>::record(tape, "add", std::move(out), {&a, &b},
                         [a, b](const Array<T>& gout) {
                           if (a.requires_grad()) a.accumulate_grad(gout);
                           if (b.requires_grad()) b.accumulate_grad(gout);
                         });
}

template <typename T>
Tensor<T> mul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a.shape(), b.shape(), "mul");
  Array<T> out(a.value());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
  return Tape<T>::record(
      tape, "mul", std::move(out), {&a, &b}, [a, b](const Array<T>& gout) {
        if (a.requires_grad()) {
          Array<T> da(gout);
          for (std::size_t i = 0; i < da.numel(); ++i) da[i] *= b.value()[i];
          a.accumulate_grad(da);
        }
        if (b.requires_grad()) {
          Array<T> db(gout);
          for (std::size_t i = 0; i < db.numel(); ++i) db[i] *= a.value()[i];
          b.accumulate_grad(db);
        }
      });
}

template <typename T>
Tensor<T> scale(Tape<T>* tape, const Tensor<T>& a, T factor) {
  Array<T> out(a.value());
  for (T& v : out.data()) v *= factor;
  return Tape<T>::record(tape, "scale", std::move(out), {&a},
                         [a, factor](const Array<T>& gout) {
                           Array<T> da(gout);
                           for (T& v : da.data()) v *= factor;
                           a.accumulate_grad(da);
                         });
}

template <typename T>
Tensor<T> sum(Tape<T>* tape, const Tensor<T>& a) {
  T total{0};
  for (T v : a.value().data()) total += v;
  return Tape<T>::record(tape, "sum", Array<T>(Shape{}, total), {&a},
                         [a](const Array<T>& gout) {
                           a.accumulate_grad(Array<T>(a.shape(), gout[0]));
                         });
}

template <typename T>
Tensor<T> reshape(Tape<T>* tape, const Tensor<T>& a, Shape shape) {
  Array<T> out = a.value().reshaped(std::move(shape));
  return Tape<T>::record(
      tape, "reshape", std::move(out), {&a}, [a](const Array<T>& gout) {
        a.accumulate_grad(gout.reshaped(a.shape()));
      });
}

template <typename T>
Tensor<T> mix(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b,
              T forward_weight, T backward_weight) {
  require_same(a.shape(), b.shape(), "mix");
  Array<T> out(a.shape());
  const T fa = forward_weight, fb = T{1} - forward_weight;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out[i] = fa * a.value()[i] + fb * b.value()[i];
  }
  return Tape<T>::record(
      tape, "mix", std::move(out), {&a, &b},
      [a, b, backward_weight](const Array<T>& gout) {
        if (a.requires_grad()) {
          Array<T> da(gout);
          for (T& v : da.data()) v *= backward_weight;
          a.accumulate_grad(da);
        }
        if (b.requires_grad()) {
          Array<T> db(gout);
          for (T& v : db.data()) v *= T{1} - backward_weight;
          b.accumulate_grad(db);
        }
      });
}

template <typename T>
Tensor<T> append_channel(Tape<T>* tape, const Tensor<T>& input,
                         const Array<T>& plane) {
  require_rank(input.shape(), 4, "append_channel", "input");
  const Shape& xs = input.shape();
  const std::size_t n = xs[0], c = xs[1], hw = xs[2] * xs[3];
  require_same(plane.shape(), Shape{xs[2], xs[3]}, "append_channel");
  Array<T> out(Shape{n, c + 1, xs[2], xs[3]});
  const T* x = input.value().data().data();
  for (std::size_t b = 0; b < n; ++b) {
    std::copy(x + b * c * hw, x + (b + 1) * c * hw,
              out.data().data() + b * (c + 1) * hw);
    std::copy(plane.data().begin(), plane.data().end(),
              out.data().data() + (b * (c + 1) + c) * hw);
  }
  return Tape<T>::record(
      tape, "append_channel", std::move(out), {&input},
      [input, n, c, hw](const Array<T>& gout) {
        Array<T> dx(input.shape());
        for (std::size_t b = 0; b < n; ++b) {
          std::copy(gout.data().data() + b * (c + 1) * hw,
                    gout.data().data() + (b * (c + 1) + c) * hw,
                    dx.data().data() + b * c * hw);
        }
        input.accumulate_grad(dx);
      });
}

#define RFTAG_INSTANTIATE_OPS(T)                                              \
  template Tensor<T> conv2d(Tape<T>*, const Tensor<T>&, const Tensor<T>&,     \
                            const Tensor<T>&, Conv2dParams);                  \
  template struct BatchNormState<T>;                                          \
  template Tensor<T> batchnorm2d(Tape<T>*, const Tensor<T>&,                  \
                                 const Tensor<T>&, const Tensor<T>&,          \
                                 BatchNormState<T>&, Mode, BatchNormOptions); \
  template Tensor<T> elementwise(Tape<T>*, const Tensor<T>&, Activation);     \
  template Tensor<T> pool2d(Tape<T>*, const Tensor<T>&, PoolKind,             \
                            Pool2dParams);                                    \
  template Tensor<T> linear(Tape<T>*, const Tensor<T>&, const Tensor<T>&,     \
                            const Tensor<T>&);                                \
  template Tensor<T> bce_with_logits(Tape<T>*, const Tensor<T>&,              \
                                     const Array<T>&);                        \
  template Tensor<T> add(Tape<T>*, const Tensor<T>&, const Tensor<T>&);       \
  template Tensor<T> mul(Tape<T>*, const Tensor<T>&, const Tensor<T>&);       \
  template Tensor<T> scale(Tape<T>*, const Tensor<T>&, T);                    \
  template Tensor<T> sum(Tape<T>*, const Tensor<T>&);                         \
  template Tensor<T> reshape(Tape<T>*, const Tensor<T>&, Shape);              \
  template Tensor<T> mix(Tape<T>*, const Tensor<T>&, const Tensor<T>&, T, T); \
  template Tensor<T> append_channel(Tape<T>*, const Tensor<T>&,               \
                                    const Array<T>&);

RFTAG_INSTANTIATE_OPS(float)
RFTAG_INSTANTIATE_OPS(double)

}  // namespace rftag::ad
