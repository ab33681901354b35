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

// Central finite-difference oracle for autodiff gradients. Lives in test
// code only; it never calls Tape::backward for the numeric side.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "rftag/autodiff/tensor.hpp"

namespace rftag::testing {

using ScalarFn = std::function<ad::Tensor<double>(ad::Tape<double>*)>;

struct GradCheckResult {
  double max_rel_error = 0;
  std::size_t checked = 0;
};

// Relative error with a floor of 1e-3 on the denominator, so gradients
// near zero are compared in absolute terms.
inline double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), 1e-3});
}

inline GradCheckResult grad_check(const ScalarFn& f,
                                  std::vector<ad::Tensor<double>> wrt,
                                  double step = 1e-5) {
  for (auto& t : wrt) t.zero_grad();
  ad::Tape<double> tape;
  ad::Tensor<double> loss = f(&tape);
  tape.backward(loss);

  GradCheckResult result;
  for (auto& t : wrt) {
    const ad::Array<double> analytic =
        t.has_grad() ? t.grad() : ad::Array<double>(t.shape(), 0.0);
    auto values = t.mutable_value().data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = f(nullptr).value()[0];
      values[i] = saved - step;
      const double down = f(nullptr).value()[0];
      values[i] = saved;
      const double numeric = (up - down) / (2 * step);
      result.max_rel_error =
          std::max(result.max_rel_error, rel_error(analytic[i], numeric));
      ++result.checked;
    }
  }
  return result;
}

inline ad::Array<double> random_array(const ad::Shape& shape,
                                      std::mt19937_64& rng, double lo = -1.0,
                                      double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  ad::Array<double> a(shape);
  for (double& v : a.data()) v = dist(rng);
  return a;
}

}  // namespace rftag::testing
