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

#include "rftag/autodiff/array.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>

#include "rftag/error.hpp"

namespace rftag::ad {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {
void check_extents(const Shape& shape) {
  for (std::size_t e : shape) {
    if (e == 0) {
      throw ValidationError("array extents must be positive, got " +
                            shape_str(shape));
    }
  }
}
}  // namespace

template <typename T>
Array<T>::Array(Shape shape, T fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(shape_numel(shape_), fill);
}

template <typename T>
Array<T>::Array(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  if (data_.size() != shape_numel(shape_)) {
    throw ValidationError("array data length " + std::to_string(data_.size()) +
                          " does not match shape " + shape_str(shape_));
  }
}

template <typename T>
void Array<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
Array<T> Array<T>::reshaped(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    throw ValidationError("cannot reshape " + shape_str(shape_) + " to " +
                          shape_str(shape));
  }
  return Array(std::move(shape), data_);
}

template class Array<float>;
template class Array<double>;

}  // namespace rftag::ad
