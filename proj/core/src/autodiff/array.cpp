// Copyright 2026 The DnD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dnd/autodiff/array.hpp"

#include <cmath>
#include <sstream>

#include "dnd/util/error.hpp"

namespace dnd::ad {

std::size_t shape_count(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

template <typename T>
Array<T>::Array(Shape shape, T fill)
    : shape_(std::move(shape)), values_(shape_count(shape_), fill) {}

template <typename T>
Array<T>::Array(Shape shape, std::vector<T> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_count(shape_)) {
    throw DimensionError("array of shape " + shape_string(shape_) + " needs " +
                         std::to_string(shape_count(shape_)) + " values, got " +
                         std::to_string(values_.size()));
  }
}

template <typename T>
Array<T> Array<T>::matrix(std::size_t rows, std::size_t cols, std::initializer_list<T> values) {
  return Array(Shape{rows, cols}, std::vector<T>(values));
}

template <typename T>
std::size_t Array<T>::rows() const noexcept {
  if (shape_.empty()) return 1;
  std::size_t n = 1;
  for (std::size_t i = 0; i + 1 < shape_.size(); ++i) n *= shape_[i];
  return n;
}

template <typename T>
std::size_t Array<T>::cols() const noexcept {
  return shape_.empty() ? 1 : shape_.back();
}

template <typename T>
T Array<T>::item() const {
  if (values_.size() != 1) {
    throw ContractError("item() on array of shape " + shape_string(shape_));
  }
  return values_[0];
}

template <typename T>
void Array<T>::fill(T v) {
  std::fill(values_.begin(), values_.end(), v);
}

template <typename T>
bool Array<T>::all_finite() const noexcept {
  for (T v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename T>
void validate_finite(const Array<T>& a, const std::string& what) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i])) {
      std::ostringstream os;
      os << what << ": non-finite value " << a[i] << " at flat index " << i << " of shape "
         << shape_string(a.shape());
      throw NumericError(os.str());
    }
  }
}

template <typename T>
T max_abs_diff(const Array<T>& a, const Array<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("max_abs_diff: shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  T worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

template class Array<float>;
template class Array<double>;
template void validate_finite(const Array<float>&, const std::string&);
template void validate_finite(const Array<double>&, const std::string&);
template float max_abs_diff(const Array<float>&, const Array<float>&);
template double max_abs_diff(const Array<double>&, const Array<double>&);

}  // namespace dnd::ad
