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

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dnd::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_count(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array. Rank 0 holds a single scalar. Most of the library
// works on rank-2 arrays, where rows() is the product of all leading extents
// and cols() is the last extent.
template <typename T>
class Array {
 public:
  using value_type = T;

  Array() : values_(1, T(0)) {}
  explicit Array(Shape shape, T fill = T(0));
  Array(Shape shape, std::vector<T> values);

  static Array scalar(T v) { return Array(Shape{}, std::vector<T>{v}); }
  static Array matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<T> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  T* data() noexcept { return values_.data(); }
  const T* data() const noexcept { return values_.data(); }
  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }
  std::vector<T>& storage() noexcept { return values_; }
  const std::vector<T>& storage() const noexcept { return values_; }

  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }
  T& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  T item() const;
  void fill(T v);
  bool all_finite() const noexcept;

  template <typename U>
  Array<U> cast() const {
    std::vector<U> out(values_.begin(), values_.end());
    return Array<U>(shape_, std::move(out));
  }

  friend bool operator==(const Array& a, const Array& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  Shape shape_;
  std::vector<T> values_;
};

// Throws NumericError naming `what` if any entry is NaN or infinite.
template <typename T>
void validate_finite(const Array<T>& a, const std::string& what);

template <typename T>
T max_abs_diff(const Array<T>& a, const Array<T>& b);

}  // namespace dnd::ad
