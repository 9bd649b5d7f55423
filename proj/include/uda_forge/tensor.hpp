// Copyright 2026 The UDA Forge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "uda_forge/error.hpp"

namespace uda {

// Dense row-major n-dimensional array. Scalar type is float for training and
// double for gradient verification.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(std::vector<int> shape, T fill = T(0))
      : shape_(std::move(shape)) {
    data_.assign(checked_count(shape_), fill);
  }

  BasicTensor(std::vector<int> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    require(checked_count(shape_) == data_.size(), ErrorCode::kShapeMismatch,
            "tensor data length " + std::to_string(data_.size()) +
                " does not match shape " + shape_string(shape_));
  }

  const std::vector<int>& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  // 2-D and 3-D row-major accessors.
  T& at(int i, int j) noexcept {
    return data_[static_cast<std::size_t>(i) * shape_[1] + j];
  }
  const T& at(int i, int j) const noexcept {
    return data_[static_cast<std::size_t>(i) * shape_[1] + j];
  }
  T& at(int c, int y, int x) noexcept {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  const T& at(int c, int y, int x) const noexcept {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool all_finite() const noexcept {
    for (T v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  void check_finite(std::string_view what) const {
    require(all_finite(), ErrorCode::kNonFinite,
            std::string(what) + " contains a non-finite value");
  }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return BasicTensor<U>(shape_, std::move(out));
  }

  bool same_shape(const BasicTensor& other) const noexcept {
    return shape_ == other.shape_;
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

  static std::string shape_string(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }

 private:
  static std::size_t checked_count(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
      require(d > 0, ErrorCode::kShapeMismatch,
              "tensor dimensions must be positive, got " + shape_string(shape));
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  std::vector<int> shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

inline void require_shape(const std::vector<int>& got, const std::vector<int>& want,
                          std::string_view what) {
  if (got != want) {
    fail(ErrorCode::kShapeMismatch,
         std::string(what) + ": expected shape " + Tensor::shape_string(want) +
             ", got " + Tensor::shape_string(got));
  }
}

}  // namespace uda
