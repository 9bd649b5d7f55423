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

#include <cstddef>
#include <string>
#include <vector>

#include "uda_forge/tensor.hpp"

namespace uda {

// Ordered collection of named tensors. Used for model parameters, their
// gradients, and optimizer moments; two sets with the same layout are
// indexed in lockstep.
template <typename T>
class ParamSet {
 public:
  void add(std::string name, BasicTensor<T> tensor) {
    names_.push_back(std::move(name));
    tensors_.push_back(std::move(tensor));
  }

  std::size_t size() const noexcept { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  BasicTensor<T>& operator[](std::size_t i) { return tensors_[i]; }
  const BasicTensor<T>& operator[](std::size_t i) const { return tensors_[i]; }

  // Returns size() when absent.
  std::size_t find(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i] == name) return i;
    }
    return names_.size();
  }

  const BasicTensor<T>& get(const std::string& name) const {
    const std::size_t i = find(name);
    require(i < size(), ErrorCode::kNotFound, "no parameter named '" + name + "'");
    return tensors_[i];
  }
  BasicTensor<T>& get(const std::string& name) {
    const std::size_t i = find(name);
    require(i < size(), ErrorCode::kNotFound, "no parameter named '" + name + "'");
    return tensors_[i];
  }

  // Same names, same shapes, zero-filled.
  ParamSet zeros_like() const {
    ParamSet out;
    for (std::size_t i = 0; i < size(); ++i) {
      out.add(names_[i], BasicTensor<T>(tensors_[i].shape()));
    }
    return out;
  }

  bool same_layout(const ParamSet& other) const {
    if (names_ != other.names_) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (!tensors_[i].same_shape(other.tensors_[i])) return false;
    }
    return true;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

  void set_zero() {
    for (auto& t : tensors_) t.fill(T(0));
  }

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (std::size_t i = 0; i < size(); ++i) {
      out.add(names_[i], tensors_[i].template cast<U>());
    }
    return out;
  }

  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    return a.names_ == b.names_ && a.tensors_ == b.tensors_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<BasicTensor<T>> tensors_;
};

template <typename T>
void require_same_layout(const ParamSet<T>& a, const ParamSet<T>& b,
                         const std::string& what) {
  require(a.same_layout(b), ErrorCode::kShapeMismatch,
          what + ": parameter sets differ in names or shapes");
}

}  // namespace uda
