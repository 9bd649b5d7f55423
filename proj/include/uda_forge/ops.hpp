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

#include "uda_forge/tensor.hpp"

namespace uda {

template <typename T>
struct LinearGrads {
  BasicTensor<T> dx;  // [n x d_in]
  BasicTensor<T> dw;  // [d_in x d_out]
  BasicTensor<T> db;  // [d_out]
};

// y = x W + b for x [n x d_in], W [d_in x d_out], b [d_out].
template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& w,
                      const BasicTensor<T>& b);

template <typename T>
LinearGrads<T> linear_backward(const BasicTensor<T>& x, const BasicTensor<T>& w,
                               const BasicTensor<T>& dy);

template <typename T>
struct Conv2dGrads {
  BasicTensor<T> dx;  // [c_in x H x W]
  BasicTensor<T> dk;  // [c_out x c_in x 3 x 3]
  BasicTensor<T> db;  // [c_out]
};

// 3x3 convolution with zero padding 1. Output spatial size is ceil(H / stride).
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& k, int stride,
                      const BasicTensor<T>& bias);

// When want_dx is false the input gradient is left empty (first layer).
template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& k,
                               int stride, const BasicTensor<T>& dy,
                               bool want_dx = true);

enum class Activation { kRelu, kSigmoid };

template <typename T>
BasicTensor<T> activate(Activation kind, const BasicTensor<T>& x);

// `y` is the forward output for `x`; relu'(0) is taken as 0.
template <typename T>
BasicTensor<T> activate_backward(Activation kind, const BasicTensor<T>& x,
                                 const BasicTensor<T>& y, const BasicTensor<T>& dy);

template <typename T>
inline T sigmoid(T v) {
  // Branches keep exp() from overflowing for large |v|.
  if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
  const T e = std::exp(v);
  return e / (T(1) + e);
}

// log(1 + exp(v)) without overflow.
template <typename T>
inline T softplus(T v) {
  return v > T(0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}

}  // namespace uda
