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

#include "uda_forge/ops.hpp"

namespace uda {

template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& w,
                      const BasicTensor<T>& b) {
  require(x.rank() == 2 && w.rank() == 2 && b.rank() == 1, ErrorCode::kShapeMismatch,
          "linear: expected x[n x d_in], W[d_in x d_out], b[d_out]");
  const int n = x.dim(0), d_in = x.dim(1), d_out = w.dim(1);
  require(w.dim(0) == d_in && b.dim(0) == d_out, ErrorCode::kShapeMismatch,
          "linear: shapes " + Tensor::shape_string(x.shape()) + " * " +
              Tensor::shape_string(w.shape()) + " + " +
              Tensor::shape_string(b.shape()) + " do not conform");
  BasicTensor<T> y({n, d_out});
  for (int i = 0; i < n; ++i) {
    T* row = &y.at(i, 0);
    for (int k = 0; k < d_in; ++k) {
      const T xv = x.at(i, k);
      const T* wr = &w.at(k, 0);
      for (int j = 0; j < d_out; ++j) row[j] += xv * wr[j];
    }
    for (int j = 0; j < d_out; ++j) row[j] += b[j];
  }
  return y;
}

template <typename T>
LinearGrads<T> linear_backward(const BasicTensor<T>& x, const BasicTensor<T>& w,
                               const BasicTensor<T>& dy) {
  const int n = x.dim(0), d_in = x.dim(1), d_out = w.dim(1);
  require_shape(dy.shape(), {n, d_out}, "linear_backward dy");
  LinearGrads<T> g{BasicTensor<T>({n, d_in}), BasicTensor<T>({d_in, d_out}),
                   BasicTensor<T>({d_out})};
  for (int i = 0; i < n; ++i) {
    const T* dyr = &dy.at(i, 0);
    for (int j = 0; j < d_out; ++j) g.db[j] += dyr[j];
    for (int k = 0; k < d_in; ++k) {
      const T xv = x.at(i, k);
      const T* wr = &w.at(k, 0);
      T* dwr = &g.dw.at(k, 0);
      T acc = 0;
      for (int j = 0; j < d_out; ++j) {
        acc += dyr[j] * wr[j];
        dwr[j] += xv * dyr[j];
      }
      g.dx.at(i, k) = acc;
    }
  }
  return g;
}

namespace {

int out_extent(int n, int stride) { return (n + stride - 1) / stride; }

void check_conv_shapes(const std::vector<int>& xs, const std::vector<int>& ks,
                       int stride) {
  require(stride == 1 || stride == 2, ErrorCode::kInvalidArgument,
          "conv2d: stride must be 1 or 2");
  require(xs.size() == 3 && ks.size() == 4, ErrorCode::kShapeMismatch,
          "conv2d: expected x[c_in x H x W] and k[c_out x c_in x 3 x 3]");
  require(ks[1] == xs[0] && ks[2] == 3 && ks[3] == 3, ErrorCode::kShapeMismatch,
          "conv2d: kernel " + Tensor::shape_string(ks) + " does not fit input " +
              Tensor::shape_string(xs));
  require(xs[1] >= 3 && xs[2] >= 3, ErrorCode::kShapeMismatch,
          "conv2d: spatial extent must be at least 3");
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& k, int stride,
                      const BasicTensor<T>& bias) {
  check_conv_shapes(x.shape(), k.shape(), stride);
  const int c_in = x.dim(0), h = x.dim(1), w = x.dim(2), c_out = k.dim(0);
  require_shape(bias.shape(), {c_out}, "conv2d bias");
  const int ho = out_extent(h, stride), wo = out_extent(w, stride);
  BasicTensor<T> y({c_out, ho, wo});
  for (int co = 0; co < c_out; ++co) {
    for (int ci = 0; ci < c_in; ++ci) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const T kv = k[((static_cast<std::size_t>(co) * c_in + ci) * 3 + ky) * 3 + kx];
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride + ky - 1;
            if (iy < 0 || iy >= h) continue;
            const T* xr = &x.at(ci, iy, 0);
            T* yr = &y.at(co, oy, 0);
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride + kx - 1;
              if (ix < 0 || ix >= w) continue;
              yr[ox] += kv * xr[ix];
            }
          }
        }
      }
    }
    T* plane = &y.at(co, 0, 0);
    for (int i = 0; i < ho * wo; ++i) plane[i] += bias[co];
  }
  return y;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& k,
                               int stride, const BasicTensor<T>& dy, bool want_dx) {
  check_conv_shapes(x.shape(), k.shape(), stride);
  const int c_in = x.dim(0), h = x.dim(1), w = x.dim(2), c_out = k.dim(0);
  const int ho = out_extent(h, stride), wo = out_extent(w, stride);
  require_shape(dy.shape(), {c_out, ho, wo}, "conv2d_backward dy");
  Conv2dGrads<T> g;
  if (want_dx) g.dx = BasicTensor<T>(x.shape());
  g.dk = BasicTensor<T>(k.shape());
  g.db = BasicTensor<T>({c_out});
  for (int co = 0; co < c_out; ++co) {
    const T* plane = &dy.at(co, 0, 0);
    T sum = 0;
    for (int i = 0; i < ho * wo; ++i) sum += plane[i];
    g.db[co] = sum;
    for (int ci = 0; ci < c_in; ++ci) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const std::size_t ki =
              ((static_cast<std::size_t>(co) * c_in + ci) * 3 + ky) * 3 + kx;
          const T kv = k[ki];
          T acc = 0;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride + ky - 1;
            if (iy < 0 || iy >= h) continue;
            const T* xr = &x.at(ci, iy, 0);
            const T* dyr = &dy.at(co, oy, 0);
            T* dxr = want_dx ? &g.dx.at(ci, iy, 0) : nullptr;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride + kx - 1;
              if (ix < 0 || ix >= w) continue;
              acc += dyr[ox] * xr[ix];
              if (dxr) dxr[ix] += dyr[ox] * kv;
            }
          }
          g.dk[ki] = acc;
        }
      }
    }
  }
  return g;
}

template <typename T>
BasicTensor<T> activate(Activation kind, const BasicTensor<T>& x) {
  BasicTensor<T> y = x;
  for (T& v : y.data()) {
    v = kind == Activation::kRelu ? (v > T(0) ? v : T(0)) : sigmoid(v);
  }
  return y;
}

template <typename T>
BasicTensor<T> activate_backward(Activation kind, const BasicTensor<T>& x,
                                 const BasicTensor<T>& y, const BasicTensor<T>& dy) {
  require(x.same_shape(dy) && y.same_shape(dy), ErrorCode::kShapeMismatch,
          "activate_backward: shape mismatch");
  BasicTensor<T> dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) {
    if (kind == Activation::kRelu) {
      dx[i] = x[i] > T(0) ? dy[i] : T(0);
    } else {
      dx[i] = dy[i] * y[i] * (T(1) - y[i]);
    }
  }
  return dx;
}

#define UDA_INSTANTIATE_OPS(T)                                                     \
  template BasicTensor<T> linear(const BasicTensor<T>&, const BasicTensor<T>&,     \
                                 const BasicTensor<T>&);                           \
  template LinearGrads<T> linear_backward(const BasicTensor<T>&,                   \
                                          const BasicTensor<T>&,                   \
                                          const BasicTensor<T>&);                  \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, int, \
                                 const BasicTensor<T>&);                           \
  template Conv2dGrads<T> conv2d_backward(const BasicTensor<T>&,                   \
                                          const BasicTensor<T>&, int,              \
                                          const BasicTensor<T>&, bool);            \
  template BasicTensor<T> activate(Activation, const BasicTensor<T>&);             \
  template BasicTensor<T> activate_backward(Activation, const BasicTensor<T>&,     \
                                            const BasicTensor<T>&,                 \
                                            const BasicTensor<T>&);

UDA_INSTANTIATE_OPS(float)
UDA_INSTANTIATE_OPS(double)

#undef UDA_INSTANTIATE_OPS

}  // namespace uda
