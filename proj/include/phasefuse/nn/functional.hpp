// Copyright 2026 The phasefuse Authors
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

// Stateless forward/backward kernels. Layers in layers.hpp wrap these and
// own the parameters and the activations cached for the backward pass.

#pragma once

#include "phasefuse/nn/tensor.hpp"

#include <algorithm>
#include <span>

namespace phasefuse::nn {

struct ConvGeometry {
  Index kernel_h = 3, kernel_w = 3;
  Index stride_h = 1, stride_w = 1;
  Index pad_h = 1, pad_w = 1;

  Index out_h(Index h) const { return (h + 2 * pad_h - kernel_h) / stride_h + 1; }
  Index out_w(Index w) const { return (w + 2 * pad_w - kernel_w) / stride_w + 1; }
  bool is_pointwise() const {
    return kernel_h == 1 && kernel_w == 1 && stride_h == 1 && stride_w == 1 && pad_h == 0 && pad_w == 0;
  }
};

/// Output columns [lo, hi) whose input index ow*stride - pad + k lies in
/// [0, size).
inline void valid_range(Index size, Index out, Index stride, Index pad, Index k, Index& lo, Index& hi) {
  const Index off = k - pad;  // input index = ow * stride + off
  lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
  hi = size - off <= 0 ? 0 : std::min(out, (size - off - 1) / stride + 1);
  if (hi < lo) hi = lo;
}

/// Unfolds sample n of x into a (C*kh*kw) x (Ho*Wo) matrix.
template <typename Scalar>
void im2col(const Tensor4<Scalar>& x, Index n, const ConvGeometry& g, MatrixX<Scalar>& cols) {
  const Index ho = g.out_h(x.h()), wo = g.out_w(x.w());
  cols.resize(x.c() * g.kernel_h * g.kernel_w, ho * wo);
  Index row = 0;
  for (Index c = 0; c < x.c(); ++c) {
    const Scalar* plane = x.plane_ptr(n, c);
    for (Index ki = 0; ki < g.kernel_h; ++ki) {
      for (Index kj = 0; kj < g.kernel_w; ++kj, ++row) {
        Scalar* dst = cols.row(row).data();
        Index w0, w1;
        valid_range(x.w(), wo, g.stride_w, g.pad_w, kj, w0, w1);
        const Index off = kj - g.pad_w;
        for (Index oh = 0; oh < ho; ++oh) {
          const Index ih = oh * g.stride_h - g.pad_h + ki;
          Scalar* out = dst + oh * wo;
          if (ih < 0 || ih >= x.h()) {
            std::fill(out, out + wo, Scalar(0));
            continue;
          }
          const Scalar* src = plane + ih * x.w() + off;
          std::fill(out, out + w0, Scalar(0));
          if (g.stride_w == 1) {
            std::copy(src + w0, src + w1, out + w0);
          } else {
            for (Index ow = w0; ow < w1; ++ow) out[ow] = src[ow * g.stride_w];
          }
          std::fill(out + w1, out + wo, Scalar(0));
        }
      }
    }
  }
}

/// Adds the columns back into sample n of grad_x (adjoint of im2col).
template <typename Scalar>
void col2im_add(const MatrixX<Scalar>& cols, Index n, const ConvGeometry& g, Tensor4<Scalar>& grad_x) {
  const Index ho = g.out_h(grad_x.h()), wo = g.out_w(grad_x.w());
  Index row = 0;
  for (Index c = 0; c < grad_x.c(); ++c) {
    Scalar* plane = grad_x.plane_ptr(n, c);
    for (Index ki = 0; ki < g.kernel_h; ++ki) {
      for (Index kj = 0; kj < g.kernel_w; ++kj, ++row) {
        const Scalar* src = cols.row(row).data();
        Index w0, w1;
        valid_range(grad_x.w(), wo, g.stride_w, g.pad_w, kj, w0, w1);
        const Index off = kj - g.pad_w;
        for (Index oh = 0; oh < ho; ++oh) {
          const Index ih = oh * g.stride_h - g.pad_h + ki;
          if (ih < 0 || ih >= grad_x.h()) continue;
          Scalar* dst = plane + ih * grad_x.w() + off;
          const Scalar* in = src + oh * wo;
          if (g.stride_w == 1) {
            for (Index ow = w0; ow < w1; ++ow) dst[ow] += in[ow];
          } else {
            for (Index ow = w0; ow < w1; ++ow) dst[ow * g.stride_w] += in[ow];
          }
        }
      }
    }
  }
}

/// Cross-correlation. weights: C_out x (C_in*kh*kw); bias may be empty.
template <typename Scalar>
Tensor4<Scalar> conv2d_forward(const Tensor4<Scalar>& x, const Eigen::Ref<const MatrixX<Scalar>>& weights,
                               const Eigen::Ref<const VectorX<Scalar>>& bias, const ConvGeometry& g) {
  if (weights.cols() != x.c() * g.kernel_h * g.kernel_w) {
    throw DataError("conv2d: input has " + std::to_string(x.c()) + " channels, weights expect " +
                    std::to_string(weights.cols() / (g.kernel_h * g.kernel_w)));
  }
  const Index ho = g.out_h(x.h()), wo = g.out_w(x.w());
  if (ho < 1 || wo < 1) throw DataError("conv2d: input " + to_string(x.shape()) + " smaller than kernel");
  Tensor4<Scalar> y(x.n(), weights.rows(), ho, wo);
  MatrixX<Scalar> cols;
  for (Index n = 0; n < x.n(); ++n) {
    auto out = y.sample(n);
    if (g.is_pointwise()) {
      out.noalias() = weights * x.sample(n);
    } else {
      im2col(x, n, g, cols);
      out.noalias() = weights * cols;
    }
    if (bias.size()) out.colwise() += bias;
  }
  return y;
}

template <typename Scalar>
struct ConvGrads {
  Tensor4<Scalar> grad_x;
  MatrixX<Scalar> grad_w;
  VectorX<Scalar> grad_b;
};

template <typename Scalar>
ConvGrads<Scalar> conv2d_backward(const Tensor4<Scalar>& x, const Eigen::Ref<const MatrixX<Scalar>>& weights,
                                  bool has_bias,
                                  const Tensor4<Scalar>& grad_out, const ConvGeometry& g) {
  if (grad_out.n() != x.n() || grad_out.c() != weights.rows() || grad_out.h() != g.out_h(x.h()) ||
      grad_out.w() != g.out_w(x.w())) {
    throw DataError("conv2d_backward: upstream gradient shape " + to_string(grad_out.shape()) +
                    " does not match forward");
  }
  ConvGrads<Scalar> r;
  r.grad_x = Tensor4<Scalar>(x.shape());
  r.grad_w = MatrixX<Scalar>::Zero(weights.rows(), weights.cols());
  r.grad_b = VectorX<Scalar>::Zero(has_bias ? weights.rows() : 0);
  MatrixX<Scalar> cols, grad_cols;
  for (Index n = 0; n < x.n(); ++n) {
    const auto go = grad_out.sample(n);
    if (has_bias) r.grad_b += go.rowwise().sum();
    if (g.is_pointwise()) {
      r.grad_w.noalias() += go * x.sample(n).transpose();
      r.grad_x.sample(n).noalias() = weights.transpose() * go;
    } else {
      im2col(x, n, g, cols);
      r.grad_w.noalias() += go * cols.transpose();
      grad_cols.noalias() = weights.transpose() * go;
      col2im_add(grad_cols, n, g, r.grad_x);
    }
  }
  return r;
}

/// Bin i along an axis of length `in` pooled to `out` covers
/// [floor(i*in/out), ceil((i+1)*in/out)).
inline Index pool_begin(Index i, Index in, Index out) { return (i * in) / out; }
inline Index pool_end(Index i, Index in, Index out) { return ((i + 1) * in + out - 1) / out; }

template <typename Scalar>
Tensor4<Scalar> adaptive_avg_pool2d_forward(const Tensor4<Scalar>& x, Index out_h, Index out_w) {
  if (out_h < 1 || out_w < 1) throw ConfigError("adaptive_avg_pool2d: target size must be >= 1");
  if (out_h > x.h() || out_w > x.w()) {
    throw DataError("adaptive_avg_pool2d: target larger than input " + to_string(x.shape()));
  }
  Tensor4<Scalar> y(x.n(), x.c(), out_h, out_w);
  for (Index n = 0; n < x.n(); ++n) {
    for (Index c = 0; c < x.c(); ++c) {
      const auto in = x.plane(n, c);
      auto out = y.plane(n, c);
      for (Index i = 0; i < out_h; ++i) {
        const Index h0 = pool_begin(i, x.h(), out_h), h1 = pool_end(i, x.h(), out_h);
        for (Index j = 0; j < out_w; ++j) {
          const Index w0 = pool_begin(j, x.w(), out_w), w1 = pool_end(j, x.w(), out_w);
          out(i, j) = in.block(h0, w0, h1 - h0, w1 - w0).mean();
        }
      }
    }
  }
  return y;
}

template <typename Scalar>
Tensor4<Scalar> adaptive_avg_pool2d_backward(const Shape4& in_shape, const Tensor4<Scalar>& grad_out) {
  Tensor4<Scalar> gx(in_shape);
  const Index oh = grad_out.h(), ow = grad_out.w();
  for (Index n = 0; n < in_shape.n; ++n) {
    for (Index c = 0; c < in_shape.c; ++c) {
      auto g = gx.plane(n, c);
      const auto go = grad_out.plane(n, c);
      for (Index i = 0; i < oh; ++i) {
        const Index h0 = pool_begin(i, in_shape.h, oh), h1 = pool_end(i, in_shape.h, oh);
        for (Index j = 0; j < ow; ++j) {
          const Index w0 = pool_begin(j, in_shape.w, ow), w1 = pool_end(j, in_shape.w, ow);
          const Scalar share = go(i, j) / static_cast<Scalar>((h1 - h0) * (w1 - w0));
          g.block(h0, w0, h1 - h0, w1 - w0).array() += share;
        }
      }
    }
  }
  return gx;
}

template <typename Scalar>
Tensor4<Scalar> relu_forward(const Tensor4<Scalar>& x) {
  Tensor4<Scalar> y(x.shape());
  y.data() = x.data().cwiseMax(Scalar(0));
  return y;
}

/// relu'(0) = 0.
template <typename Scalar>
Tensor4<Scalar> relu_backward(const Tensor4<Scalar>& x, const Tensor4<Scalar>& grad_out) {
  Tensor4<Scalar> g(x.shape());
  g.data() = (x.data().array() > Scalar(0)).select(grad_out.data(), Scalar(0));
  return g;
}

template <typename Scalar>
Tensor4<Scalar> sigmoid_forward(const Tensor4<Scalar>& x) {
  Tensor4<Scalar> y(x.shape());
  y.data() = (Scalar(1) + (-x.data().array()).exp()).inverse().matrix();
  return y;
}

/// Takes the forward output y.
template <typename Scalar>
Tensor4<Scalar> sigmoid_backward(const Tensor4<Scalar>& y, const Tensor4<Scalar>& grad_out) {
  Tensor4<Scalar> g(y.shape());
  g.data() = (grad_out.data().array() * y.data().array() * (Scalar(1) - y.data().array())).matrix();
  return g;
}

/// (N, C, H, W) -> (N, C, 1, 1).
template <typename Scalar>
Tensor4<Scalar> global_avg_pool_forward(const Tensor4<Scalar>& x) {
  Tensor4<Scalar> y(x.n(), x.c(), 1, 1);
  for (Index n = 0; n < x.n(); ++n) y.sample(n) = x.sample(n).rowwise().mean();
  return y;
}

template <typename Scalar>
Tensor4<Scalar> global_avg_pool_backward(const Shape4& in_shape, const Tensor4<Scalar>& grad_out) {
  Tensor4<Scalar> g(in_shape);
  const Scalar inv = Scalar(1) / static_cast<Scalar>(in_shape.h * in_shape.w);
  for (Index n = 0; n < in_shape.n; ++n) {
    g.sample(n).colwise() = grad_out.sample(n).col(0) * inv;
  }
  return g;
}

/// Fully connected on the flattened C*H*W features; output (N, out, 1, 1).
template <typename Scalar>
Tensor4<Scalar> linear_forward(const Tensor4<Scalar>& x, const Eigen::Ref<const MatrixX<Scalar>>& weights,
                               const Eigen::Ref<const VectorX<Scalar>>& bias) {
  const Index features = x.c() * x.h() * x.w();
  if (weights.cols() != features) {
    throw DataError("linear: input has " + std::to_string(features) + " features, weights expect " +
                    std::to_string(weights.cols()));
  }
  Tensor4<Scalar> y(x.n(), weights.rows(), 1, 1);
  Eigen::Map<const MatrixX<Scalar>> in(x.ptr(), x.n(), features);
  Eigen::Map<MatrixX<Scalar>> out(y.ptr(), x.n(), weights.rows());
  out.noalias() = in * weights.transpose();
  if (bias.size()) out.rowwise() += bias.transpose();
  return y;
}

/// Numerically stable two-class (or K-class) softmax cross-entropy on
/// logits shaped (N, K, 1, 1). Returns the mean loss; grad = (p - onehot)/N.
template <typename Scalar>
Scalar softmax_xent(const Tensor4<Scalar>& logits, std::span<const int> labels, Tensor4<Scalar>* grad) {
  const Index n = logits.n(), k = logits.c();
  if (static_cast<Index>(labels.size()) != n) throw DataError("softmax_xent: label count mismatch");
  if (grad) *grad = Tensor4<Scalar>(logits.shape());
  Scalar loss = 0;
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k) throw DataError("softmax_xent: label out of range");
    const auto z = logits.sample(i).col(0);
    const Scalar m = z.maxCoeff();
    const Scalar lse = m + std::log((z.array() - m).exp().sum());
    loss += lse - z[y];
    if (grad) {
      auto g = grad->sample(i).col(0);
      g = ((z.array() - lse).exp() / static_cast<Scalar>(n)).matrix();
      g[y] -= Scalar(1) / static_cast<Scalar>(n);
    }
  }
  return loss / static_cast<Scalar>(n);
}

/// log softmax of class `cls` per row.
template <typename Scalar>
std::vector<double> log_softmax_column(const Tensor4<Scalar>& logits, int cls) {
  std::vector<double> out(static_cast<std::size_t>(logits.n()));
  for (Index i = 0; i < logits.n(); ++i) {
    const auto z = logits.sample(i).col(0).template cast<double>();
    const double m = z.maxCoeff();
    const double lse = m + std::log((z.array() - m).exp().sum());
    out[static_cast<std::size_t>(i)] = z[cls] - lse;
  }
  return out;
}

}  // namespace phasefuse::nn
