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

#pragma once

#include "phasefuse/common.hpp"

#include <array>
#include <string>

namespace phasefuse::nn {

using Index = Eigen::Index;

struct Shape4 {
  Index n = 0, c = 0, h = 0, w = 0;
  Index size() const { return n * c * h * w; }
  friend bool operator==(const Shape4&, const Shape4&) = default;
};

inline std::string to_string(const Shape4& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) + "," +
         std::to_string(s.w) + ")";
}

/// Dense NCHW tensor; each (n, c) plane is a row-major H x W matrix.
template <typename Scalar>
class Tensor4 {
 public:
  using PlaneMap = Eigen::Map<MatrixX<Scalar>>;
  using ConstPlaneMap = Eigen::Map<const MatrixX<Scalar>>;

  Tensor4() = default;
  Tensor4(Index n, Index c, Index h, Index w) : shape_{n, c, h, w}, data_(VectorX<Scalar>::Zero(n * c * h * w)) {}
  explicit Tensor4(const Shape4& s) : Tensor4(s.n, s.c, s.h, s.w) {}

  static Tensor4 zeros(const Shape4& s) { return Tensor4(s); }

  const Shape4& shape() const { return shape_; }
  Index n() const { return shape_.n; }
  Index c() const { return shape_.c; }
  Index h() const { return shape_.h; }
  Index w() const { return shape_.w; }
  Index size() const { return data_.size(); }

  VectorX<Scalar>& data() { return data_; }
  const VectorX<Scalar>& data() const { return data_; }
  Scalar* ptr() { return data_.data(); }
  const Scalar* ptr() const { return data_.data(); }

  Scalar& operator()(Index n, Index c, Index h, Index w) {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }
  Scalar operator()(Index n, Index c, Index h, Index w) const {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }

  Index plane_size() const { return shape_.h * shape_.w; }
  Scalar* plane_ptr(Index n, Index c) { return data_.data() + (n * shape_.c + c) * plane_size(); }
  const Scalar* plane_ptr(Index n, Index c) const { return data_.data() + (n * shape_.c + c) * plane_size(); }
  PlaneMap plane(Index n, Index c) { return PlaneMap(plane_ptr(n, c), shape_.h, shape_.w); }
  ConstPlaneMap plane(Index n, Index c) const { return ConstPlaneMap(plane_ptr(n, c), shape_.h, shape_.w); }

  /// All channels of sample n as a C x (H*W) matrix.
  Eigen::Map<MatrixX<Scalar>> sample(Index n) {
    return Eigen::Map<MatrixX<Scalar>>(plane_ptr(n, 0), shape_.c, plane_size());
  }
  Eigen::Map<const MatrixX<Scalar>> sample(Index n) const {
    return Eigen::Map<const MatrixX<Scalar>>(plane_ptr(n, 0), shape_.c, plane_size());
  }

  void set_zero() { data_.setZero(); }

  template <typename Other>
  Tensor4<Other> cast() const {
    Tensor4<Other> out(shape_);
    out.data() = data_.template cast<Other>();
    return out;
  }

  bool all_finite() const { return data_.allFinite(); }

 private:
  Shape4 shape_;
  VectorX<Scalar> data_;
};

/// Concatenates along the channel axis; batch and spatial sizes must agree.
template <typename Scalar>
Tensor4<Scalar> concat_channels(const Tensor4<Scalar>& a, const Tensor4<Scalar>& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
    throw DataError("concat_channels: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  Tensor4<Scalar> out(a.n(), a.c() + b.c(), a.h(), a.w());
  const Index ps = a.plane_size();
  for (Index n = 0; n < a.n(); ++n) {
    std::copy(a.plane_ptr(n, 0), a.plane_ptr(n, 0) + a.c() * ps, out.plane_ptr(n, 0));
    std::copy(b.plane_ptr(n, 0), b.plane_ptr(n, 0) + b.c() * ps, out.plane_ptr(n, a.c()));
  }
  return out;
}

/// Inverse of concat_channels: first `c_first` channels go to `a`.
template <typename Scalar>
void split_channels(const Tensor4<Scalar>& x, Index c_first, Tensor4<Scalar>& a, Tensor4<Scalar>& b) {
  a = Tensor4<Scalar>(x.n(), c_first, x.h(), x.w());
  b = Tensor4<Scalar>(x.n(), x.c() - c_first, x.h(), x.w());
  const Index ps = x.plane_size();
  for (Index n = 0; n < x.n(); ++n) {
    std::copy(x.plane_ptr(n, 0), x.plane_ptr(n, 0) + c_first * ps, a.plane_ptr(n, 0));
    std::copy(x.plane_ptr(n, c_first), x.plane_ptr(n, 0) + x.c() * ps, b.plane_ptr(n, 0));
  }
}

}  // namespace phasefuse::nn
