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

// Layers with owned parameters. forward() caches what backward() needs;
// backward() accumulates parameter gradients and returns the input
// gradient. A layer supports one pending backward per forward.

#pragma once

#include "phasefuse/nn/functional.hpp"
#include "phasefuse/random.hpp"

#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace phasefuse::nn {

enum class Mode : std::uint8_t { train, eval };

template <typename Scalar>
struct Parameter {
  std::vector<Index> shape;
  VectorX<Scalar> value;
  VectorX<Scalar> grad;

  Parameter() = default;
  explicit Parameter(std::vector<Index> s) : shape(std::move(s)) {
    const Index n = std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
    value = VectorX<Scalar>::Zero(n);
    grad = VectorX<Scalar>::Zero(n);
  }
  Index size() const { return value.size(); }
  /// Leading axis by the product of the rest.
  Eigen::Map<const MatrixX<Scalar>> matrix() const { return {value.data(), shape[0], value.size() / shape[0]}; }
  Eigen::Map<MatrixX<Scalar>> grad_matrix() { return {grad.data(), shape[0], grad.size() / shape[0]}; }
};

template <typename Scalar>
struct ParamRef {
  std::string name;
  Parameter<Scalar>* param;
};

template <typename Scalar>
struct BufferRef {
  std::string name;
  VectorX<Scalar>* value;
};

template <typename Scalar>
struct Collection {
  std::vector<ParamRef<Scalar>> params;
  std::vector<BufferRef<Scalar>> buffers;
};

template <typename Scalar>
class Module {
 public:
  virtual ~Module() = default;
  virtual Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode mode) = 0;
  virtual Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out) = 0;
  /// Appends parameters and buffers in a fixed order with dotted names.
  virtual void collect(Collection<Scalar>& /*out*/, const std::string& /*prefix*/) {}
  virtual void reset_parameters(Rng& /*rng*/) {}
  virtual std::string kind() const = 0;
};

template <typename Scalar>
Collection<Scalar> collect_all(Module<Scalar>& m) {
  Collection<Scalar> c;
  m.collect(c, "");
  return c;
}

template <typename Scalar>
std::size_t param_count(Module<Scalar>& m) {
  std::size_t n = 0;
  for (const auto& p : collect_all(m).params) n += static_cast<std::size_t>(p.param->size());
  return n;
}

template <typename Scalar>
void zero_grad(Module<Scalar>& m) {
  for (auto& p : collect_all(m).params) p.param->grad.setZero();
}

inline std::string join_name(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

/// Kaiming-uniform for ReLU nets: U(-sqrt(6/fan_in), sqrt(6/fan_in)); bias
/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename Scalar>
void kaiming_uniform(Parameter<Scalar>& w, Index fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (Index i = 0; i < w.size(); ++i) w.value[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
}

template <typename Scalar>
void fan_in_uniform(Parameter<Scalar>& b, Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Index i = 0; i < b.size(); ++i) b.value[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
}

template <typename Scalar>
class Conv2d : public Module<Scalar> {
 public:
  Conv2d(Index in_channels, Index out_channels, ConvGeometry geom, bool bias = true)
      : in_(in_channels), out_(out_channels), geom_(geom),
        weight_({out_channels, in_channels, geom.kernel_h, geom.kernel_w}) {
    if (in_channels < 1 || out_channels < 1) throw ConfigError("conv2d: channel counts must be >= 1");
    if (geom.kernel_h < 1 || geom.kernel_w < 1) throw ConfigError("conv2d: kernel must be >= 1");
    if (geom.stride_h < 1 || geom.stride_w < 1) throw ConfigError("conv2d: stride must be >= 1");
    if (geom.pad_h < 0 || geom.pad_w < 0) throw ConfigError("conv2d: padding must be >= 0");
    if (bias) bias_ = Parameter<Scalar>({out_channels});
  }

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode mode) override {
    if (mode == Mode::train) input_ = x;
    return conv2d_forward<Scalar>(x, weight_.matrix(), bias_.value, geom_);
  }

  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out) override {
    auto g = conv2d_backward<Scalar>(input_, weight_.matrix(), has_bias(), grad_out, geom_);
    weight_.grad_matrix() += g.grad_w;
    if (has_bias()) bias_.grad += g.grad_b;
    return std::move(g.grad_x);
  }

  void collect(Collection<Scalar>& out, const std::string& prefix) override {
    out.params.push_back({join_name(prefix, "weight"), &weight_});
    if (has_bias()) out.params.push_back({join_name(prefix, "bias"), &bias_});
  }

  void reset_parameters(Rng& rng) override {
    const Index fan_in = in_ * geom_.kernel_h * geom_.kernel_w;
    kaiming_uniform(weight_, fan_in, rng);
    if (has_bias()) fan_in_uniform(bias_, fan_in, rng);
  }

  std::string kind() const override { return "conv2d"; }

  bool has_bias() const { return bias_.size() > 0; }
  Parameter<Scalar>& weight() { return weight_; }
  Parameter<Scalar>& bias() { return bias_; }
  const ConvGeometry& geometry() const { return geom_; }

 protected:
  Index in_, out_;
  ConvGeometry geom_;
  Parameter<Scalar> weight_;
  Parameter<Scalar> bias_;
  Tensor4<Scalar> input_;
};

template <typename Scalar>
class BatchNorm2d : public Module<Scalar> {
 public:
  explicit BatchNorm2d(Index channels, double momentum = 0.1, double eps = 1e-5)
      : momentum_(momentum), eps_(eps), gamma_({channels}), beta_({channels}),
        running_mean_(VectorX<Scalar>::Zero(channels)), running_var_(VectorX<Scalar>::Ones(channels)) {
    if (channels < 1) throw ConfigError("batchnorm2d: channels must be >= 1");
    gamma_.value.setOnes();
  }

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode mode) override {
    const Index C = gamma_.size();
    if (x.c() != C) throw DataError("batchnorm2d: expected " + std::to_string(C) + " channels, got " + to_string(x.shape()));
    const Index m = x.n() * x.h() * x.w();
    mode_ = mode;
    inv_std_.resize(C);
    xhat_ = Tensor4<Scalar>(x.shape());
    Tensor4<Scalar> y(x.shape());
    if (mode == Mode::train && m < 2) throw DataError("batchnorm2d: need B*H*W >= 2 in training mode");
    for (Index c = 0; c < C; ++c) {
      double mean, var;
      if (mode == Mode::train) {
        // Per-plane sums in Scalar, combined in double.
        double s = 0.0, s2 = 0.0;
        for (Index n = 0; n < x.n(); ++n) s += static_cast<double>(x.plane(n, c).sum());
        mean = s / static_cast<double>(m);
        const Scalar mu = static_cast<Scalar>(mean);
        for (Index n = 0; n < x.n(); ++n) {
          s2 += static_cast<double>((x.plane(n, c).array() - mu).square().sum());
        }
        var = s2 / static_cast<double>(m);
        running_mean_[c] = static_cast<Scalar>((1.0 - momentum_) * running_mean_[c] + momentum_ * mean);
        const double unbiased = s2 / static_cast<double>(m - 1);
        running_var_[c] = static_cast<Scalar>((1.0 - momentum_) * running_var_[c] + momentum_ * unbiased);
      } else {
        mean = running_mean_[c];
        var = running_var_[c];
      }
      const Scalar inv = static_cast<Scalar>(1.0 / std::sqrt(var + eps_));
      const Scalar mu = static_cast<Scalar>(mean);
      inv_std_[c] = inv;
      for (Index n = 0; n < x.n(); ++n) {
        auto xh = xhat_.plane(n, c);
        xh = (x.plane(n, c).array() - mu) * inv;
        y.plane(n, c) = (xh.array() * gamma_.value[c] + beta_.value[c]).matrix();
      }
    }
    return y;
  }

  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out) override {
    const Index C = gamma_.size();
    const Index m = grad_out.n() * grad_out.h() * grad_out.w();
    Tensor4<Scalar> gx(grad_out.shape());
    for (Index c = 0; c < C; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (Index n = 0; n < grad_out.n(); ++n) {
        const auto dy = grad_out.plane(n, c);
        sum_dy += static_cast<double>(dy.sum());
        sum_dy_xhat += static_cast<double>((dy.array() * xhat_.plane(n, c).array()).sum());
      }
      beta_.grad[c] += static_cast<Scalar>(sum_dy);
      gamma_.grad[c] += static_cast<Scalar>(sum_dy_xhat);
      const Scalar scale = gamma_.value[c] * inv_std_[c];
      for (Index n = 0; n < grad_out.n(); ++n) {
        if (mode_ == Mode::train) {
          const Scalar k = scale / static_cast<Scalar>(m);
          gx.plane(n, c) = (k * (static_cast<Scalar>(m) * grad_out.plane(n, c).array() - static_cast<Scalar>(sum_dy) -
                                 xhat_.plane(n, c).array() * static_cast<Scalar>(sum_dy_xhat)))
                               .matrix();
        } else {
          gx.plane(n, c) = grad_out.plane(n, c) * scale;
        }
      }
    }
    return gx;
  }

  void collect(Collection<Scalar>& out, const std::string& prefix) override {
    out.params.push_back({join_name(prefix, "weight"), &gamma_});
    out.params.push_back({join_name(prefix, "bias"), &beta_});
    out.buffers.push_back({join_name(prefix, "running_mean"), &running_mean_});
    out.buffers.push_back({join_name(prefix, "running_var"), &running_var_});
  }

  void reset_parameters(Rng&) override {
    gamma_.value.setOnes();
    beta_.value.setZero();
    running_mean_.setZero();
    running_var_.setOnes();
  }

  std::string kind() const override { return "batchnorm2d"; }

  Parameter<Scalar>& gamma() { return gamma_; }
  Parameter<Scalar>& beta() { return beta_; }
  VectorX<Scalar>& running_mean() { return running_mean_; }
  VectorX<Scalar>& running_var() { return running_var_; }

 private:
  double momentum_, eps_;
  Parameter<Scalar> gamma_, beta_;
  VectorX<Scalar> running_mean_, running_var_;
  Mode mode_ = Mode::train;
  Tensor4<Scalar> xhat_;
  VectorX<Scalar> inv_std_;
};

template <typename Scalar>
class ReLU : public Module<Scalar> {
 public:
  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode mode) override {
    if (mode == Mode::train) input_ = x;
    return relu_forward(x);
  }
  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out) override { return relu_backward(input_, grad_out); }
  std::string kind() const override { return "relu"; }

 private:
  Tensor4<Scalar> input_;
};

template <typename Scalar>
class Sigmoid : public Module<Scalar> {
 public:
  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode) override {
    output_ = sigmoid_forward(x);
    return output_;
  }
  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out) override { return sigmoid_backward(output_, grad_out); }
  std::string kind() const override { return "sigmoid"; }

 private:
  Tensor4<Scalar> output_;
};

/// A non-positive target on an axis keeps that axis' input size.
template <typename Scalar>
class AdaptiveAvgPool2d : public Module<Scalar> {
 public:
  AdaptiveAvgPool2d(Index target_h, Index target_w) : target_h_(target_h), target_w_(target_w) {
    if (target_h == 0 || target_w == 0) throw ConfigError("adaptive_avg_pool2d: target size 0");
  }
  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode) override {
    in_shape_ = x.shape();
    return adaptive_avg_pool2d_forward(x, target_h_ > 0 ? target_h_ : x.h(), target_w_ > 0 ? target_w_ : x.w());
  }
  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out) override {
    return adaptive_avg_pool2d_backward(in_shape_, grad_out);
  }
  std::string kind() const override { return "adaptive_avg_pool2d"; }

 private:
  Index target_h_, target_w_;
  Shape4 in_shape_;
};

/// Halves each spatial axis (rounding up) with adaptive average bins.
template <typename Scalar>
class HalvingAvgPool2d : public Module<Scalar> {
 public:
  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode) override {
    in_shape_ = x.shape();
    return adaptive_avg_pool2d_forward(x, (x.h() + 1) / 2, (x.w() + 1) / 2);
  }
  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out) override {
    return adaptive_avg_pool2d_backward(in_shape_, grad_out);
  }
  std::string kind() const override { return "halving_avg_pool2d"; }

 private:
  Shape4 in_shape_;
};

template <typename Scalar>
class GlobalAvgPool : public Module<Scalar> {
 public:
  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode) override {
    in_shape_ = x.shape();
    return global_avg_pool_forward(x);
  }
  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out) override {
    return global_avg_pool_backward(in_shape_, grad_out);
  }
  std::string kind() const override { return "global_avg_pool"; }

 private:
  Shape4 in_shape_;
};

template <typename Scalar>
class Linear : public Module<Scalar> {
 public:
  Linear(Index in_features, Index out_features, bool bias = true)
      : weight_({out_features, in_features}) {
    if (in_features < 1 || out_features < 1) throw ConfigError("linear: feature counts must be >= 1");
    if (bias) bias_ = Parameter<Scalar>({out_features});
  }

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode mode) override {
    if (mode == Mode::train) input_ = x;
    return linear_forward<Scalar>(x, weight_.matrix(), bias_.value);
  }

  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out) override {
    const Index n = input_.n(), f = weight_.shape[1], o = weight_.shape[0];
    if (grad_out.n() != n || grad_out.c() != o) throw DataError("linear_backward: upstream gradient shape mismatch");
    Eigen::Map<const MatrixX<Scalar>> in(input_.ptr(), n, f);
    Eigen::Map<const MatrixX<Scalar>> go(grad_out.ptr(), n, o);
    weight_.grad_matrix().noalias() += go.transpose() * in;
    if (bias_.size()) bias_.grad += go.colwise().sum().transpose();
    Tensor4<Scalar> gx(input_.shape());
    Eigen::Map<MatrixX<Scalar>>(gx.ptr(), n, f).noalias() = go * weight_.matrix();
    return gx;
  }

  void collect(Collection<Scalar>& out, const std::string& prefix) override {
    out.params.push_back({join_name(prefix, "weight"), &weight_});
    if (bias_.size()) out.params.push_back({join_name(prefix, "bias"), &bias_});
  }

  void reset_parameters(Rng& rng) override {
    kaiming_uniform(weight_, weight_.shape[1], rng);
    if (bias_.size()) fan_in_uniform(bias_, weight_.shape[1], rng);
  }

  std::string kind() const override { return "linear"; }

  Parameter<Scalar>& weight() { return weight_; }
  Parameter<Scalar>& bias() { return bias_; }

 private:
  Parameter<Scalar> weight_;
  Parameter<Scalar> bias_;
  Tensor4<Scalar> input_;
};

/// Named children run in order.
template <typename Scalar>
class Sequential : public Module<Scalar> {
 public:
  Sequential() = default;

  template <typename M>
  M& add(std::string name, std::unique_ptr<M> m) {
    M& ref = *m;
    children_.emplace_back(std::move(name), std::move(m));
    return ref;
  }

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode mode) override {
    Tensor4<Scalar> h = x;
    for (auto& [name, m] : children_) h = m->forward(h, mode);
    return h;
  }

  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out) override {
    Tensor4<Scalar> g = grad_out;
    for (auto it = children_.rbegin(); it != children_.rend(); ++it) g = it->second->backward(g);
    return g;
  }

  void collect(Collection<Scalar>& out, const std::string& prefix) override {
    for (auto& [name, m] : children_) m->collect(out, join_name(prefix, name));
  }

  void reset_parameters(Rng& rng) override {
    for (auto& [name, m] : children_) m->reset_parameters(rng);
  }

  std::string kind() const override { return "sequential"; }

  std::size_t size() const { return children_.size(); }
  bool empty() const { return children_.empty(); }
  Module<Scalar>& at(std::size_t i) { return *children_.at(i).second; }

 private:
  std::vector<std::pair<std::string, std::unique_ptr<Module<Scalar>>>> children_;
};

/// Squeeze-and-excitation: global pool -> linear C->ceil(C/r) -> relu ->
/// linear -> sigmoid -> per-channel scale of the input.
template <typename Scalar>
class SEBlock : public Module<Scalar> {
 public:
  SEBlock(Index channels, Index reduction = 16)
      : fc1_(channels, (channels + reduction - 1) / reduction), fc2_((channels + reduction - 1) / reduction, channels) {
    if (reduction < 1) throw ConfigError("se_block: reduction must be >= 1");
  }

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode mode) override {
    Tensor4<Scalar> g = pool_.forward(x, mode);
    g = fc1_.forward(g, mode);
    g = relu_.forward(g, mode);
    g = fc2_.forward(g, mode);
    gate_ = sigmoid_.forward(g, mode);
    if (mode == Mode::train) input_ = x;
    Tensor4<Scalar> y(x.shape());
    for (Index n = 0; n < x.n(); ++n) {
      y.sample(n) = gate_.sample(n).col(0).asDiagonal() * x.sample(n);
    }
    return y;
  }

  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out) override {
    Tensor4<Scalar> gx(input_.shape());
    Tensor4<Scalar> g_gate(gate_.shape());
    for (Index n = 0; n < input_.n(); ++n) {
      gx.sample(n) = gate_.sample(n).col(0).asDiagonal() * grad_out.sample(n);
      g_gate.sample(n).col(0) = (grad_out.sample(n).array() * input_.sample(n).array()).rowwise().sum().matrix();
    }
    Tensor4<Scalar> g = sigmoid_.backward(g_gate);
    g = fc2_.backward(g);
    g = relu_.backward(g);
    g = fc1_.backward(g);
    g = pool_.backward(g);
    gx.data() += g.data();
    return gx;
  }

  void collect(Collection<Scalar>& out, const std::string& prefix) override {
    fc1_.collect(out, join_name(prefix, "fc1"));
    fc2_.collect(out, join_name(prefix, "fc2"));
  }

  void reset_parameters(Rng& rng) override {
    fc1_.reset_parameters(rng);
    fc2_.reset_parameters(rng);
  }

  std::string kind() const override { return "se_block"; }

  Linear<Scalar>& fc1() { return fc1_; }
  Linear<Scalar>& fc2() { return fc2_; }
  const Tensor4<Scalar>& last_gate() const { return gate_; }

 private:
  GlobalAvgPool<Scalar> pool_;
  Linear<Scalar> fc1_;
  ReLU<Scalar> relu_;
  Linear<Scalar> fc2_;
  Sigmoid<Scalar> sigmoid_;
  Tensor4<Scalar> gate_, input_;
};

/// Conv -> BN -> ReLU unit used inside the Res2Net block.
template <typename Scalar>
std::unique_ptr<Sequential<Scalar>> conv_bn_relu(Index in, Index out, ConvGeometry g, bool bias, bool relu = true) {
  auto s = std::make_unique<Sequential<Scalar>>();
  s->add("conv", std::make_unique<Conv2d<Scalar>>(in, out, g, bias));
  s->add("bn", std::make_unique<BatchNorm2d<Scalar>>(out));
  if (relu) s->add("relu", std::make_unique<ReLU<Scalar>>());
  return s;
}

inline ConvGeometry pointwise() { return {1, 1, 1, 1, 0, 0}; }
inline ConvGeometry same3x3() { return {3, 3, 1, 1, 1, 1}; }

/// Res2Net bottleneck with SE. 1x1 reduce (C -> w) then split into s groups
/// of w/s; group 0 goes through its 3x3 unit, group i (0 < i < s-1) goes
/// through its unit after adding the previous unit's output, the last group
/// passes through. Concat -> 1x1 expand (w -> C) -> BN -> SE -> + input ->
/// ReLU. Shape preserving.
template <typename Scalar>
class Res2NetBlock : public Module<Scalar> {
 public:
  Res2NetBlock(Index channels, Index width, Index scale, Index se_reduction)
      : channels_(channels), width_(width), scale_(scale), se_(channels, se_reduction) {
    if (scale < 2) throw ConfigError("res2net_block: scale s must be >= 2");
    if (width < scale || width % scale != 0) {
      throw ConfigError("res2net_block: width " + std::to_string(width) + " not divisible by scale " +
                        std::to_string(scale));
    }
    reduce_ = conv_bn_relu<Scalar>(channels, width, pointwise(), false);
    const Index gw = width / scale;
    for (Index i = 0; i + 1 < scale; ++i) units_.push_back(conv_bn_relu<Scalar>(gw, gw, same3x3(), false));
    expand_ = conv_bn_relu<Scalar>(width, channels, pointwise(), false, /*relu=*/false);
  }

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode mode) override {
    if (x.c() != channels_) throw DataError("res2net_block: expected " + std::to_string(channels_) + " channels");
    const Tensor4<Scalar> r = reduce_->forward(x, mode);
    const Index gw = width_ / scale_, ps = r.plane_size();
    Tensor4<Scalar> cat(r.shape());
    Tensor4<Scalar> prev;
    for (Index i = 0; i < scale_; ++i) {
      Tensor4<Scalar> xi(r.n(), gw, r.h(), r.w());
      for (Index n = 0; n < r.n(); ++n) {
        std::copy(r.plane_ptr(n, i * gw), r.plane_ptr(n, i * gw) + gw * ps, xi.plane_ptr(n, 0));
      }
      Tensor4<Scalar> yi;
      if (i + 1 == scale_) {
        yi = std::move(xi);
      } else {
        if (i > 0) xi.data() += prev.data();
        yi = units_[static_cast<std::size_t>(i)]->forward(xi, mode);
        prev = yi;
      }
      for (Index n = 0; n < r.n(); ++n) {
        std::copy(yi.plane_ptr(n, 0), yi.plane_ptr(n, 0) + gw * ps, cat.plane_ptr(n, i * gw));
      }
    }
    Tensor4<Scalar> y = se_.forward(expand_->forward(cat, mode), mode);
    y.data() += x.data();
    return out_relu_.forward(y, mode);
  }

  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out) override {
    const Tensor4<Scalar> g_sum = out_relu_.backward(grad_out);
    const Tensor4<Scalar> g_cat = expand_->backward(se_.backward(g_sum));
    const Index gw = width_ / scale_, ps = g_cat.plane_size();
    Tensor4<Scalar> g_r(g_cat.shape());
    auto slice = [&](const Tensor4<Scalar>& src, Index i) {
      Tensor4<Scalar> t(src.n(), gw, src.h(), src.w());
      for (Index n = 0; n < src.n(); ++n) {
        std::copy(src.plane_ptr(n, i * gw), src.plane_ptr(n, i * gw) + gw * ps, t.plane_ptr(n, 0));
      }
      return t;
    };
    auto place = [&](const Tensor4<Scalar>& t, Index i) {
      for (Index n = 0; n < t.n(); ++n) {
        std::copy(t.plane_ptr(n, 0), t.plane_ptr(n, 0) + gw * ps, g_r.plane_ptr(n, i * gw));
      }
    };
    place(slice(g_cat, scale_ - 1), scale_ - 1);
    // Unit i's input is x_i + y_{i-1}, so its input gradient feeds both.
    Tensor4<Scalar> carry;
    for (Index i = scale_ - 2; i >= 0; --i) {
      Tensor4<Scalar> gy = slice(g_cat, i);
      if (carry.size()) gy.data() += carry.data();
      carry = units_[static_cast<std::size_t>(i)]->backward(gy);
      place(carry, i);
    }
    Tensor4<Scalar> gx = reduce_->backward(g_r);
    gx.data() += g_sum.data();
    return gx;
  }

  void collect(Collection<Scalar>& out, const std::string& prefix) override {
    reduce_->collect(out, join_name(prefix, "reduce"));
    for (std::size_t i = 0; i < units_.size(); ++i) units_[i]->collect(out, join_name(prefix, "unit" + std::to_string(i)));
    expand_->collect(out, join_name(prefix, "expand"));
    se_.collect(out, join_name(prefix, "se"));
  }

  void reset_parameters(Rng& rng) override {
    reduce_->reset_parameters(rng);
    for (auto& u : units_) u->reset_parameters(rng);
    expand_->reset_parameters(rng);
    se_.reset_parameters(rng);
  }

  std::string kind() const override { return "res2net_block"; }

  Sequential<Scalar>& reduce() { return *reduce_; }
  Sequential<Scalar>& unit(std::size_t i) { return *units_.at(i); }
  Sequential<Scalar>& expand() { return *expand_; }
  SEBlock<Scalar>& se() { return se_; }
  Index scale() const { return scale_; }

 private:
  Index channels_, width_, scale_;
  std::unique_ptr<Sequential<Scalar>> reduce_;
  std::vector<std::unique_ptr<Sequential<Scalar>>> units_;
  std::unique_ptr<Sequential<Scalar>> expand_;
  SEBlock<Scalar> se_;
  ReLU<Scalar> out_relu_;
};

}  // namespace phasefuse::nn
