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

#include "phasefuse/nn/layers.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace phasefuse::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
  double weight_decay = 1e-5;  // L2, folded into the gradient

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("adam: lr must be > 0");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
      throw ConfigError("adam: betas must lie in (0, 1)");
    }
    if (!(eps > 0.0) || weight_decay < 0.0) throw ConfigError("adam: eps must be > 0 and weight_decay >= 0");
  }
};

template <typename Scalar>
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<VectorX<Scalar>> m, v;
};

template <typename Scalar>
AdamState<Scalar> make_adam(const std::vector<ParamRef<Scalar>>& params, const AdamConfig& cfg = {}) {
  cfg.validate();
  AdamState<Scalar> s;
  s.config = cfg;
  for (const auto& p : params) {
    s.m.push_back(VectorX<Scalar>::Zero(p.param->size()));
    s.v.push_back(VectorX<Scalar>::Zero(p.param->size()));
  }
  return s;
}

/// g <- g + wd*theta; bias-corrected first/second moments; theta -= lr *
/// m_hat / (sqrt(v_hat) + eps).
template <typename Scalar>
void adam_step(const std::vector<ParamRef<Scalar>>& params, AdamState<Scalar>& s) {
  if (params.size() != s.m.size()) throw DataError("adam_step: parameter list does not match optimizer state");
  const auto& c = s.config;
  ++s.step;
  const Scalar b1 = static_cast<Scalar>(c.beta1), b2 = static_cast<Scalar>(c.beta2);
  const Scalar corr1 = static_cast<Scalar>(1.0 - std::pow(c.beta1, static_cast<double>(s.step)));
  const Scalar corr2 = static_cast<Scalar>(1.0 - std::pow(c.beta2, static_cast<double>(s.step)));
  const Scalar lr = static_cast<Scalar>(c.lr), eps = static_cast<Scalar>(c.eps);
  const Scalar wd = static_cast<Scalar>(c.weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i].param;
    if (s.m[i].size() != p.size() || p.grad.size() != p.size()) {
      throw DataError("adam_step: moment buffer shape mismatch for '" + params[i].name + "'");
    }
    auto theta = p.value.array();
    const auto g = p.grad.array() + wd * theta;
    s.m[i].array() = b1 * s.m[i].array() + (Scalar(1) - b1) * g;
    s.v[i].array() = b2 * s.v[i].array() + (Scalar(1) - b2) * g.square();
    theta -= lr * (s.m[i].array() / corr1) / ((s.v[i].array() / corr2).sqrt() + eps);
  }
}

}  // namespace phasefuse::nn
