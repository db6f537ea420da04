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

// Central finite differences against the analytic backward pass.

#pragma once

#include "phasefuse/nn/layers.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

namespace phasefuse::nn {

struct GradCheckOptions {
  double eps = 1e-5;
  Index coords_per_tensor = 50;  // all coordinates when the tensor is smaller
  // Denominator floor for near-zero coordinates: the largest of an absolute
  // floor, a fraction of the tensor's largest analytic gradient and a
  // smaller fraction of the largest gradient over all tensors. The last
  // term covers tensors whose true gradient is zero (a conv bias feeding
  // batch norm), where the difference quotient is pure rounding noise.
  double floor_abs = 1e-7;
  double floor_rel = 1e-2;
  double floor_global = 1e-4;
  // A coordinate whose error exceeds retry_above is measured again with
  // the smaller steps and the best agreement is kept. A ReLU kink inside
  // [x - eps, x + eps] spoils one step size; a wrong gradient spoils all.
  double retry_above = 1e-6;
  std::vector<double> retry_eps{1e-6, 1e-7};
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst;  // "tensor[index]"
  std::size_t coords_checked = 0;
  std::size_t coords_retried = 0;
};

struct GradTarget {
  std::string name;
  VectorX<double>* value;
  const VectorX<double>* grad;  // filled by loss(true)
};

inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// loss(true) must zero gradients, run forward + backward and fill every
/// target's grad; loss(false) only runs the forward.
inline GradCheckReport finite_difference_check(const std::vector<GradTarget>& targets,
                                               const std::function<double(bool)>& loss,
                                               const GradCheckOptions& opt = {}) {
  loss(true);
  std::vector<VectorX<double>> analytic;
  for (const auto& t : targets) analytic.push_back(*t.grad);

  double global_max = 0.0;
  for (const auto& a : analytic) {
    if (a.size()) global_max = std::max(global_max, a.cwiseAbs().maxCoeff());
  }

  GradCheckReport rep;
  Rng rng(opt.seed);
  for (std::size_t k = 0; k < targets.size(); ++k) {
    auto& value = *targets[k].value;
    const double tensor_max = analytic[k].size() ? analytic[k].cwiseAbs().maxCoeff() : 0.0;
    const double floor = std::max({opt.floor_abs, opt.floor_rel * tensor_max, opt.floor_global * global_max});
    std::vector<Index> coords(static_cast<std::size_t>(value.size()));
    std::iota(coords.begin(), coords.end(), Index{0});
    if (value.size() > opt.coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng.engine());
      coords.resize(static_cast<std::size_t>(opt.coords_per_tensor));
    }
    auto measure = [&](Index i, double eps) {
      const double orig = value[i];
      // Divide by the representable step, not 2*eps.
      const double hi = orig + eps, lo = orig - eps;
      value[i] = hi;
      const double up = loss(false);
      value[i] = lo;
      const double down = loss(false);
      value[i] = orig;
      return relative_error(analytic[k][i], (up - down) / (hi - lo), floor);
    };
    for (Index i : coords) {
      double err = measure(i, opt.eps);
      if (err > opt.retry_above && !opt.retry_eps.empty()) {
        ++rep.coords_retried;
        for (double e : opt.retry_eps) err = std::min(err, measure(i, e));
      }
      ++rep.coords_checked;
      if (err >= rep.max_rel_error) {
        rep.max_rel_error = err;
        rep.worst = targets[k].name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return rep;
}

/// Checks every parameter of `m` and its input under the scalar loss
/// sum(forward(x) * R) with a fixed random R.
inline GradCheckReport grad_check_module(Module<double>& m, Tensor4<double> x, const GradCheckOptions& opt = {}) {
  Rng rng(derive_seed(opt.seed, 1));
  Tensor4<double> probe;
  {
    Tensor4<double> y = m.forward(x, Mode::train);
    probe = Tensor4<double>(y.shape());
    for (Index i = 0; i < probe.size(); ++i) probe.data()[i] = rng.normal(0.0, 1.0);
  }
  Tensor4<double> grad_x;
  auto coll = collect_all(m);
  std::vector<GradTarget> targets;
  for (auto& p : coll.params) targets.push_back({p.name, &p.param->value, &p.param->grad});
  targets.push_back({"input", &x.data(), &grad_x.data()});
  auto loss = [&](bool with_grad) {
    const Tensor4<double> y = m.forward(x, Mode::train);
    const double l = y.data().dot(probe.data());
    if (with_grad) {
      zero_grad(m);
      grad_x = m.backward(probe);
    }
    return l;
  };
  return finite_difference_check(targets, loss, opt);
}

}  // namespace phasefuse::nn
