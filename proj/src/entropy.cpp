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

#include "phasefuse/entropy.hpp"

#include "phasefuse/random.hpp"

#include <algorithm>
#include <cstdio>

namespace phasefuse {

void EntropyConfig::validate() const {
  if (n_bins < 2) throw ConfigError("entropy: n_bins must be >= 2");
}

double EntropyCurve::masked_mean(const std::vector<bool>& mask) const {
  double sum = 0.0;
  int n = 0;
  for (Eigen::Index t = 0; t < values.size(); ++t) {
    if (static_cast<std::size_t>(t) < mask.size() && mask[t]) {
      sum += values[t];
      ++n;
    }
  }
  return n ? sum / n : 0.0;
}

FeatureMap global_minmax_normalize(const FeatureMap& feat) {
  FeatureMap out = feat;
  if (feat.values.size() == 0) return out;
  const double lo = feat.values.minCoeff();
  const double hi = feat.values.maxCoeff();
  if (hi == lo) {
    out.values.setConstant(0.5);
  } else {
    out.values = (feat.values.array() - lo) / (hi - lo);
  }
  return out;
}

double histogram_entropy(const Eigen::Ref<const Eigen::RowVectorXd>& row, int n_bins) {
  std::vector<int> counts(static_cast<std::size_t>(n_bins), 0);
  for (Eigen::Index i = 0; i < row.size(); ++i) {
    const double v = std::clamp(row[i], 0.0, 1.0);
    int b = std::min(static_cast<int>(v * n_bins), n_bins - 1);
    // v * n can round across an edge; settle against the edges themselves.
    if (b + 1 < n_bins && v >= static_cast<double>(b + 1) / n_bins) ++b;
    if (b > 0 && v < static_cast<double>(b) / n_bins) --b;
    ++counts[b];
  }
  const double n = static_cast<double>(row.size());
  double h = 0.0;
  for (int c : counts) {
    if (c == 0) continue;
    const double p = c / n;
    h -= p * std::log2(p);
  }
  return h;
}

EntropyCurve frame_entropy(const FeatureMap& feat, const EntropyConfig& cfg) {
  cfg.validate();
  EntropyCurve curve;
  curve.values.resize(feat.frames());
  for (Eigen::Index t = 0; t < feat.frames(); ++t) {
    curve.values[t] = histogram_entropy(feat.values.row(t), cfg.n_bins);
  }
  return curve;
}

FeatureMap random_noise_map(Eigen::Index frames, Eigen::Index dim, std::uint64_t seed) {
  if (frames < 1 || dim < 1) throw ConfigError("random_noise_map: T and D must be >= 1");
  Rng rng(seed);
  FeatureMap out;
  out.kind = ChannelKind::magnitude;
  out.values.resize(frames, dim);
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index d = 0; d < dim; ++d) out.values(t, d) = rng.uniform();
  }
  return out;
}

std::vector<bool> voiced_frame_mask(const FeatureMap& log_power_db, double range_db) {
  const Eigen::Index n = log_power_db.frames();
  Vector energy_db(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double p = (log_power_db.values.row(t).array() * (std::log(10.0) / 10.0)).exp().sum();
    energy_db[t] = 10.0 * std::log10(std::max(p, 1e-300));
  }
  const double top = n ? energy_db.maxCoeff() : 0.0;
  std::vector<bool> mask(static_cast<std::size_t>(n));
  for (Eigen::Index t = 0; t < n; ++t) mask[t] = energy_db[t] >= top - range_db;
  return mask;
}

std::string entropy_report(const std::vector<EntropyCurve>& curves) {
  if (curves.empty()) return "frame,time\n";
  const Eigen::Index n = curves.front().values.size();
  for (const auto& c : curves) {
    if (c.values.size() != n) throw DataError("entropy_report: curves have different lengths");
  }
  std::string out = "frame,time";
  for (const auto& c : curves) out += "," + c.source_label;
  out += '\n';
  char buf[64];
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& times = curves.front().frame_times;
    std::snprintf(buf, sizeof buf, "%lld,%.6f", static_cast<long long>(t),
                  t < times.size() ? times[t] : 0.0);
    out += buf;
    for (const auto& c : curves) {
      std::snprintf(buf, sizeof buf, ",%.6f", c.values[t]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::string entropy_summary(const std::vector<EntropyCurve>& curves) {
  std::string out = "source,mean_entropy_bits\n";
  char buf[64];
  for (const auto& c : curves) {
    std::snprintf(buf, sizeof buf, ",%.6f\n", c.mean());
    out += c.source_label + buf;
  }
  return out;
}

}  // namespace phasefuse
