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

#include <string>
#include <vector>

namespace phasefuse {

struct EntropyConfig {
  int n_bins = 32;
  void validate() const;
};

/// Per-frame histogram entropy, in bits.
struct EntropyCurve {
  Vector values;
  Vector frame_times;
  std::string source_label;

  double mean() const { return values.size() ? values.mean() : 0.0; }
  /// Mean over frames where mask is true.
  double masked_mean(const std::vector<bool>& mask) const;
};

/// (v - min) / (max - min) over the whole map; a constant map becomes 0.5.
FeatureMap global_minmax_normalize(const FeatureMap& feat);

/// Each frame's D values go into n_bins equal-width bins over [0, 1] (the
/// last bin is closed on the right); entropy = -sum p log2 p.
EntropyCurve frame_entropy(const FeatureMap& feat, const EntropyConfig& cfg = {});

/// Shannon entropy of one row of values in [0, 1].
double histogram_entropy(const Eigen::Ref<const Eigen::RowVectorXd>& row, int n_bins);

/// T x D i.i.d. U[0, 1) reference image.
FeatureMap random_noise_map(Eigen::Index frames, Eigen::Index dim, std::uint64_t seed);

/// Frames whose total power is within `range_db` of the loudest frame.
/// Input is a log-power (dB) map.
std::vector<bool> voiced_frame_mask(const FeatureMap& log_power_db, double range_db = 20.0);

/// CSV with a "frame,time,<label>..." header and one row per frame.
/// Throws DataError if the curves differ in length.
std::string entropy_report(const std::vector<EntropyCurve>& curves);

/// "source,mean_entropy_bits" CSV, one row per curve.
std::string entropy_summary(const std::vector<EntropyCurve>& curves);

}  // namespace phasefuse
