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

// Waveform -> (magnitude, phase) maps for each feature pairing.

#pragma once

#include "phasefuse/dsp.hpp"
#include "phasefuse/feature_cache.hpp"
#include "phasefuse/featmap.hpp"
#include "phasefuse/models.hpp"

#include <functional>

namespace phasefuse {

struct FrontendConfig {
  StftConfig stft;
  CqtConfig cqt;
  LfccConfig lfcc;
  // DFT phase for the LFCC pairing: same window and bins as `stft`, but
  // advanced at the LFCC hop so both maps share a time axis.
  StftConfig lfcc_phase{64.0, 10.0, 1024};
};

/// lps: log-power DFT + DFT phase; cqt: log-power CQT + CQT phase; lfcc:
/// LFCC + DFT phase truncated to the shorter of the two frame counts.
LabeledFeatures extract_features(const Waveform& wave, const TrialRecord& record, Pairing pairing,
                                 const FrontendConfig& cfg = {});

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Cache first; on a miss either extract from audio (and store) or throw.
std::vector<LabeledFeatures> load_features(const Manifest& manifest, Pairing pairing, const FeatureCache* cache,
                                           bool extract_missing, const FrontendConfig& cfg = {},
                                           const ProgressFn& progress = {});

}  // namespace phasefuse
