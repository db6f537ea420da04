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

#include "phasefuse/pipeline.hpp"

namespace phasefuse {

LabeledFeatures extract_features(const Waveform& wave, const TrialRecord& record, Pairing pairing,
                                 const FrontendConfig& cfg) {
  require_pipeline_rate(wave);
  LabeledFeatures out;
  out.record = record;
  switch (pairing) {
    case Pairing::lps: {
      const auto spec = stft(wave, cfg.stft);
      out.magnitude = log_power(spec);
      out.phase = phase(spec);
      break;
    }
    case Pairing::cqt: {
      const auto spec = cqt(wave, cfg.cqt);
      out.magnitude = log_power(spec);
      out.phase = phase(spec);
      break;
    }
    case Pairing::lfcc: {
      out.magnitude = lfcc(wave, cfg.lfcc);
      out.phase = phase(stft(wave, cfg.lfcc_phase));
      const Eigen::Index t = std::min(out.magnitude.frames(), out.phase.frames());
      out.magnitude.values.conservativeResize(t, Eigen::NoChange);
      out.phase.values.conservativeResize(t, Eigen::NoChange);
      break;
    }
  }
  if (out.magnitude.frames() < 1) {
    throw DataError("utterance '" + record.utterance_id + "' is too short for the " + to_string(pairing) +
                    " front-end");
  }
  return out;
}

std::vector<LabeledFeatures> load_features(const Manifest& manifest, Pairing pairing, const FeatureCache* cache,
                                           bool extract_missing, const FrontendConfig& cfg,
                                           const ProgressFn& progress) {
  if (manifest.size() == 0) throw DataError("empty manifest");
  const std::string tag = to_string(pairing);
  std::vector<LabeledFeatures> out;
  out.reserve(manifest.size());
  for (const auto& rec : manifest.records()) {
    if (cache && cache->has(tag, rec.utterance_id)) {
      LabeledFeatures f;
      f.record = rec;
      cache->get(tag, rec.utterance_id, f.magnitude, f.phase);
      out.push_back(std::move(f));
    } else if (extract_missing) {
      if (rec.audio_path.empty()) throw DataError("utterance '" + rec.utterance_id + "' has no audio path");
      Waveform w = load_wav(manifest.audio_path(rec));
      w.id = rec.utterance_id;
      out.push_back(extract_features(w, rec, pairing, cfg));
      if (cache) cache->put(tag, rec.utterance_id, out.back().magnitude, out.back().phase);
    } else {
      throw DataError("feature cache miss: '" + rec.utterance_id + "' (" + tag + ")" +
                      (cache ? " under " + cache->root().string() : std::string()));
    }
    if (progress) progress(out.size(), manifest.size());
  }
  return out;
}

}  // namespace phasefuse
