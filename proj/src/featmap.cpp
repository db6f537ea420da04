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

#include "phasefuse/featmap.hpp"

#include "phasefuse/random.hpp"

#include <cstdio>
#include <numeric>

namespace phasefuse {

FeatureMap extend_to_multiple(const FeatureMap& feat, Eigen::Index L) {
  const Eigen::Index t = feat.frames();
  if (t < 1) throw DataError("extend_to_multiple: empty feature map");
  const Eigen::Index target = L * ((t + L - 1) / L);
  if (target == t) return feat;
  FeatureMap out;
  out.kind = feat.kind;
  out.source = feat.source;
  out.values.resize(target, feat.dim());
  for (Eigen::Index r = 0; r < target; ++r) out.values.row(r) = feat.values.row(r % t);
  return out;
}

std::vector<Eigen::Index> segment_starts(Eigen::Index frames, Eigen::Index L, Eigen::Index hop) {
  if (frames < L || frames % L != 0) {
    throw DataError("segment: T = " + std::to_string(frames) + " is not a multiple of " + std::to_string(L) +
                    " (extend first)");
  }
  std::vector<Eigen::Index> starts;
  for (Eigen::Index s = 0; s + L <= frames; s += hop) starts.push_back(s);
  return starts;
}

std::vector<SegmentView> segment(const FeatureMap& feat, Eigen::Index L, Eigen::Index hop) {
  std::vector<SegmentView> out;
  for (Eigen::Index s : segment_starts(feat.frames(), L, hop)) out.push_back(feat.values.middleRows(s, L));
  return out;
}

template <typename Scalar>
nn::Tensor4<Scalar> stack_channels(const Matrix& mag, const Matrix* phase_like) {
  if (phase_like && (phase_like->rows() != mag.rows() || phase_like->cols() != mag.cols())) {
    throw DataError("stack_channels: magnitude is " + std::to_string(mag.rows()) + "x" +
                    std::to_string(mag.cols()) + " but phase is " + std::to_string(phase_like->rows()) + "x" +
                    std::to_string(phase_like->cols()));
  }
  nn::Tensor4<Scalar> out(1, phase_like ? 2 : 1, mag.rows(), mag.cols());
  out.plane(0, 0) = mag.cast<Scalar>();
  if (phase_like) out.plane(0, 1) = phase_like->cast<Scalar>();
  return out;
}

template nn::Tensor4<float> stack_channels<float>(const Matrix&, const Matrix*);
template nn::Tensor4<double> stack_channels<double>(const Matrix&, const Matrix*);

double aggregate_scores(std::span<const double> segment_scores) {
  if (segment_scores.empty()) throw DataError("aggregate_scores: no segment scores");
  return std::accumulate(segment_scores.begin(), segment_scores.end(), 0.0) /
         static_cast<double>(segment_scores.size());
}

SegmentedCorpus segment_corpus(std::vector<LabeledFeatures> items) {
  SegmentedCorpus out;
  out.items = std::move(items);
  for (std::size_t i = 0; i < out.items.size(); ++i) {
    auto& it = out.items[i];
    it.magnitude = extend_to_multiple(it.magnitude);
    if (it.phase.values.size() != 0) {
      it.phase = extend_to_multiple(it.phase);
      if (it.phase.frames() != it.magnitude.frames()) {
        throw DataError("utterance '" + it.record.utterance_id + "': magnitude and phase frame counts differ");
      }
    }
    for (Eigen::Index s : segment_starts(it.magnitude.frames())) out.segments.push_back({i, s});
  }
  return out;
}

template <typename Scalar>
SegmentBatch<Scalar> make_batch(const SegmentedCorpus& corpus, std::span<const SegmentRef> refs, bool with_phase) {
  SegmentBatch<Scalar> b;
  if (refs.empty()) return b;
  const auto& first = corpus.items[refs.front().item];
  const Eigen::Index n = static_cast<Eigen::Index>(refs.size());
  b.magnitude = nn::Tensor4<Scalar>(n, 1, kSegmentFrames, first.magnitude.dim());
  if (with_phase) b.phase = nn::Tensor4<Scalar>(n, 1, kSegmentFrames, first.phase.dim());
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& ref = refs[static_cast<std::size_t>(r)];
    const auto& it = corpus.items[ref.item];
    if (it.magnitude.dim() != b.magnitude.w() || (with_phase && it.phase.dim() != b.phase.w())) {
      throw DataError("make_batch: feature dimension differs across utterances");
    }
    b.magnitude.plane(r, 0) = it.magnitude.values.middleRows(ref.start, kSegmentFrames).template cast<Scalar>();
    if (with_phase) {
      b.phase.plane(r, 0) = it.phase.values.middleRows(ref.start, kSegmentFrames).template cast<Scalar>();
    }
    b.owner.push_back(ref.item);
    b.labels.push_back(it.record.label == Label::bonafide ? 1 : 0);
  }
  return b;
}

template SegmentBatch<float> make_batch<float>(const SegmentedCorpus&, std::span<const SegmentRef>, bool);
template SegmentBatch<double> make_batch<double>(const SegmentedCorpus&, std::span<const SegmentRef>, bool);

void FeatureCorpusSpec::validate() const {
  if (n_per_class < 1) throw ConfigError("feature corpus: n_per_class must be >= 1");
  if (frames < 1 || dim < 1) throw ConfigError("feature corpus: T and D must be >= 1");
}

std::vector<LabeledFeatures> synth_feature_corpus(const FeatureCorpusSpec& spec) {
  spec.validate();
  std::vector<LabeledFeatures> out;
  const int total = 2 * spec.n_per_class;
  out.reserve(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) {
    const bool bonafide = i < spec.n_per_class;
    const int k = bonafide ? i : i - spec.n_per_class;
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(i)));

    LabeledFeatures item;
    char name[64];
    std::snprintf(name, sizeof name, "%s_%s_%05d", spec.id_prefix.c_str(), bonafide ? "B" : "S", k);
    item.record.utterance_id = name;
    item.record.speaker_id = "SYN";
    item.record.label = bonafide ? Label::bonafide : Label::spoof;
    item.record.attack_id = bonafide ? "-" : "SYN-PHS";

    // Log-power of a noise periodogram under a random linear spectral tilt.
    const double level_db = rng.uniform(-20.0, 0.0);
    double tilt_db = rng.uniform(-20.0, 0.0);
    if (!bonafide && spec.magnitude_mode == MagnitudeMode::class_tilted) tilt_db += 10.0;
    item.magnitude.kind = ChannelKind::magnitude;
    item.magnitude.source = FeatureSource::cqt;
    item.magnitude.values.resize(spec.frames, spec.dim);
    for (Eigen::Index t = 0; t < spec.frames; ++t) {
      for (Eigen::Index d = 0; d < spec.dim; ++d) {
        const double env_db = level_db + tilt_db * (spec.dim > 1 ? double(d) / double(spec.dim - 1) : 0.0);
        const double periodogram = -std::log(1.0 - rng.uniform());  // Exp(1)
        item.magnitude.values(t, d) = env_db + 10.0 * std::log10(std::max(periodogram, 1e-10));
      }
    }

    item.phase.kind = ChannelKind::phase;
    item.phase.source = FeatureSource::cqt;
    item.phase.values.resize(spec.frames, spec.dim);
    const bool walk = bonafide && spec.phase_mode == PhaseMode::structured;
    if (walk) {
      for (Eigen::Index d = 0; d < spec.dim; ++d) item.phase.values(0, d) = wrap_phase(rng.uniform(-kPi, kPi));
      for (Eigen::Index t = 1; t < spec.frames; ++t) {
        for (Eigen::Index d = 0; d < spec.dim; ++d) {
          item.phase.values(t, d) = wrap_phase(item.phase.values(t - 1, d) + rng.normal(0.0, spec.walk_step));
        }
      }
    } else {
      for (Eigen::Index t = 0; t < spec.frames; ++t) {
        for (Eigen::Index d = 0; d < spec.dim; ++d) item.phase.values(t, d) = wrap_phase(rng.uniform(-kPi, kPi));
      }
    }
    out.push_back(std::move(item));
  }
  return out;
}

}  // namespace phasefuse
