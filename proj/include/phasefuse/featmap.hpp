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
#include "phasefuse/dataset_io.hpp"
#include "phasefuse/nn/tensor.hpp"

#include <optional>
#include <span>
#include <vector>

namespace phasefuse {

inline constexpr Eigen::Index kSegmentFrames = 400;
inline constexpr Eigen::Index kSegmentHop = 200;

using SegmentView = std::remove_const_t<decltype(std::declval<const Matrix&>().middleRows(0, 1))>;

/// Pads to T' = L * ceil(T / L) by cyclic repetition from frame 0.
FeatureMap extend_to_multiple(const FeatureMap& feat, Eigen::Index L = kSegmentFrames);

/// Segment start offsets 0, hop, ..., T - L. T must be a multiple of L.
std::vector<Eigen::Index> segment_starts(Eigen::Index frames, Eigen::Index L = kSegmentFrames,
                                         Eigen::Index hop = kSegmentHop);

/// Views into feat.values; the map must outlive them.
std::vector<SegmentView> segment(const FeatureMap& feat, Eigen::Index L = kSegmentFrames,
                                 Eigen::Index hop = kSegmentHop);

/// One segment as a 1 x C x T x D tensor, channel 0 = magnitude, channel 1
/// = phase-like (when given). Both inputs must have identical T and D.
template <typename Scalar>
nn::Tensor4<Scalar> stack_channels(const Matrix& mag, const Matrix* phase_like);

/// Arithmetic mean; throws on an empty list.
double aggregate_scores(std::span<const double> segment_scores);

/// Magnitude and phase maps of one utterance plus its trial metadata.
struct LabeledFeatures {
  TrialRecord record;
  FeatureMap magnitude;
  FeatureMap phase;
};

/// Model input for a forward pass: B segments, magnitude and phase kept as
/// separate single-channel tensors so the framework decides how to fuse.
template <typename Scalar>
struct SegmentBatch {
  nn::Tensor4<Scalar> magnitude;  // B x 1 x 400 x D
  nn::Tensor4<Scalar> phase;      // B x 1 x 400 x D_phase (may be empty)
  std::vector<std::size_t> owner;  // index of the owning utterance per row
  std::vector<int> labels;         // 1 bonafide, 0 spoof
};

/// Segment descriptor: utterance index and start frame in the extended map.
struct SegmentRef {
  std::size_t item = 0;
  Eigen::Index start = 0;
};

/// Extends both maps of every item and lists all of their segments.
struct SegmentedCorpus {
  std::vector<LabeledFeatures> items;  // extended maps
  std::vector<SegmentRef> segments;
};

SegmentedCorpus segment_corpus(std::vector<LabeledFeatures> items);

/// Gathers the given segments into a batch.
template <typename Scalar>
SegmentBatch<Scalar> make_batch(const SegmentedCorpus& corpus, std::span<const SegmentRef> refs,
                                bool with_phase);

enum class PhaseMode : std::uint8_t { structured, uniform_random };
enum class MagnitudeMode : std::uint8_t { shared_distribution, class_tilted };

struct FeatureCorpusSpec {
  int n_per_class = 100;
  Eigen::Index frames = 400;
  Eigen::Index dim = 16;
  PhaseMode phase_mode = PhaseMode::structured;
  MagnitudeMode magnitude_mode = MagnitudeMode::shared_distribution;
  std::uint64_t seed = 0;
  double walk_step = 0.1;  // rad, bonafide per-bin random walk
  std::string id_prefix = "F";

  void validate() const;
};

/// Feature-domain controlled corpus. With shared_distribution the
/// magnitude maps of both classes come from one generator, so any class
/// signal lives in the phase. Bonafide phase (structured mode) is a wrapped
/// per-bin random walk; spoof phase is i.i.d. uniform in (-pi, pi].
std::vector<LabeledFeatures> synth_feature_corpus(const FeatureCorpusSpec& spec);

}  // namespace phasefuse
