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

#include "doctest.h"

#include "phasefuse/entropy.hpp"
#include "phasefuse/featmap.hpp"
#include "phasefuse/random.hpp"

#include <algorithm>
#include <numeric>

using namespace phasefuse;

namespace {

FeatureMap ramp(Eigen::Index t, Eigen::Index d) {
  FeatureMap f;
  f.values.resize(t, d);
  for (Eigen::Index i = 0; i < t; ++i) f.values.row(i).setConstant(double(i));
  return f;
}

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

}  // namespace

TEST_CASE("extend: 900 frames become 1200 by cyclic repetition") {
  const FeatureMap e = extend_to_multiple(ramp(900, 3));
  REQUIRE(e.frames() == 1200);
  CHECK(e.values.row(900) == e.values.row(0));
  CHECK(e.values(1199, 0) == 299.0);
  CHECK(e.values.topRows(900) == ramp(900, 3).values);
}

TEST_CASE("extend: multiples are unchanged, one frame is repeated 400 times") {
  CHECK(extend_to_multiple(ramp(400, 2)).values == ramp(400, 2).values);
  const FeatureMap one = extend_to_multiple(ramp(1, 5));
  CHECK(one.frames() == 400);
  CHECK(one.values.isZero());
  CHECK_THROWS_AS(extend_to_multiple(ramp(0, 5)), DataError);
}

TEST_CASE("segments: count and starts") {
  CHECK(segment_starts(1200) == std::vector<Eigen::Index>{0, 200, 400, 600, 800});
  CHECK(segment_starts(400).size() == 1);
  CHECK(segment_starts(800).size() == 3);
  CHECK_THROWS_AS(segment_starts(900), DataError);
}

TEST_CASE("segments: cover every original frame and reassemble the extended map") {
  for (Eigen::Index t : {1, 57, 400, 401, 799, 900, 1777}) {
    const FeatureMap src = ramp(t, 2);
    const FeatureMap e = extend_to_multiple(src);
    const auto segs = segment(e);
    const auto starts = segment_starts(e.frames());
    REQUIRE(segs.size() == starts.size());
    std::vector<int> covered(static_cast<std::size_t>(t), 0);
    Matrix rebuilt = Matrix::Constant(e.frames(), 2, -1.0);
    for (std::size_t k = 0; k < segs.size(); ++k) {
      CHECK(segs[k].rows() == kSegmentFrames);
      for (Eigen::Index r = 0; r < kSegmentFrames; ++r) {
        const Eigen::Index frame = starts[k] + r;
        if (frame < t) ++covered[static_cast<std::size_t>(frame)];
      }
      rebuilt.middleRows(starts[k], kSegmentFrames) = segs[k];
    }
    CHECK(*std::min_element(covered.begin(), covered.end()) >= 1);
    CHECK(rebuilt == e.values);
  }
}

TEST_CASE("stack_channels: shapes and channel order") {
  const Matrix mag = Matrix::Constant(400, 108, 1.0), ph = Matrix::Constant(400, 108, 2.0);
  const auto a = stack_channels<double>(mag, nullptr);
  CHECK(a.shape() == nn::Shape4{1, 1, 400, 108});
  const auto b = stack_channels<double>(mag, &ph);
  CHECK(b.shape() == nn::Shape4{1, 2, 400, 108});
  CHECK(b(0, 0, 5, 5) == 1.0);
  CHECK(b(0, 1, 5, 5) == 2.0);
  const Matrix wide = Matrix::Zero(400, 513);
  CHECK_THROWS_AS(stack_channels<double>(mag, &wide), DataError);
}

TEST_CASE("aggregate: mean, identity, permutation invariance, bounds") {
  const std::vector<double> v{0.2, 0.4};
  CHECK(aggregate_scores(v) == doctest::Approx(0.3));
  const std::vector<double> one{-1.25};
  CHECK(aggregate_scores(one) == -1.25);
  CHECK_THROWS_AS(aggregate_scores(std::vector<double>{}), DataError);
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(static_cast<std::size_t>(rng.uniform_int(1, 9)));
    for (auto& x : s) x = rng.normal(0.0, 5.0);
    const double m = aggregate_scores(s);
    CHECK(m >= *std::min_element(s.begin(), s.end()) - 1e-12);
    CHECK(m <= *std::max_element(s.begin(), s.end()) + 1e-12);
    std::vector<double> p = s;
    std::reverse(p.begin(), p.end());
    CHECK(aggregate_scores(p) == doctest::Approx(m).epsilon(1e-14));
  }
}

TEST_CASE("segment corpus and batches") {
  std::vector<LabeledFeatures> items(2);
  items[0].record.label = Label::bonafide;
  items[0].magnitude = ramp(900, 4);
  items[0].phase = ramp(900, 4);
  items[1].record.label = Label::spoof;
  items[1].magnitude = ramp(400, 4);
  items[1].phase = ramp(400, 4);
  const SegmentedCorpus c = segment_corpus(items);
  REQUIRE(c.segments.size() == 6);
  const auto batch = make_batch<float>(c, c.segments, true);
  CHECK(batch.magnitude.shape() == nn::Shape4{6, 1, 400, 4});
  CHECK(batch.phase.shape() == nn::Shape4{6, 1, 400, 4});
  CHECK(batch.labels == std::vector<int>{1, 1, 1, 1, 1, 0});
  CHECK(batch.magnitude(1, 0, 0, 0) == 200.0f);
  CHECK(batch.magnitude(4, 0, 100, 0) == 0.0f);  // frame 900 wraps to frame 0
  const auto mag_only = make_batch<float>(c, c.segments, false);
  CHECK(mag_only.phase.size() == 0);
}

TEST_CASE("controlled corpus: magnitude distribution shared across classes") {
  FeatureCorpusSpec spec;
  spec.n_per_class = 10000;
  spec.frames = 1;
  spec.dim = 16;
  spec.seed = 21;
  const auto items = synth_feature_corpus(spec);
  std::vector<double> bona, spoof;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const double v = items[i].magnitude.values(0, static_cast<Eigen::Index>(i % 16));
    (items[i].record.label == Label::bonafide ? bona : spoof).push_back(v);
  }
  // Critical value at alpha = 0.01 for n = m = 10^4.
  const double crit = 1.628 * std::sqrt(2.0 / 10000.0);
  CHECK(ks_statistic(bona, spoof) < crit);
}

TEST_CASE("controlled corpus: spoof phase looks like noise, bonafide phase does not") {
  FeatureCorpusSpec spec;
  spec.n_per_class = 4;
  spec.dim = 108;
  spec.seed = 22;
  const auto items = synth_feature_corpus(spec);
  const double noise = frame_entropy(random_noise_map(400, 108, 1)).mean();
  for (const auto& it : items) {
    const double h = frame_entropy(global_minmax_normalize(it.phase)).mean();
    if (it.record.label == Label::spoof) {
      CHECK(std::abs(h - noise) < 0.1);
      CHECK(it.record.attack_id == "SYN-PHS");
    }
  }
  const auto again = synth_feature_corpus(spec);
  for (std::size_t i = 0; i < items.size(); ++i) {
    CHECK(items[i].magnitude.values == again[i].magnitude.values);
    CHECK(items[i].phase.values == again[i].phase.values);
    CHECK(items[i].record == again[i].record);
  }
}
