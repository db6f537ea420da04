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
#include "oracles.hpp"

#include "phasefuse/entropy.hpp"
#include "phasefuse/random.hpp"

#include <algorithm>
#include <sstream>

using namespace phasefuse;

namespace {

FeatureMap map_of(const Matrix& m) {
  FeatureMap f;
  f.values = m;
  return f;
}

}  // namespace

TEST_CASE("normalize: affine map onto [0, 1]") {
  Matrix m(1, 3);
  m << 2.0, 3.0, 4.0;
  const FeatureMap n = global_minmax_normalize(map_of(m));
  CHECK(n.values(0, 1) == 0.5);
  CHECK(global_minmax_normalize(map_of(Matrix::Constant(3, 4, -7.0))).values.isConstant(0.5));

  Rng rng(1);
  Matrix r(20, 30);
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = rng.normal(3.0, 10.0);
  const FeatureMap rn = global_minmax_normalize(map_of(r));
  CHECK(rn.values.minCoeff() == 0.0);
  CHECK(rn.values.maxCoeff() == 1.0);
}

TEST_CASE("entropy: constant frame is 0 bits, one value per bin is log2(bins)") {
  CHECK(histogram_entropy(Eigen::RowVectorXd::Constant(50, 0.3), 32) == 0.0);
  Eigen::RowVectorXd row(64);
  for (int i = 0; i < 64; ++i) row[i] = (i + 0.5) / 64.0;
  CHECK(histogram_entropy(row, 64) == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("entropy: matches explicit bin counting, including edge values") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = static_cast<int>(rng.uniform_int(1, 120));
    const int bins = static_cast<int>(rng.uniform_int(2, 64));
    Eigen::RowVectorXd row(d);
    std::vector<double> v(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
      // Bin edges and the closed right end show up on purpose.
      const double u = rng.uniform();
      row[i] = u < 0.2 ? double(rng.uniform_int(0, bins)) / bins : rng.uniform();
      v[static_cast<std::size_t>(i)] = row[i];
    }
    CHECK(histogram_entropy(row, bins) == doctest::Approx(oracle::histogram_entropy_bits(v, bins)).epsilon(1e-12));
  }
}

TEST_CASE("entropy: 108 uniform samples into 32 bins average about 4.79 bits") {
  // Monte-Carlo over 10^4 frames; small-sample bias keeps it below 5 bits.
  const FeatureMap noise = random_noise_map(10000, 108, 11);
  const double mean = frame_entropy(noise, {32}).mean();
  CHECK(mean == doctest::Approx(4.79).epsilon(0.05 / 4.79));
}

TEST_CASE("entropy: permutation invariant within a frame") {
  const FeatureMap noise = random_noise_map(5, 40, 3);
  Rng rng(4);
  for (Eigen::Index t = 0; t < 5; ++t) {
    Eigen::RowVectorXd row = noise.values.row(t);
    std::vector<double> v(row.data(), row.data() + row.size());
    std::shuffle(v.begin(), v.end(), rng.engine());
    const Eigen::RowVectorXd shuffled = Eigen::Map<Eigen::RowVectorXd>(v.data(), 40);
    CHECK(histogram_entropy(row, 32) == histogram_entropy(shuffled, 32));
  }
}

TEST_CASE("entropy: invariant under affine rescaling followed by normalization") {
  // Values on a coarse grid keep bin edges exact under the affine map.
  Rng rng(5);
  Matrix m(30, 50);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = double(rng.uniform_int(0, 64));
  const auto a = frame_entropy(global_minmax_normalize(map_of(m)));
  const auto b = frame_entropy(global_minmax_normalize(map_of((m.array() * 4.0 - 3.0).matrix())));
  CHECK((a.values - b.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("noise map: deterministic, in [0, 1), mean 0.5") {
  const FeatureMap a = random_noise_map(1000, 1000, 9), b = random_noise_map(1000, 1000, 9);
  CHECK(a.values == b.values);
  CHECK(a.values.minCoeff() >= 0.0);
  CHECK(a.values.maxCoeff() < 1.0);
  // 3 sigma of the mean of 10^6 U(0,1) draws is about 0.00087.
  CHECK(std::abs(a.values.mean() - 0.5) <= 0.002);
}

TEST_CASE("report: header plus one row per frame, identical curves give identical columns") {
  EntropyCurve c;
  c.values = Vector::LinSpaced(7, 1.0, 4.0);
  c.frame_times = Vector::LinSpaced(7, 0.0, 0.6);
  c.source_label = "x";
  EntropyCurve d = c;
  d.source_label = "y";
  const std::string csv = entropy_report({c, d});
  std::istringstream in(csv);
  std::string line;
  int rows = 0;
  std::getline(in, line);
  CHECK(line == "frame,time,x,y");
  while (std::getline(in, line)) {
    ++rows;
    const auto p1 = line.find(',', line.find(',') + 1);
    const auto p2 = line.find(',', p1 + 1);
    CHECK(line.substr(p1 + 1, p2 - p1 - 1) == line.substr(p2 + 1));
  }
  CHECK(rows == 7);

  EntropyCurve zero;
  zero.values = Vector::Zero(9);
  CHECK(zero.mean() == 0.0);
  EntropyCurve shorter = c;
  shorter.values.resize(3);
  CHECK_THROWS_AS(entropy_report({c, shorter}), DataError);
}

TEST_CASE("voiced mask keeps frames within range of the loudest") {
  Matrix m(3, 2);
  m << 0.0, 0.0, -30.0, -30.0, -5.0, -5.0;
  const auto mask = voiced_frame_mask(map_of(m), 20.0);
  CHECK(mask == std::vector<bool>{true, false, true});
}
