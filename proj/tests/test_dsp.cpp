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

#include "phasefuse/dataset_io.hpp"
#include "phasefuse/dsp.hpp"
#include "phasefuse/entropy.hpp"
#include "phasefuse/random.hpp"

#include <cmath>

using namespace phasefuse;

namespace {

Waveform cosine(double f, double seconds, double amp = 1.0) {
  Waveform w;
  const auto n = static_cast<Eigen::Index>(seconds * kSampleRate);
  w.samples.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) w.samples[i] = amp * std::cos(2.0 * kPi * f * double(i) / kSampleRate);
  return w;
}

Waveform noise(double seconds, std::uint64_t seed) {
  Rng rng(seed);
  Waveform w;
  w.samples.resize(static_cast<Eigen::Index>(seconds * kSampleRate));
  for (Eigen::Index i = 0; i < w.samples.size(); ++i) w.samples[i] = rng.normal(0.0, 0.1);
  return w;
}

Eigen::Index argmax_row(const FeatureMap& m, Eigen::Index t) {
  Eigen::Index k;
  m.values.row(t).maxCoeff(&k);
  return k;
}

}  // namespace

TEST_CASE("stft: one second gives 30 frames of 513 bins") {
  const auto s = stft(cosine(1000.0, 1.0));
  CHECK(s.values.rows() == 30);
  CHECK(s.values.cols() == 513);
}

TEST_CASE("stft: 1 kHz cosine peaks at bin 64 and matches a direct DFT") {
  const Waveform w = cosine(1000.0, 1.0);
  const auto s = stft(w);
  const FeatureMap lp = log_power(s);
  for (Eigen::Index t = 0; t < lp.frames(); ++t) CHECK(argmax_row(lp, t) == 64);

  const Vector win = hann_window(1024);
  for (Eigen::Index t : {0, 7, 29}) {
    std::vector<double> frame(1024);
    for (int n = 0; n < 1024; ++n) frame[n] = w.samples[t * 512 + n] * win[n];
    for (int k : {0, 3, 64, 65, 300, 512}) {
      const auto want = oracle::dft_bin(frame, 1024, k);
      CHECK(std::abs(s.values(t, k) - want) < 1e-9 * (1.0 + std::abs(want)));
    }
  }
}

TEST_CASE("stft: zero input gives zero spectrum") {
  Waveform w;
  w.samples = Vector::Zero(16000);
  CHECK(stft(w).values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stft: linear in the input") {
  const Waveform x = noise(0.5, 3);
  Waveform y = x;
  y.samples *= 3.7;
  const auto a = stft(x), b = stft(y);
  const double scale = a.values.cwiseAbs().maxCoeff();
  CHECK((b.values - 3.7 * a.values).cwiseAbs().maxCoeff() <= 1e-10 * 3.7 * scale);
}

TEST_CASE("stft: DC bin of a real signal has phase 0 or pi") {
  const FeatureMap ph = phase(stft(noise(0.5, 4)));
  for (Eigen::Index t = 0; t < ph.frames(); ++t) {
    const double p = ph.values(t, 0);
    CHECK((p == 0.0 || p == doctest::Approx(kPi)));
    CHECK((ph.values(t, 512) == 0.0 || ph.values(t, 512) == doctest::Approx(kPi)));
  }
}

TEST_CASE("cqt: 108 bins, 250 Hz cosine peaks at bin 48") {
  const Waveform w = cosine(250.0, 2.0);
  const auto s = cqt(w);
  CHECK(s.values.cols() == 108);
  const FeatureMap lp = log_power(s);
  for (Eigen::Index t = 0; t < lp.frames(); ++t) CHECK(argmax_row(lp, t) == 48);
}

TEST_CASE("cqt: coefficients match direct windowed correlation") {
  const Waveform w = noise(1.5, 5);
  const CqtConfig cfg;
  const auto s = cqt(w, cfg);
  const auto kernel = cqt_kernel(cfg);
  std::vector<double> x(w.samples.data(), w.samples.data() + w.samples.size());
  const int hop = cfg.hop_length();
  for (Eigen::Index t : {Eigen::Index(0), s.values.rows() / 2, s.values.rows() - 1}) {
    for (int k : {0, 11, 48, 60, 107}) {
      const auto want = oracle::cqt_bin_direct(x, static_cast<std::size_t>(t * hop), kernel->frame_length(),
                                               cfg.center_frequency(k), cfg.quality(), kSampleRate);
      CHECK(std::abs(s.values(t, k) - want) < 1e-12);
    }
  }
}

TEST_CASE("cqt: zero input gives zero coefficients") {
  Waveform w;
  w.samples = Vector::Zero(40000);
  CHECK(cqt(w).values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cqt: white noise power is flat across bins") {
  // E|X_k|^2 = sigma^2 * len * sum(w^2) / sum(w)^2 = 1.5 sigma^2 for a Hann window.
  Rng rng(21);
  Waveform w;
  w.samples = Vector(48000);
  for (auto& v : w.samples) v = rng.normal(0.0, 0.1);
  const auto s = cqt(w);
  for (int octave = 4; octave < 9; ++octave) {
    const double p = s.values.middleCols(12 * octave, 12).cwiseAbs2().mean();
    CAPTURE(octave);
    CHECK(p / (1.5 * 0.01) == doctest::Approx(1.0).epsilon(0.1));
  }
}

TEST_CASE("cqt: adjacent centre frequencies differ by one semitone") {
  const CqtConfig cfg;
  const double r = std::pow(2.0, 1.0 / 12.0);
  for (int k = 0; k + 1 < cfg.n_bins(); ++k) {
    CHECK(cfg.center_frequency(k + 1) / cfg.center_frequency(k) == doctest::Approx(r).epsilon(1e-14));
  }
  CHECK(cfg.center_frequency(0) == 15.625);
}

TEST_CASE("log_power: dB values and floor") {
  ComplexSpectrogram s;
  s.values.resize(1, 4);
  s.values << std::complex<double>(1, 0), std::complex<double>(0, 0), std::complex<double>(0, 10),
      std::complex<double>(-6, 8);
  const FeatureMap lp = log_power(s, -100.0);
  CHECK(lp.values(0, 0) == doctest::Approx(0.0));
  CHECK(lp.values(0, 1) == doctest::Approx(-100.0));
  CHECK(lp.values(0, 2) == doctest::Approx(20.0));
  CHECK(lp.values(0, 3) == doctest::Approx(20.0));
}

TEST_CASE("log_power: scaling the signal by 10 adds 20 dB") {
  const Waveform x = noise(0.5, 6);
  Waveform y = x;
  y.samples *= 10.0;
  const FeatureMap a = log_power(stft(x)), b = log_power(stft(y));
  CHECK(((b.values.array() - a.values.array()) - 20.0).abs().maxCoeff() < 1e-9);
}

TEST_CASE("phase: atan2 convention in (-pi, pi]") {
  ComplexSpectrogram s;
  s.values.resize(1, 4);
  s.values << std::complex<double>(0, 1), std::complex<double>(0, 0), std::complex<double>(-1, 0),
      std::complex<double>(-1, -0.0);
  const FeatureMap p = phase(s);
  CHECK(p.values(0, 0) == doctest::Approx(kPi / 2));
  CHECK(p.values(0, 1) == 0.0);
  CHECK(p.values(0, 2) == doctest::Approx(kPi));
  CHECK(p.values(0, 3) == doctest::Approx(kPi));
}

TEST_CASE("lfcc: 60 columns; silence gives constant statics and zero deltas") {
  Waveform w;
  w.samples = Vector::Zero(16000);
  const FeatureMap f = lfcc(w);
  REQUIRE(f.dim() == 60);
  // Blocked matrix products may round differently per row.
  constexpr double tol = 1e-12;
  for (Eigen::Index c = 0; c < 20; ++c) {
    CHECK((f.values.col(c).array() - f.values(0, c)).abs().maxCoeff() <= tol);
  }
  CHECK(f.values.rightCols(40).cwiseAbs().maxCoeff() <= tol);
}

TEST_CASE("lfcc: c0 has the largest mean magnitude on white noise") {
  Vector acc = Vector::Zero(20);
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    const FeatureMap f = lfcc(noise(0.1, 100 + trial));
    acc += f.values.leftCols(20).cwiseAbs().colwise().mean().transpose();
  }
  Eigen::Index k;
  acc.maxCoeff(&k);
  CHECK(k == 0);
  for (Eigen::Index c = 1; c < 20; ++c) CHECK(acc[0] > acc[c]);
}

TEST_CASE("delta: constant, ramp and single-frame inputs") {
  Matrix constant = Matrix::Constant(10, 3, 4.2);
  CHECK(delta(constant).cwiseAbs().maxCoeff() == 0.0);
  Matrix ramp(10, 1);
  for (int t = 0; t < 10; ++t) ramp(t, 0) = t;
  const Matrix d = delta(ramp);
  for (int t = 2; t < 8; ++t) CHECK(d(t, 0) == doctest::Approx(1.0));
  CHECK(delta(Matrix::Constant(1, 4, 3.0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("frame-synchronous harmonic: phase is more random than magnitude") {
  HarmonicParams p;
  p.f0 = 125.0;  // 16 ms CQT hop holds exactly two periods
  p.amplitudes = {0.4, 0.2, 0.1, 0.05, 0.03};
  p.start_phases = {0.0, 0.5, 1.0, 1.5, 2.0};
  p.duration_s = 2.0;
  const Waveform w = synth_harmonic(p, 1);
  const auto s = cqt(w);
  const double hm = frame_entropy(global_minmax_normalize(log_power(s))).mean();
  const double hp = frame_entropy(global_minmax_normalize(phase(s))).mean();
  CHECK(hp > hm);
}
