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

// Slow, obviously-correct reference implementations. Nothing here shares
// code with the library beyond its public types.

#pragma once

#include "phasefuse/metrics.hpp"
#include "phasefuse/nn/layers.hpp"

#include <complex>
#include <vector>

namespace phasefuse::oracle {

/// Counts every threshold from scratch (O(n^2)), then applies the same
/// first-crossing interpolation rule as the library.
EerResult sweep_eer(const std::vector<double>& bonafide, const std::vector<double>& spoof);

/// Minimum over {-inf, each distinct score, +inf} by direct counting.
TdcfResult sweep_min_tdcf(const std::vector<double>& bonafide, const std::vector<double>& spoof,
                          const AsvOperatingPoint& op);

/// Six nested loops, zero padding, cross-correlation.
nn::Tensor4<double> conv2d_direct(const nn::Tensor4<double>& x, const std::vector<double>& w_oihw,
                                  const std::vector<double>& bias, int c_out, int kh, int kw, int sh, int sw, int ph,
                                  int pw);

/// Naive DFT bin k of a real frame.
std::complex<double> dft_bin(const std::vector<double>& frame, int n_fft, int k);

/// One constant-Q coefficient by direct windowed correlation: a Hann
/// window of ceil(Q fs / f) samples centred in a frame of frame_length
/// samples starting at `start`, exponential referenced to the frame start,
/// scaled by sqrt(length) / window sum.
std::complex<double> cqt_bin_direct(const std::vector<double>& x, std::size_t start, int frame_length, double f,
                                    double q, int fs);

/// Entropy of a value list by explicit bin counting.
double histogram_entropy_bits(const std::vector<double>& values_in_unit_interval, int n_bins);

}  // namespace phasefuse::oracle
